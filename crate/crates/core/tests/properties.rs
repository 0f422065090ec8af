use std::time::Duration;

use clgen::cost::node_costs;
use clgen::degree_model::synth_powerlaw;
use clgen::edge_skip::serial_cl;
use clgen::partition::{plan_ucp_oracle, plan_ucp_rank};
use clgen::runtime::{load_edges, EdgeFormat, OutputSpec};
use clgen::{run_generate, run_inproc, Error, GenConfig, Scheme, SortPolicy, WeightSequence};
use proptest::prelude::*;

fn weights() -> impl Strategy<Value = WeightSequence> {
    prop::collection::vec(0.0f64..50.0, 1..400)
        .prop_map(|w| WeightSequence::new(w, SortPolicy::SortDesc).unwrap())
        .prop_filter("positive sum", |ws| ws.sum() > 0.0)
}

fn parallel_plan(ws: &WeightSequence, parts: usize) -> Vec<clgen::partition::UcpRank> {
    run_inproc(parts, Duration::from_secs(60), |c| {
        plan_ucp_rank(ws, c).map_err(|e| match e {
            Error::Comm(c) => c,
            other => panic!("{other}"),
        })
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parallel_plan_is_oracle_plan(ws in weights(), parts in 1usize..24) {
        let oracle = plan_ucp_oracle(&ws, parts).unwrap();
        let ranks = parallel_plan(&ws, parts);
        for r in &ranks {
            prop_assert_eq!(&r.plan.boundaries, &oracle.boundaries);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&r.plan.per_partition_cost), bits(&oracle.per_partition_cost));
        }
        prop_assert_eq!(ranks.iter().map(|r| r.sent).sum::<usize>(), 2 * (parts - 1));
    }

    #[test]
    fn plan_covers_nodes_and_respects_load_bound(ws in weights(), parts in 1usize..40) {
        let plan = plan_ucp_oracle(&ws, parts).unwrap();
        prop_assert_eq!(plan.boundaries[0], 0);
        prop_assert_eq!(*plan.boundaries.last().unwrap() as usize, ws.len());
        prop_assert!(plan.boundaries.windows(2).all(|b| b[0] <= b[1]));
        let costs = node_costs(&ws);
        let max_c = costs.iter().copied().fold(0.0, f64::max);
        let total: f64 = costs.iter().sum();
        let mean = total / parts as f64;
        for c in &plan.per_partition_cost {
            prop_assert!(*c <= mean + max_c + 1e-9 * total);
        }
        prop_assert!((plan.total_cost() - total).abs() <= 1e-9 * total);
    }

    #[test]
    fn output_independent_of_scheme_and_workers(ws in weights(), parts in 1usize..9, seed in any::<u64>()) {
        let mut expect = Vec::new();
        serial_cl(&ws, seed, &mut expect);
        for scheme in Scheme::ALL {
            let config = GenConfig { keep_edges: true, ..GenConfig::new(scheme, parts, seed) };
            let run = run_generate(&ws, &config).unwrap();
            prop_assert_eq!(run.edges.as_ref().unwrap(), &expect);
            prop_assert_eq!(run.report.total_edges(), expect.len() as u64);
            prop_assert_eq!(run.report.total_nodes(), ws.len());
        }
    }
}

#[test]
fn merged_files_byte_identical() {
    let ws = synth_powerlaw(20_000, 2.3, 1.0, 150.0, 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for format in [EdgeFormat::Text, EdgeFormat::Binary] {
        let mut reference: Option<Vec<u8>> = None;
        for scheme in Scheme::ALL {
            for parts in [1, 2, 4, 8] {
                let out = dir.path().join(format!("{format:?}-{scheme}-{parts}"));
                let mut config = GenConfig::new(scheme, parts, 31);
                config.output = Some(OutputSpec { dir: out.clone(), format, per_rank: true, merged: true });
                let run = run_generate(&ws, &config).unwrap();
                let bytes = std::fs::read(out.join("edges")).unwrap();
                let mut per_rank = 0;
                for r in 0..parts {
                    per_rank += load_edges(out.join(format!("edges_{r}"))).unwrap().len() as u64;
                }
                assert_eq!(per_rank, run.report.total_edges());
                match &reference {
                    None => reference = Some(bytes),
                    Some(r) => assert!(r == &bytes, "{format:?} {scheme} P={parts}"),
                }
            }
        }
    }
}

#[test]
fn relabeled_output_uses_input_labels() {
    let ws = WeightSequence::new(vec![1.0, 5.0, 3.0, 4.0, 2.0, 6.0], SortPolicy::SortDesc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut config = GenConfig::new(Scheme::Ucp, 2, 4);
    config.keep_edges = true;
    config.relabel = true;
    config.output = Some(OutputSpec { dir: dir.path().to_owned(), format: EdgeFormat::Text, per_rank: false, merged: true });
    let run = run_generate(&ws, &config).unwrap();
    let written = load_edges(dir.path().join("edges")).unwrap();
    let labels = ws.orig_labels();
    let mapped: Vec<_> = run.edges.unwrap().into_iter().map(|e| e.relabel(labels)).collect();
    assert_eq!(written, mapped);
}
