//! Degree statistics, load balance, partition lemmas, boundary counts and
//! scaling runs.

use std::fmt::Write as _;
use std::time::Duration;

use crate::comm::{run_inproc, DEFAULT_TIMEOUT};
use crate::cost::node_costs;
use crate::degree_model::{expected_total_edges, synth_powerlaw, WeightSequence};
use crate::edge_skip::{naive_pair_sampler, pair_probability, serial_cl, Edge};
use crate::error::{Error, Result};
use crate::partition::{plan_naive, plan_rrp, plan_ucp_rank, Scheme};
use crate::runtime::{run_generate, GenConfig, GenReport};

/// Log bin of a degree: 0 holds degree zero (or expected degree below 1),
/// bin `k >= 1` holds `[2^(k-1), 2^k)`.
pub fn log_bin(x: f64) -> usize {
    if x < 1.0 {
        0
    } else {
        x.log2().floor() as usize + 1
    }
}

/// Lower and upper edge of a log bin.
pub fn bin_range(bin: usize) -> (f64, f64) {
    match bin {
        0 => (0.0, 1.0),
        k => (2f64.powi(k as i32 - 1), 2f64.powi(k as i32)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeHistogram {
    /// `counts[d]` nodes have degree `d`.
    pub counts: Vec<u64>,
    pub n: usize,
    pub total_edges: u64,
}

impl DegreeHistogram {
    pub fn from_edges(edges: &[Edge], n: usize) -> Result<Self> {
        Ok(Self::from_degrees(&degrees(edges, n)?, edges.len() as u64))
    }

    pub fn from_degrees(deg: &[u64], total_edges: u64) -> Self {
        let max = deg.iter().copied().max().unwrap_or(0) as usize;
        let mut counts = vec![0; max + 1];
        for &d in deg {
            counts[d as usize] += 1;
        }
        Self { counts, n: deg.len(), total_edges }
    }

    pub fn max_degree(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn degree_sum(&self) -> u64 {
        self.counts.iter().enumerate().map(|(d, &c)| d as u64 * c).sum()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.degree_sum() as f64 / self.n as f64
        }
    }

    /// Node counts per log bin.
    pub fn log_binned(&self) -> Vec<u64> {
        let mut bins = vec![0; log_bin(self.max_degree() as f64) + 1];
        for (d, &c) in self.counts.iter().enumerate() {
            bins[log_bin(d as f64)] += c;
        }
        bins
    }
}

/// Undirected degree of every node.
pub fn degrees(edges: &[Edge], n: usize) -> Result<Vec<u64>> {
    let mut deg = vec![0u64; n];
    for e in edges {
        for x in [e.u, e.v] {
            *deg.get_mut(x as usize).ok_or(Error::NodeOutOfRange { index: x, n })? += 1;
        }
    }
    Ok(deg)
}

/// Expected degree `w_i - w_i^2 / S` of every node.
pub fn expected_degrees(ws: &WeightSequence) -> Vec<f64> {
    let s = ws.sum();
    ws.weights()
        .iter()
        .map(|&w| if s > 0.0 { w - w * w / s } else { 0.0 })
        .collect()
}

/// Variance of the total edge count, `sum p(1 - p)` over pairs, for weights
/// whose pair probabilities are not clamped.
pub fn edge_count_variance(ws: &WeightSequence) -> f64 {
    let s = ws.sum();
    if s <= 0.0 {
        return 0.0;
    }
    let (mut sq, mut quad) = (0.0, 0.0);
    for &w in ws.weights() {
        sq += w * w;
        quad += w * w * w * w;
    }
    let sum_p2 = (sq * sq - quad) / (2.0 * s * s);
    expected_total_edges(ws) - sum_p2
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinComparison {
    pub bin: usize,
    pub expected: f64,
    pub observed: u64,
    pub rel_error: f64,
    /// Expected mass is large enough for the error to be meaningful.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    pub mean_generated: f64,
    pub mean_expected: f64,
    pub mean_rel_error: f64,
    pub edges: u64,
    pub expected_edges: f64,
    pub edge_sigma: f64,
    pub bins: Vec<BinComparison>,
}

impl FidelityReport {
    /// Minimum expected node count for a bin to be flagged.
    pub const MIN_MASS: f64 = 100.0;

    pub fn max_flagged_error(&self) -> f64 {
        self.bins
            .iter()
            .filter(|b| b.flagged)
            .map(|b| b.rel_error)
            .fold(0.0, f64::max)
    }

    /// Deviation of the edge count in standard deviations.
    pub fn edge_z(&self) -> f64 {
        if self.edge_sigma > 0.0 {
            (self.edges as f64 - self.expected_edges) / self.edge_sigma
        } else {
            0.0
        }
    }

    pub fn key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mean_degree={}", self.mean_generated);
        let _ = writeln!(out, "mean_expected={}", self.mean_expected);
        let _ = writeln!(out, "mean_rel_error={}", self.mean_rel_error);
        let _ = writeln!(out, "edges={}", self.edges);
        let _ = writeln!(out, "expected_edges={}", self.expected_edges);
        let _ = writeln!(out, "edge_z={}", self.edge_z());
        let _ = writeln!(out, "max_bin_error={}", self.max_flagged_error());
        for b in &self.bins {
            let (lo, hi) = bin_range(b.bin);
            let _ = writeln!(
                out,
                "bin{}=[{lo},{hi}) expected={:.1} observed={} rel_error={:.4} flagged={}",
                b.bin, b.expected, b.observed, b.rel_error, b.flagged
            );
        }
        out
    }
}

/// Compares a generated degree histogram with the expected degrees of `ws`.
pub fn compare_distributions(ws: &WeightSequence, hist: &DegreeHistogram) -> FidelityReport {
    let lambda = expected_degrees(ws);
    let mean_expected = lambda.iter().sum::<f64>() / lambda.len().max(1) as f64;
    let mean_generated = hist.mean_degree();

    let mut expected_bins = vec![0.0; 1];
    for &l in &lambda {
        let b = log_bin(l);
        if b >= expected_bins.len() {
            expected_bins.resize(b + 1, 0.0);
        }
        expected_bins[b] += 1.0;
    }
    let observed_bins = hist.log_binned();
    let len = expected_bins.len().max(observed_bins.len());
    let bins = (0..len)
        .map(|bin| {
            let expected = expected_bins.get(bin).copied().unwrap_or(0.0);
            let observed = observed_bins.get(bin).copied().unwrap_or(0);
            let rel_error = if expected > 0.0 {
                (observed as f64 - expected).abs() / expected
            } else if observed == 0 {
                0.0
            } else {
                f64::INFINITY
            };
            BinComparison {
                bin,
                expected,
                observed,
                rel_error,
                flagged: expected >= FidelityReport::MIN_MASS,
            }
        })
        .collect();

    FidelityReport {
        mean_generated,
        mean_expected,
        mean_rel_error: if mean_expected > 0.0 {
            (mean_generated - mean_expected).abs() / mean_expected
        } else {
            mean_generated
        },
        edges: hist.total_edges,
        expected_edges: expected_total_edges(ws),
        edge_sigma: edge_count_variance(ws).max(0.0).sqrt(),
        bins,
    }
}

/// Per-pair edge frequencies of the skip generator and of the pair-by-pair
/// sampler, as deviations from `min(w_u w_v / S, 1)` in standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub trials: u64,
    pub pairs: usize,
    pub max_z_skip: f64,
    pub max_z_oracle: f64,
}

fn pair_z(count: u64, trials: u64, p: f64) -> f64 {
    let freq = count as f64 / trials as f64;
    let var = p * (1.0 - p) / trials as f64;
    if var > 0.0 {
        (freq - p).abs() / var.sqrt()
    } else if freq == p {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Runs both generators `trials` times (seeds `seed..seed + trials`) on a
/// small instance and reports the worst per-pair deviation of each.
pub fn oracle_equivalence(ws: &WeightSequence, trials: u64, seed: u64) -> Result<OracleReport> {
    let n = ws.len();
    let mut skip = vec![0u64; n * n];
    let mut oracle = vec![0u64; n * n];
    let mut edges = Vec::new();
    for t in 0..trials {
        let s = seed.wrapping_add(t);
        edges.clear();
        naive_pair_sampler(ws, s, &mut edges)?;
        for e in &edges {
            oracle[e.u as usize * n + e.v as usize] += 1;
        }
        edges.clear();
        serial_cl(ws, s, &mut edges);
        for e in &edges {
            skip[e.u as usize * n + e.v as usize] += 1;
        }
    }
    let w = ws.weights();
    let (mut max_z_skip, mut max_z_oracle) = (0.0f64, 0.0f64);
    for u in 0..n {
        for v in u + 1..n {
            let p = pair_probability(w[u], w[v], ws.sum());
            max_z_skip = max_z_skip.max(pair_z(skip[u * n + v], trials, p));
            max_z_oracle = max_z_oracle.max(pair_z(oracle[u * n + v], trials, p));
        }
    }
    Ok(OracleReport {
        trials,
        pairs: n * n.saturating_sub(1) / 2,
        max_z_skip,
        max_z_oracle,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaCheck {
    pub lemma: u8,
    pub what: String,
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Outcome of evaluating the three partition lemmas on one instance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LemmaLedger {
    pub checks: Vec<LemmaCheck>,
}

impl LemmaLedger {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LemmaCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }

    pub fn count(&self, lemma: u8) -> usize {
        self.checks.iter().filter(|c| c.lemma == lemma).count()
    }
}

/// Relative slack for comparisons of sums of node costs.
const LEMMA_RTOL: f64 = 1e-9;

fn at_least(value: f64, bound: f64, scale: f64) -> bool {
    value >= bound - LEMMA_RTOL * scale.abs().max(1.0)
}

/// Evaluates, for `parts` partitions of `ws`:
///
/// 1. node costs never increase along the sorted order;
/// 2. adjacent equal-size blocks of the equal-count plan differ in cost by at
///    least `x^2 / S` times the product of their mean weights;
/// 3. round-robin partitions `i < j` of equal size differ in cost by a value
///    in `[0, w_i]` (in `[0, w_i + 1]` when `V_i` holds one node more).
///
/// Check 1 is recorded once per instance as the worst adjacent pair.
pub fn verify_lemmas(ws: &WeightSequence, parts: usize) -> Result<LemmaLedger> {
    let costs = node_costs(ws);
    let w = ws.weights();
    let s = ws.sum();
    let mut ledger = LemmaLedger::default();

    let worst = costs
        .windows(2)
        .map(|c| (c[0] - c[1], c[0]))
        .fold((f64::INFINITY, 1.0), |a, b| if b.0 < a.0 { b } else { a });
    ledger.checks.push(LemmaCheck {
        lemma: 1,
        what: "min c_u - c_(u+1)".into(),
        value: if costs.len() < 2 { 0.0 } else { worst.0 },
        bound: 0.0,
        holds: costs.len() < 2 || worst.0 >= -1e-12 * worst.1.abs().max(1.0),
    });

    let naive = plan_naive(ws, parts)?;
    for i in 0..parts.saturating_sub(1) {
        let x = naive.partition_len(i);
        if x == 0 || x != naive.partition_len(i + 1) {
            continue;
        }
        let mean_weight = |j: usize| {
            let r = naive.interval(j).unwrap();
            w[r.start as usize..r.end as usize].iter().sum::<f64>() / x as f64
        };
        let gap = naive.per_partition_cost[i] - naive.per_partition_cost[i + 1];
        let bound = (x * x) as f64 / s * mean_weight(i) * mean_weight(i + 1);
        ledger.checks.push(LemmaCheck {
            lemma: 2,
            what: format!("naive c(V_{i}) - c(V_{})", i + 1),
            value: gap,
            bound,
            holds: at_least(gap, bound, naive.per_partition_cost[i]),
        });
    }

    let rrp = plan_rrp(ws, parts)?;
    for (i, &w_i) in w.iter().enumerate().take(parts) {
        for j in i + 1..parts {
            let (li, lj) = (rrp.partition_len(i), rrp.partition_len(j));
            if li == 0 {
                continue;
            }
            let gap = rrp.per_partition_cost[i] - rrp.per_partition_cost[j];
            let upper = w_i + if li > lj { 1.0 } else { 0.0 };
            let scale = rrp.per_partition_cost[i];
            ledger.checks.push(LemmaCheck {
                lemma: 3,
                what: format!("rrp c(V_{i}) - c(V_{j})"),
                value: gap,
                bound: upper,
                holds: at_least(gap, 0.0, scale) && at_least(upper, gap, scale),
            });
        }
    }
    Ok(ledger)
}

/// `max / mean` of non-negative values, 1 when all are zero.
pub fn imbalance(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let max = values.iter().copied().fold(0.0, f64::max);
    if mean > 0.0 {
        max / mean
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub expected_cost: Vec<f64>,
    pub realized_edges: Vec<u64>,
    pub wall: Vec<Duration>,
    pub cpu: Vec<Duration>,
}

impl LoadReport {
    pub fn from_report(report: &GenReport) -> Self {
        Self {
            expected_cost: report.ranks.iter().map(|r| r.expected_cost).collect(),
            realized_edges: report.ranks.iter().map(|r| r.edges).collect(),
            wall: report.ranks.iter().map(|r| r.gen_wall).collect(),
            cpu: report.ranks.iter().map(|r| r.gen_cpu).collect(),
        }
    }

    pub fn cost_ratio(&self) -> f64 {
        imbalance(&self.expected_cost)
    }

    pub fn edge_ratio(&self) -> f64 {
        imbalance(&self.realized_edges.iter().map(|&e| e as f64).collect::<Vec<_>>())
    }

    pub fn wall_ratio(&self) -> f64 {
        imbalance(&self.wall.iter().map(Duration::as_secs_f64).collect::<Vec<_>>())
    }

    pub fn cpu_ratio(&self) -> f64 {
        imbalance(&self.cpu.iter().map(Duration::as_secs_f64).collect::<Vec<_>>())
    }

    pub fn key_values(&self) -> String {
        format!(
            "cost_ratio={}\nedge_ratio={}\nwall_ratio={}\ncpu_ratio={}\n",
            self.cost_ratio(),
            self.edge_ratio(),
            self.wall_ratio(),
            self.cpu_ratio()
        )
    }
}

/// Boundaries of the uniform-cost plan falling in each rank's block.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusRow {
    pub parts: usize,
    /// Lower partition boundaries `n_k` (including `n_0`) located in each block.
    pub lower: Vec<usize>,
    /// Boundaries `n_k`, `k >= 1`, at a node of each block.
    pub interior: Vec<usize>,
}

impl CensusRow {
    pub fn max_lower(&self) -> usize {
        self.lower.iter().copied().max().unwrap_or(0)
    }

    pub fn max_interior(&self) -> usize {
        self.interior.iter().copied().max().unwrap_or(0)
    }
}

/// Runs the parallel uniform-cost planner for each `P` and records how many
/// boundaries each rank found in its block.
pub fn boundary_census(ws: &WeightSequence, sweep: &[usize]) -> Result<Vec<CensusRow>> {
    sweep
        .iter()
        .map(|&parts| {
            let ranks = run_inproc(parts, DEFAULT_TIMEOUT, |c| {
                plan_ucp_rank(ws, c).map_err(|e| match e {
                    Error::Comm(c) => c,
                    _ => crate::error::CommError::Aborted,
                })
            })?;
            Ok(CensusRow {
                parts,
                lower: ranks.iter().map(|r| r.found.lower_boundaries_in(&r.block)).collect(),
                interior: ranks.iter().map(|r| r.found.interior_in(&r.block)).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub workers: usize,
    pub n: usize,
    pub edges: u64,
    /// Median over repetitions of the slowest rank's time.
    pub seconds: f64,
    /// `T_1 / T_P` for strong scaling, `T_P / T_1` for weak scaling.
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingMode {
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable {
    pub mode: ScalingMode,
    pub scheme: Scheme,
    pub rows: Vec<ScalingRow>,
}

impl ScalingTable {
    pub fn table(&self) -> String {
        let label = match self.mode {
            ScalingMode::Strong => "speedup",
            ScalingMode::Weak => "T_P/T_1",
        };
        let mut out = format!("{:>8} {:>10} {:>12} {:>10} {:>9}\n", "workers", "n", "edges", "seconds", label);
        for r in &self.rows {
            let _ = writeln!(out, "{:>8} {:>10} {:>12} {:>10.4} {:>9.3}", r.workers, r.n, r.edges, r.seconds, r.ratio);
        }
        out
    }

    pub fn key_values(&self) -> String {
        let key = match self.mode {
            ScalingMode::Strong => "speedup",
            ScalingMode::Weak => "weak_ratio",
        };
        let mut out = String::new();
        for r in &self.rows {
            let _ = writeln!(out, "workers{}.seconds={:.6}", r.workers, r.seconds);
            let _ = writeln!(out, "workers{}.{key}={:.4}", r.workers, r.ratio);
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("workers,n,edges,seconds,ratio\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.workers, r.n, r.edges, r.seconds, r.ratio);
        }
        out
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn timed_run(ws: &WeightSequence, scheme: Scheme, workers: usize, seed: u64, reps: usize) -> Result<(f64, u64)> {
    let mut times = Vec::with_capacity(reps);
    let mut edges = 0;
    for _ in 0..reps.max(1) {
        let run = run_generate(ws, &GenConfig::new(scheme, workers, seed))?;
        times.push(run.report.max_wall().as_secs_f64());
        edges = run.report.total_edges();
    }
    Ok((median(times), edges))
}

/// Fixed input, growing worker count. The first entry of `workers` is the baseline.
pub fn bench_strong(ws: &WeightSequence, scheme: Scheme, workers: &[usize], seed: u64, reps: usize) -> Result<ScalingTable> {
    let mut rows: Vec<ScalingRow> = Vec::new();
    for &p in workers {
        let (seconds, edges) = timed_run(ws, scheme, p, seed, reps)?;
        let base = rows.first().map_or(seconds, |r| r.seconds);
        rows.push(ScalingRow { workers: p, n: ws.len(), edges, seconds, ratio: base / seconds });
    }
    Ok(ScalingTable { mode: ScalingMode::Strong, scheme, rows })
}

/// Power-law input of the same shape per worker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakSpec {
    pub nodes_per_worker: usize,
    pub gamma: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub weight_seed: u64,
}

/// Input grows with the worker count. The first entry of `workers` is the baseline.
pub fn bench_weak(spec: WeakSpec, scheme: Scheme, workers: &[usize], seed: u64, reps: usize) -> Result<ScalingTable> {
    let mut rows: Vec<ScalingRow> = Vec::new();
    for &p in workers {
        let n = spec.nodes_per_worker * p;
        let ws = synth_powerlaw(n, spec.gamma, spec.w_min, spec.w_max, spec.weight_seed)?;
        let (seconds, edges) = timed_run(&ws, scheme, p, seed, reps)?;
        let base = rows.first().map_or(seconds, |r| r.seconds);
        rows.push(ScalingRow { workers: p, n, edges, seconds, ratio: seconds / base });
    }
    Ok(ScalingTable { mode: ScalingMode::Weak, scheme, rows })
}
