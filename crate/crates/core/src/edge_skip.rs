//! Edge-skipping Chung–Lu generation in `O(n + m)` time, and the quadratic
//! pair-by-pair sampler it is checked against.
//!
//! Every source node `u` draws from its own [`RngStream`] keyed by
//! `(seed, u)`, so the edges produced for `u` do not depend on which worker
//! handles it or in what order sources are visited.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;

use crate::degree_model::WeightSequence;
use crate::error::{Error, Result};

/// Undirected edge stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub u: u64,
    pub v: u64,
}

impl Edge {
    pub fn new(a: u64, b: u64) -> Self {
        debug_assert_ne!(a, b);
        if a < b {
            Edge { u: a, v: b }
        } else {
            Edge { u: b, v: a }
        }
    }

    /// Maps both endpoints through `labels` (sorted position to input label).
    pub fn relabel(self, labels: &[u64]) -> Edge {
        Edge::new(labels[self.u as usize], labels[self.v as usize])
    }
}

/// Receiver of generated edges.
pub trait EdgeSink {
    fn push(&mut self, edge: Edge);
}

impl EdgeSink for Vec<Edge> {
    fn push(&mut self, edge: Edge) {
        Vec::push(self, edge);
    }
}

/// Sink that only counts.
#[derive(Debug, Default, Clone, Copy)]
pub struct CountingSink(pub u64);

impl EdgeSink for CountingSink {
    fn push(&mut self, _edge: Edge) {
        self.0 += 1;
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the random stream of source node `u`.
///
/// For a fixed `global_seed` this is a bijection of `u`: the input to the
/// final mixer is `mix(seed) + u·φ` with odd `φ`, and the mixer is invertible.
pub fn node_rng_key(global_seed: u64, u: u64) -> u64 {
    mix64(mix64(global_seed).wrapping_add(u.wrapping_mul(GOLDEN)))
}

/// Deterministic uniform reals strictly inside `(0, 1)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: Pcg64Mcg,
}

impl RngStream {
    pub fn from_key(key: u64) -> Self {
        Self {
            rng: Pcg64Mcg::seed_from_u64(key),
        }
    }

    pub fn for_node(global_seed: u64, u: u64) -> Self {
        Self::from_key(node_rng_key(global_seed, u))
    }

    /// Next draw; exact zeros are rejected (the generator never returns 1).
    pub fn open01(&mut self) -> f64 {
        loop {
            let r: f64 = self.rng.gen();
            if r > 0.0 {
                return r;
            }
        }
    }
}

/// `min(w_u w_v / S, 1)`, the probability of edge `(u, v)`.
#[inline]
pub fn pair_probability(w_u: f64, w_v: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    (w_u * w_v / s).min(1.0)
}

/// Number of candidates skipped before the next trial succeeds:
/// `floor(ln r / ln(1 - p))`, or 0 when `p == 1`.
///
/// Saturates at `u64::MAX` when `p` is so small the skip overflows.
pub fn skip_length(p: f64, r: f64) -> Result<u64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} outside (0, 1]")));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("r = {r} outside (0, 1)")));
    }
    Ok(skip_unchecked(p, r))
}

#[inline]
fn skip_unchecked(p: f64, r: f64) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    // ln_1p keeps ln(1 - p) accurate for tiny p.
    let delta = (r.ln() / (-p).ln_1p()).floor();
    if delta >= u64::MAX as f64 {
        u64::MAX
    } else {
        delta as u64
    }
}

/// One step of the skip-and-accept walk for a source node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub v: u64,
    /// Probability of edge `(u, v)`.
    pub q: f64,
    /// Probability the skip distribution was drawn with.
    pub p: f64,
    pub accepted: bool,
}

/// The skip-and-accept walk over destinations `v > u` for one source node.
///
/// Yields every candidate the walk visits, accepted or not.
#[derive(Debug, Clone)]
pub struct SourceWalk<'a> {
    weights: &'a [f64],
    s: f64,
    w_u: f64,
    next: u64,
    p: f64,
    rng: RngStream,
}

impl<'a> SourceWalk<'a> {
    pub fn new(weights: &'a [f64], s: f64, u: u64, seed: u64) -> Self {
        let n = weights.len() as u64;
        let w_u = weights[u as usize];
        let next = u + 1;
        let p = if next < n {
            pair_probability(w_u, weights[next as usize], s)
        } else {
            0.0
        };
        Self {
            weights,
            s,
            w_u,
            next,
            p,
            rng: RngStream::for_node(seed, u),
        }
    }
}

impl Iterator for SourceWalk<'_> {
    type Item = Candidate;

    fn next(&mut self) -> Option<Candidate> {
        let n = self.weights.len() as u64;
        if self.next >= n || self.p <= 0.0 {
            return None;
        }
        let p = self.p;
        let delta = if p < 1.0 {
            skip_unchecked(p, self.rng.open01())
        } else {
            0
        };
        let v = self.next.saturating_add(delta);
        if v >= n {
            self.next = n;
            return None;
        }
        let q = pair_probability(self.w_u, self.weights[v as usize], self.s);
        let accepted = self.rng.open01() < q / p;
        self.p = q;
        self.next = v + 1;
        Some(Candidate { v, q, p, accepted })
    }
}

/// Runs the skip-and-accept loop for every source in `nodes`, pushing each
/// accepted edge into `sink`. Returns the number of edges emitted.
///
/// `s` is the weight sum the probabilities are normalised by.
pub fn create_edges<I, K>(ws: &WeightSequence, s: f64, nodes: I, seed: u64, sink: &mut K) -> u64
where
    I: IntoIterator<Item = u64>,
    K: EdgeSink + ?Sized,
{
    let weights = ws.weights();
    let mut count = 0;
    for u in nodes {
        assert!((u as usize) < weights.len(), "source {u} out of range");
        for c in SourceWalk::new(weights, s, u, seed) {
            if c.accepted {
                sink.push(Edge { u, v: c.v });
                count += 1;
            }
        }
    }
    count
}

/// Generates the whole graph on one worker.
pub fn serial_cl<K: EdgeSink + ?Sized>(ws: &WeightSequence, seed: u64, sink: &mut K) -> u64 {
    create_edges(ws, ws.sum(), 0..ws.len() as u64, seed, sink)
}

/// Default node limit for [`naive_pair_sampler`].
pub const ORACLE_CAP: usize = 2048;

/// Flips every pair `u < v` independently with probability
/// `min(w_u w_v / S, 1)`. Quadratic; used as a statistical reference.
pub fn naive_pair_sampler<K: EdgeSink + ?Sized>(
    ws: &WeightSequence,
    seed: u64,
    sink: &mut K,
) -> Result<u64> {
    naive_pair_sampler_capped(ws, seed, sink, ORACLE_CAP)
}

pub fn naive_pair_sampler_capped<K: EdgeSink + ?Sized>(
    ws: &WeightSequence,
    seed: u64,
    sink: &mut K,
    cap: usize,
) -> Result<u64> {
    let n = ws.len();
    if n > cap {
        return Err(Error::OracleCap { n, cap });
    }
    let w = ws.weights();
    let s = ws.sum();
    // Separate key space from the skip generator so the two are not correlated.
    let mut rng = RngStream::from_key(mix64(seed ^ 0x6e61_6976_6570_6169));
    let mut count = 0;
    for u in 0..n {
        for v in u + 1..n {
            if rng.open01() < pair_probability(w[u], w[v], s) {
                sink.push(Edge {
                    u: u as u64,
                    v: v as u64,
                });
                count += 1;
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degree_model::{synth_constant, SortPolicy};
    use std::collections::HashSet;

    fn seq(w: &[f64]) -> WeightSequence {
        WeightSequence::new(w.to_vec(), SortPolicy::SortDesc).unwrap()
    }

    #[test]
    fn skip_length_examples() {
        assert_eq!(skip_length(1.0, 0.3).unwrap(), 0);
        assert_eq!(skip_length(1.0, 0.999).unwrap(), 0);
        assert_eq!(skip_length(0.5, 0.25).unwrap(), 2);
        assert_eq!(skip_length(0.5, 0.6).unwrap(), 0);
        assert_eq!(skip_length(1e-300, 0.5).unwrap(), u64::MAX);
    }

    #[test]
    fn skip_length_rejects_bad_inputs() {
        assert!(skip_length(0.0, 0.5).is_err());
        assert!(skip_length(1.5, 0.5).is_err());
        assert!(skip_length(0.5, 0.0).is_err());
        assert!(skip_length(0.5, 1.0).is_err());
        assert!(skip_length(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn skip_length_matches_geometric_definition() {
        // δ is the number of failures before the first success of a p-coin,
        // so Pr{δ >= k} = (1-p)^k. Check through the inverse: δ >= k iff r <= (1-p)^k.
        for &p in &[0.1, 0.3, 0.5, 0.9] {
            for k in 1..6u64 {
                let boundary = (1.0f64 - p).powi(k as i32);
                assert!(skip_length(p, boundary * 0.999).unwrap() >= k);
                assert!(skip_length(p, (boundary * 1.001).min(0.999_999)).unwrap() < k);
            }
        }
    }

    #[test]
    fn node_keys_distinct_and_stable() {
        assert_eq!(node_rng_key(42, 7), node_rng_key(42, 7));
        assert_ne!(node_rng_key(42, 7), node_rng_key(42, 8));
        assert_ne!(node_rng_key(42, 7), node_rng_key(43, 7));
        let keys: HashSet<u64> = (0..1_000_000u64).map(|u| node_rng_key(9, u)).collect();
        assert_eq!(keys.len(), 1_000_000);
    }

    #[test]
    fn rng_stream_open_interval_and_repeatable() {
        let mut a = RngStream::for_node(1, 2);
        let mut b = RngStream::for_node(1, 2);
        for _ in 0..10_000 {
            let x = a.open01();
            assert!(x > 0.0 && x < 1.0);
            assert_eq!(x.to_bits(), b.open01().to_bits());
        }
    }

    #[test]
    fn last_node_has_no_edges() {
        let ws = synth_constant(4, 2.0).unwrap();
        let mut edges = Vec::new();
        assert_eq!(create_edges(&ws, ws.sum(), [3], 5, &mut edges), 0);
        assert!(edges.is_empty());
    }

    #[test]
    fn single_node_graph_is_empty() {
        let ws = synth_constant(1, 0.5).unwrap();
        assert_eq!(serial_cl(&ws, 1, &mut CountingSink::default()), 0);
    }

    #[test]
    fn zero_weight_tail_never_touched() {
        let ws = seq(&[5.0, 4.0, 3.0, 3.0, 2.0, 0.0, 0.0, 0.0]);
        for seed in 0..2000 {
            let mut edges = Vec::new();
            serial_cl(&ws, seed, &mut edges);
            assert!(edges.iter().all(|e| e.u < 5 && e.v < 5));
        }
    }

    #[test]
    fn edges_are_canonical_and_unique() {
        let ws = seq(&[9.0, 7.0, 7.0, 5.0, 4.0, 3.0, 3.0, 2.0, 2.0, 1.0, 1.0, 1.0]);
        for seed in 0..500 {
            let mut edges = Vec::new();
            let count = serial_cl(&ws, seed, &mut edges);
            assert_eq!(count as usize, edges.len());
            let set: HashSet<Edge> = edges.iter().copied().collect();
            assert_eq!(set.len(), edges.len());
            assert!(edges.iter().all(|e| e.u < e.v && (e.v as usize) < ws.len()));
        }
    }

    #[test]
    fn serial_is_deterministic() {
        let ws = synth_constant(4, 2.0).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        serial_cl(&ws, 77, &mut a);
        serial_cl(&ws, 77, &mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn clamped_pairs_always_present() {
        // w_0 w_1 / S = 100/21 > 1
        let ws = seq(&[10.0, 10.0, 1.0]);
        for seed in 0..200 {
            let mut edges = Vec::new();
            serial_cl(&ws, seed, &mut edges);
            assert!(edges.contains(&Edge { u: 0, v: 1 }));
            let mut naive = Vec::new();
            naive_pair_sampler(&ws, seed, &mut naive).unwrap();
            assert!(naive.contains(&Edge { u: 0, v: 1 }));
        }
    }

    #[test]
    fn oracle_cap_enforced() {
        let ws = synth_constant(10, 1.0).unwrap();
        assert!(matches!(
            naive_pair_sampler_capped(&ws, 0, &mut CountingSink::default(), 5),
            Err(Error::OracleCap { n: 10, cap: 5 })
        ));
    }

    #[test]
    fn candidate_probability_non_increasing_within_source() {
        let ws = crate::degree_model::synth_powerlaw(3000, 2.2, 1.0, 50.0, 3).unwrap();
        for u in (0..3000u64).step_by(37) {
            let qs: Vec<f64> = SourceWalk::new(ws.weights(), ws.sum(), u, 11)
                .map(|c| c.q)
                .collect();
            assert!(qs.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn relabel_round_trip() {
        let ws = seq(&[1.0, 4.0, 3.0, 2.0]);
        let labels = ws.orig_labels();
        let mut inverse = vec![0u64; labels.len()];
        for (pos, &l) in labels.iter().enumerate() {
            inverse[l as usize] = pos as u64;
        }
        for a in 0..4u64 {
            for b in a + 1..4 {
                let e = Edge::new(a, b);
                assert_eq!(e.relabel(labels).relabel(&inverse), e);
            }
        }
    }
}
