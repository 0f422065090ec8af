//! Partition plans: equal node counts, round robin, and uniform expected
//! cost (parallel boundary search over blocked cumulative costs).

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use crate::comm::{BoundaryMsg, Communicator};
use crate::cost::{
    block_cumulative, block_range, cost_term, finalize_offsets, node_costs, partition_index,
    CostProfile, GlobalCost,
};
use crate::degree_model::WeightSequence;
use crate::error::{CommError, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Consecutive partitions with equal node counts.
    Naive,
    /// Consecutive partitions with equal expected cost.
    Ucp,
    /// Node `u` goes to partition `u mod P`.
    Rrp,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Naive, Scheme::Ucp, Scheme::Rrp];

    pub fn is_consecutive(self) -> bool {
        !matches!(self, Scheme::Rrp)
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Scheme::Naive),
            "ucp" => Ok(Scheme::Ucp),
            "rrp" => Ok(Scheme::Rrp),
            other => Err(format!("unknown scheme {other:?} (naive, ucp, rrp)")),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Naive => "naive",
            Scheme::Ucp => "ucp",
            Scheme::Rrp => "rrp",
        })
    }
}

/// Assignment of the `n` nodes to `parts` partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    pub scheme: Scheme,
    pub parts: usize,
    pub n: usize,
    /// `n_0 = 0, n_1, ..., n_P = n` for consecutive schemes; empty for round robin.
    pub boundaries: Vec<u64>,
    /// Expected cost `c(V_i)` of each partition.
    pub per_partition_cost: Vec<f64>,
}

impl PartitionPlan {
    /// Modulus of the round-robin rule, if this plan uses it.
    pub fn rrp_modulus(&self) -> Option<usize> {
        (self.scheme == Scheme::Rrp).then_some(self.parts)
    }

    /// Interval `[n_i, n_{i+1})` of a consecutive plan.
    pub fn interval(&self, i: usize) -> Option<Range<u64>> {
        self.scheme
            .is_consecutive()
            .then(|| self.boundaries[i]..self.boundaries[i + 1])
    }

    /// Nodes of partition `i` in ascending order.
    pub fn nodes(&self, i: usize) -> std::iter::StepBy<Range<u64>> {
        assert!(i < self.parts);
        match self.interval(i) {
            Some(range) => range.step_by(1),
            None => (i as u64..self.n as u64).step_by(self.parts),
        }
    }

    pub fn partition_len(&self, i: usize) -> usize {
        match self.interval(i) {
            Some(r) => (r.end - r.start) as usize,
            None => self.n / self.parts + usize::from(i < self.n % self.parts),
        }
    }

    /// Partition containing node `u`.
    pub fn owner(&self, u: u64) -> usize {
        match self.scheme {
            Scheme::Rrp => (u % self.parts as u64) as usize,
            // last i with n_i <= u
            _ => self.boundaries[1..].partition_point(|&b| b <= u),
        }
    }

    /// Expected edges generated by partition `i`: `c(V_i) - |V_i|`.
    pub fn expected_edges(&self, i: usize) -> f64 {
        self.per_partition_cost[i] - self.partition_len(i) as f64
    }

    pub fn total_cost(&self) -> f64 {
        self.per_partition_cost.iter().sum()
    }
}

/// Partition boundaries found inside one rank's block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundarySet {
    pub owner_rank: usize,
    /// `(k, n_k)` pairs sorted by `k`.
    pub entries: Vec<(usize, u64)>,
}

impl BoundarySet {
    /// Lower boundaries of partitions that start inside `block`, counting
    /// `n_0 = 0` for the block that holds node 0.
    pub fn lower_boundaries_in(&self, block: &Range<usize>) -> usize {
        let inside = self
            .entries
            .iter()
            .filter(|(_, node)| (*node as usize) < block.end)
            .count();
        inside + usize::from(block.start == 0 && !block.is_empty())
    }

    /// Boundaries `n_k`, `k >= 1`, located at a node of `block`.
    pub fn interior_in(&self, block: &Range<usize>) -> usize {
        self.entries
            .iter()
            .filter(|(_, node)| block.contains(&(*node as usize)))
            .count()
    }
}

/// Boundaries of the equal-count split, first `n mod P` partitions one larger.
pub fn naive_boundaries(n: usize, parts: usize) -> Vec<u64> {
    let mut b: Vec<u64> = (0..parts)
        .map(|i| block_range(n, parts, i).start as u64)
        .collect();
    b.push(n as u64);
    b
}

fn check_parts(parts: usize) -> Result<()> {
    if parts == 0 {
        return Err(Error::InvalidParameter("need at least one partition".into()));
    }
    Ok(())
}

fn interval_costs(costs: &[f64], boundaries: &[u64]) -> Vec<f64> {
    boundaries
        .windows(2)
        .map(|b| costs[b[0] as usize..b[1] as usize].iter().sum())
        .collect()
}

/// Consecutive plan from explicit boundaries, with costs summed per interval.
pub fn plan_from_boundaries(
    ws: &WeightSequence,
    scheme: Scheme,
    boundaries: Vec<u64>,
) -> Result<PartitionPlan> {
    let n = ws.len();
    if boundaries.len() < 2
        || boundaries[0] != 0
        || *boundaries.last().unwrap() != n as u64
        || boundaries.windows(2).any(|b| b[0] > b[1])
    {
        return Err(Error::InvalidParameter(format!(
            "boundaries must rise from 0 to {n}"
        )));
    }
    let costs = node_costs(ws);
    Ok(PartitionPlan {
        scheme,
        parts: boundaries.len() - 1,
        n,
        per_partition_cost: interval_costs(&costs, &boundaries),
        boundaries,
    })
}

pub fn plan_naive(ws: &WeightSequence, parts: usize) -> Result<PartitionPlan> {
    check_parts(parts)?;
    plan_from_boundaries(ws, Scheme::Naive, naive_boundaries(ws.len(), parts))
}

pub fn plan_rrp(ws: &WeightSequence, parts: usize) -> Result<PartitionPlan> {
    check_parts(parts)?;
    let mut per_partition_cost = vec![0.0; parts];
    for (u, c) in node_costs(ws).into_iter().enumerate() {
        per_partition_cost[u % parts] += c;
    }
    Ok(PartitionPlan {
        scheme: Scheme::Rrp,
        parts,
        n: ws.len(),
        boundaries: Vec::new(),
        per_partition_cost,
    })
}

/// Boundaries between positions `s` and `e` (inclusive) of a cumulative
/// cost slice.
///
/// Returns every `(k, j)` with `s < j <= e` where the partition index of
/// `cum[j]` exceeds that of `cum[j - 1]`; all skipped indices `k` map to the
/// same `j`. Ranges whose ends fall in one partition return immediately.
pub fn find_boundaries(cum: &[f64], s: usize, e: usize, mean: f64, parts: usize) -> Vec<(usize, usize)> {
    let mut found = Vec::new();
    if s <= e && e < cum.len() {
        search(cum, s, e, mean, parts, &mut found);
    }
    found.sort_unstable();
    found
}

fn search(cum: &[f64], s: usize, e: usize, mean: f64, parts: usize, found: &mut Vec<(usize, usize)>) {
    let lo = partition_index(cum[s], mean, parts);
    if lo == partition_index(cum[e], mean, parts) {
        return;
    }
    let m = (s + e) / 2;
    let left = partition_index(cum[m], mean, parts);
    let right = partition_index(cum[m + 1], mean, parts);
    for k in left + 1..=right {
        found.push((k, m + 1));
    }
    search(cum, s, m, mean, parts, found);
    search(cum, m + 1, e, mean, parts, found);
}

/// Boundaries owned by a rank whose profile has been finalized: those inside
/// its block, at its first node, and (for the block ending at `n`) the empty
/// trailing partitions.
fn rank_boundaries(profile: &CostProfile, mean: f64, parts: usize, n: usize) -> BoundarySet {
    let mut entries = Vec::new();
    if !profile.is_empty() {
        let lo = profile.block_lo;
        let before = partition_index(profile.global_offset, mean, parts);
        let first = partition_index(profile.cum_costs[0], mean, parts);
        entries.extend((before + 1..=first).map(|k| (k, lo as u64)));
        let last = profile.cum_costs.len() - 1;
        entries.extend(
            find_boundaries(&profile.cum_costs, 0, last, mean, parts)
                .into_iter()
                .map(|(k, j)| (k, (lo + j) as u64)),
        );
        if profile.block_hi == n {
            let tail = partition_index(profile.cum_costs[last], mean, parts);
            entries.extend((tail + 1..parts).map(|k| (k, n as u64)));
        }
    }
    entries.sort_unstable();
    BoundarySet {
        owner_rank: profile.rank,
        entries,
    }
}

/// One rank's view after the parallel uniform-cost plan.
#[derive(Debug, Clone)]
pub struct UcpRank {
    pub plan: PartitionPlan,
    pub found: BoundarySet,
    pub block: Range<usize>,
    pub global: GlobalCost,
    /// Boundary messages this rank sent.
    pub sent: usize,
}

#[derive(Clone, Copy)]
struct RankSummary {
    lower: u64,
    cost: f64,
}

/// Uniform-cost plan computed cooperatively by all ranks of `comm`.
///
/// Each rank sums its block's weights, scans them into the weight prefix,
/// builds and finalizes its cumulative costs, locates the boundaries in its
/// block and sends each `n_k` to the two ranks whose partitions it bounds.
/// The ranks then share their intervals so every rank returns the full plan.
pub fn plan_ucp_rank<C: Communicator>(ws: &WeightSequence, comm: &C) -> Result<UcpRank> {
    let parts = comm.size();
    let rank = comm.rank();
    let n = ws.len();
    let block = block_range(n, parts, rank);

    let local_weight = ws.weights()[block.clone()].iter().fold(0.0, |a, w| a + w);
    let sigma_start = comm.exclusive_scan_sum(local_weight)?;
    let profile = block_cumulative(ws, rank, parts, sigma_start)?;
    let block_cost = profile.block_cost;
    let offset = comm.exclusive_scan_sum(block_cost)?;
    let profile = finalize_offsets(profile, offset);
    let global = GlobalCost::new(comm.all_reduce_sum(block_cost)?, parts);

    let found = rank_boundaries(&profile, global.mean, parts, n);
    let mut sent = 0;
    for &(k, node) in &found.entries {
        let cost_before = if node as usize == n {
            *profile.cum_costs.last().expect("tail owner has nodes")
        } else {
            profile.cum_before(node as usize)
        };
        let msg = BoundaryMsg {
            k,
            node,
            cost_before,
            from: rank,
        };
        comm.send_boundary(k - 1, msg)?;
        comm.send_boundary(k, msg)?;
        sent += 2;
    }

    let expected = usize::from(rank > 0) + usize::from(rank + 1 < parts);
    let msgs = comm.recv_boundaries(expected)?;
    let pick = |k: usize| {
        msgs.iter()
            .find(|m| m.k == k)
            .copied()
            .ok_or(CommError::Timeout {
                rank,
                op: "recv_boundaries",
            })
    };
    let (lower, lower_cost) = if rank == 0 {
        (0, 0.0)
    } else {
        let m = pick(rank)?;
        (m.node, m.cost_before)
    };
    let upper_cost = if rank + 1 == parts {
        global.total
    } else {
        pick(rank + 1)?.cost_before
    };

    let summary = RankSummary {
        lower,
        cost: upper_cost - lower_cost,
    };
    let all = comm.all_gather("ucp_plan", summary)?;
    let mut boundaries: Vec<u64> = all.iter().map(|s| s.lower).collect();
    boundaries.push(n as u64);
    let plan = PartitionPlan {
        scheme: Scheme::Ucp,
        parts,
        n,
        boundaries,
        per_partition_cost: all.iter().map(|s| s.cost).collect(),
    };
    Ok(UcpRank {
        plan,
        found,
        block,
        global,
        sent,
    })
}

pub fn plan_ucp<C: Communicator>(ws: &WeightSequence, comm: &C) -> Result<PartitionPlan> {
    plan_ucp_rank(ws, comm).map(|r| r.plan)
}

/// Sequential uniform-cost plan: replays the blocked arithmetic of
/// [`plan_ucp`] for `parts` blocks, then assigns boundaries in one scan.
pub fn plan_ucp_oracle(ws: &WeightSequence, parts: usize) -> Result<PartitionPlan> {
    check_parts(parts)?;
    let n = ws.len();
    let w = ws.weights();
    let s = ws.sum();

    let mut cum = Vec::with_capacity(n);
    let mut weight_prefix = 0.0;
    let mut cost_prefix = 0.0;
    for rank in 0..parts {
        let block = block_range(n, parts, rank);
        let mut sigma = weight_prefix;
        let mut local = 0.0;
        let start = cum.len();
        for u in block.clone() {
            if u > block.start {
                sigma += w[u - 1];
            }
            local += cost_term(w[u], sigma, s);
            cum.push(local);
        }
        for c in &mut cum[start..] {
            *c += cost_prefix;
        }
        weight_prefix += w[block].iter().fold(0.0, |a, x| a + x);
        cost_prefix += local;
    }
    let mean = cost_prefix / parts as f64;

    let mut boundaries = vec![0u64; parts + 1];
    let mut next = 1;
    for (u, &c) in cum.iter().enumerate() {
        let part = partition_index(c, mean, parts);
        while next <= part {
            boundaries[next] = u as u64;
            next += 1;
        }
    }
    for b in &mut boundaries[next..] {
        *b = n as u64;
    }

    let before = |b: u64| match b as usize {
        0 => 0.0,
        b if b == n => cost_prefix,
        b => cum[b - 1],
    };
    let per_partition_cost = boundaries
        .windows(2)
        .map(|pair| before(pair[1]) - before(pair[0]))
        .collect();
    Ok(PartitionPlan {
        scheme: Scheme::Ucp,
        parts,
        n,
        boundaries,
        per_partition_cost,
    })
}

/// Writes `scheme P n`, then either the `P + 1` boundaries or an `rrp P` marker.
pub fn write_plan<W: Write>(plan: &PartitionPlan, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{} {} {}", plan.scheme, plan.parts, plan.n)?;
    if plan.scheme.is_consecutive() {
        for b in &plan.boundaries {
            writeln!(out, "{b}")?;
        }
    } else {
        writeln!(out, "rrp {}", plan.parts)?;
    }
    out.flush()
}

pub fn save_plan(plan: &PartitionPlan, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_plan(plan, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Reads a plan written by [`write_plan`] and recomputes its costs for `ws`.
pub fn read_plan<R: BufRead>(reader: R, ws: &WeightSequence) -> Result<PartitionPlan> {
    let bad = |msg: String| Error::PlanFormat(msg);
    let mut lines = reader
        .lines()
        .map(|l| l.map_err(|e| bad(e.to_string())))
        .filter(|l| !matches!(l, Ok(t) if t.trim().is_empty()));
    let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [scheme, parts, n] = fields[..] else {
        return Err(bad(format!("header {header:?} is not `scheme P n`")));
    };
    let scheme: Scheme = scheme.parse().map_err(bad)?;
    let parts: usize = parts.parse().map_err(|_| bad(format!("bad P {parts:?}")))?;
    let n: usize = n.parse().map_err(|_| bad(format!("bad n {n:?}")))?;
    if parts == 0 {
        return Err(bad("P must be positive".into()));
    }
    if n != ws.len() {
        return Err(bad(format!("plan is for {n} nodes, weights have {}", ws.len())));
    }
    match scheme {
        Scheme::Rrp => {
            let marker = lines.next().ok_or_else(|| bad("missing rrp marker".into()))??;
            if marker.split_whitespace().collect::<Vec<_>>() != ["rrp", &parts.to_string()] {
                return Err(bad(format!("expected `rrp {parts}`, got {marker:?}")));
            }
            plan_rrp(ws, parts)
        }
        _ => {
            let boundaries = lines
                .map(|l| {
                    let l = l?;
                    l.trim()
                        .parse::<u64>()
                        .map_err(|_| bad(format!("bad boundary {l:?}")))
                })
                .collect::<Result<Vec<u64>>>()?;
            if boundaries.len() != parts + 1 {
                return Err(bad(format!(
                    "expected {} boundaries, found {}",
                    parts + 1,
                    boundaries.len()
                )));
            }
            plan_from_boundaries(ws, scheme, boundaries)
                .map_err(|e| bad(e.to_string()))
        }
    }
}

pub fn load_plan(path: impl AsRef<Path>, ws: &WeightSequence) -> Result<PartitionPlan> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_plan(std::io::BufReader::new(file), ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::run_inproc;
    use crate::degree_model::{synth_constant, synth_powerlaw, SortPolicy};
    use std::time::Duration;

    fn toy() -> WeightSequence {
        WeightSequence::new(vec![4.0, 3.0, 2.0, 1.0], SortPolicy::RequireSorted).unwrap()
    }

    fn parallel(ws: &WeightSequence, parts: usize) -> Vec<UcpRank> {
        run_inproc(parts, Duration::from_secs(30), |c| {
            plan_ucp_rank(ws, c).map_err(|e| match e {
                Error::Comm(c) => c,
                other => panic!("{other}"),
            })
        })
        .unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn naive_plans() {
        assert_eq!(naive_boundaries(4, 2), vec![0, 2, 4]);
        assert_eq!(naive_boundaries(5, 2), vec![0, 3, 5]);
        assert_eq!(naive_boundaries(2, 4), vec![0, 1, 2, 2, 2]);
        let plan = plan_naive(&synth_constant(4, 2.0).unwrap(), 2).unwrap();
        assert_eq!(plan.per_partition_cost, vec![4.5, 2.5]);
        assert!(plan_naive(&toy(), 0).is_err());
    }

    #[test]
    fn rrp_plans() {
        let ws = synth_constant(5, 1.0).unwrap();
        let plan = plan_rrp(&ws, 2).unwrap();
        assert_eq!(plan.nodes(0).collect::<Vec<_>>(), vec![0, 2, 4]);
        assert_eq!(plan.nodes(1).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(plan.partition_len(0), 3);
        assert_eq!(plan.partition_len(1), 2);
        assert_eq!(plan.rrp_modulus(), Some(2));
        assert_eq!(plan.owner(3), 1);

        let plan = plan_rrp(&toy(), 2).unwrap();
        assert!(close(plan.per_partition_cost[0], 4.6));
        assert!(close(plan.per_partition_cost[1], 2.9));
        assert!(plan.per_partition_cost[0] - plan.per_partition_cost[1] <= 4.0);
    }

    #[test]
    fn find_boundaries_examples() {
        let cum = [3.4, 5.3, 6.5, 7.5];
        assert_eq!(find_boundaries(&cum, 0, 3, 3.75, 2), vec![(1, 1)]);
        let flat: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!(find_boundaries(&flat, 10, 20, 1000.0, 4).is_empty());
        // one node jumps across two multiples of the mean
        let jump = [1.0, 2.0, 9.0, 10.0];
        assert_eq!(find_boundaries(&jump, 0, 3, 2.5, 4), vec![(1, 2), (2, 2), (3, 2)]);
    }

    #[test]
    fn find_boundaries_agrees_with_linear_scan() {
        let ws = synth_powerlaw(3000, 2.1, 1.0, 300.0, 4).unwrap();
        let mut cum = Vec::new();
        let mut acc = 0.0;
        for c in node_costs(&ws) {
            acc += c;
            cum.push(acc);
        }
        for parts in [2, 3, 7, 16, 64, 300] {
            let mean = acc / parts as f64;
            for (s, e) in [(0, 2999), (100, 1700), (5, 6), (2000, 2000)] {
                let mut scan = Vec::new();
                for j in s + 1..=e {
                    let a = partition_index(cum[j - 1], mean, parts);
                    let b = partition_index(cum[j], mean, parts);
                    scan.extend((a + 1..=b).map(|k| (k, j)));
                }
                assert_eq!(find_boundaries(&cum, s, e, mean, parts), scan);
            }
        }
    }

    #[test]
    fn ucp_toy_example() {
        let oracle = plan_ucp_oracle(&toy(), 2).unwrap();
        assert_eq!(oracle.boundaries, vec![0, 1, 4]);
        assert!(close(oracle.per_partition_cost[0], 3.4));
        assert!(close(oracle.per_partition_cost[1], 4.1));
        for r in parallel(&toy(), 2) {
            assert_eq!(r.plan, oracle);
        }
    }

    #[test]
    fn ucp_single_rank() {
        let ws = synth_powerlaw(100, 2.5, 1.0, 9.0, 0).unwrap();
        let r = parallel(&ws, 1).remove(0);
        assert_eq!(r.plan.boundaries, vec![0, 100]);
        assert_eq!(r.sent, 0);
        assert_eq!(plan_ucp_oracle(&ws, 1).unwrap().boundaries, vec![0, 100]);
    }

    #[test]
    fn ucp_matches_oracle_with_messages_counted() {
        for (seed, parts) in [(1, 2), (2, 3), (3, 8), (4, 16), (5, 64)] {
            let ws = synth_powerlaw(5000, 2.2, 1.0, 200.0, seed).unwrap();
            let oracle = plan_ucp_oracle(&ws, parts).unwrap();
            let ranks = parallel(&ws, parts);
            let sent: usize = ranks.iter().map(|r| r.sent).sum();
            assert_eq!(sent, 2 * (parts - 1));
            for r in &ranks {
                assert_eq!(r.plan.boundaries, oracle.boundaries);
                assert_eq!(r.plan.per_partition_cost, oracle.per_partition_cost);
            }
        }
    }

    #[test]
    fn ucp_constant_weights_balanced() {
        let ws = synth_constant(10_000, 40.0).unwrap();
        let plan = plan_ucp_oracle(&ws, 8).unwrap();
        let mean = plan.total_cost() / 8.0;
        for c in &plan.per_partition_cost {
            assert!(*c <= mean + 41.0);
        }
        let sizes: Vec<usize> = (0..8).map(|i| plan.partition_len(i)).collect();
        assert!(sizes.windows(2).all(|s| s[0] <= s[1]), "{sizes:?}");
    }

    #[test]
    fn dominant_weight_gives_empty_partitions() {
        let mut w = vec![400.0];
        w.extend(std::iter::repeat_n(1.0, 999));
        let ws = WeightSequence::new(w, SortPolicy::RequireSorted).unwrap();
        let oracle = plan_ucp_oracle(&ws, 8).unwrap();
        let empty = (0..8).filter(|&i| oracle.partition_len(i) == 0).count();
        assert!(empty > 0, "{:?}", oracle.boundaries);
        for r in parallel(&ws, 8) {
            assert_eq!(r.plan.boundaries, oracle.boundaries);
        }
    }

    #[test]
    fn more_ranks_than_nodes() {
        let ws = synth_constant(3, 1.0).unwrap();
        let oracle = plan_ucp_oracle(&ws, 8).unwrap();
        assert_eq!(oracle.boundaries.len(), 9);
        assert_eq!(*oracle.boundaries.last().unwrap(), 3);
        for r in parallel(&ws, 8) {
            assert_eq!(r.plan.boundaries, oracle.boundaries);
        }
        let cover: usize = (0..8).map(|i| oracle.partition_len(i)).sum();
        assert_eq!(cover, 3);
    }

    #[test]
    fn owner_matches_nodes() {
        let ws = synth_powerlaw(500, 2.4, 1.0, 30.0, 8).unwrap();
        for plan in [
            plan_naive(&ws, 7).unwrap(),
            plan_rrp(&ws, 7).unwrap(),
            plan_ucp_oracle(&ws, 7).unwrap(),
        ] {
            let mut seen = vec![0u32; 500];
            for i in 0..7 {
                for u in plan.nodes(i) {
                    assert_eq!(plan.owner(u), i);
                    seen[u as usize] += 1;
                }
            }
            assert!(seen.iter().all(|&s| s == 1));
        }
    }

    #[test]
    fn plan_file_round_trip() {
        let ws = synth_powerlaw(300, 2.4, 1.0, 20.0, 2).unwrap();
        for plan in [plan_ucp_oracle(&ws, 5).unwrap(), plan_rrp(&ws, 4).unwrap()] {
            let mut buf = Vec::new();
            write_plan(&plan, &mut buf).unwrap();
            let back = read_plan(buf.as_slice(), &ws).unwrap();
            assert_eq!(back.boundaries, plan.boundaries);
            assert_eq!(back.scheme, plan.scheme);
            assert_eq!(back.parts, plan.parts);
        }
        let mut buf = Vec::new();
        write_plan(&plan_rrp(&ws, 4).unwrap(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "rrp 4 300\nrrp 4\n");
    }

    #[test]
    fn plan_file_errors() {
        let ws = synth_constant(4, 1.0).unwrap();
        for text in [
            "",
            "ucp 2\n",
            "ucp 2 5\n0\n2\n5\n",
            "ucp 2 4\n0\n4\n",
            "ucp 2 4\n0\n3\n2\n",
            "ucp 2 4\n1\n2\n4\n",
            "rrp 2 4\nrrp 3\n",
            "zzz 2 4\n",
        ] {
            assert!(read_plan(text.as_bytes(), &ws).is_err(), "{text:?}");
        }
    }
}
