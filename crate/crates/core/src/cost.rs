//! Expected per-node work and the blocked cumulative cost profile used for
//! uniform-cost partitioning.
//!
//! The cost of a source node is its expected number of emitted edges plus
//! one unit for visiting the node. Cumulative costs are built per rank block
//! left to right, starting from the weight prefix entering the block, and
//! shifted by the exclusive scan of the block totals.

use std::ops::Range;

use crate::degree_model::WeightSequence;
use crate::error::{Error, Result};

/// Node range `[lo, hi)` handled by `rank` when `n` nodes are split over
/// `parts` blocks; the first `n % parts` blocks get one extra node.
pub fn block_range(n: usize, parts: usize, rank: usize) -> Range<usize> {
    assert!(parts > 0 && rank < parts);
    let q = n / parts;
    let r = n % parts;
    let lo = rank * q + rank.min(r);
    let len = q + usize::from(rank < r);
    lo..lo + len
}

/// `c_u = (w_u / S)(S - σ_u - w_u) + 1` with the edge term clamped at zero.
/// `S == 0` yields 1.
#[inline]
pub(crate) fn cost_term(w_u: f64, sigma_u: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    let edges = w_u / s * ((s - sigma_u) - w_u);
    edges.max(0.0) + 1.0
}

/// Expected cost of the task for source node `u`, where `sigma_u` is the
/// sum of the weights before `u`.
pub fn node_cost(w_u: f64, sigma_u: f64, s: f64) -> Result<f64> {
    if s.is_nan() || s <= 0.0 {
        return Err(Error::InvalidParameter(format!("weight sum {s} must be positive")));
    }
    if !(0.0..=s).contains(&sigma_u) {
        return Err(Error::InvalidParameter(format!(
            "prefix {sigma_u} outside [0, {s}]"
        )));
    }
    Ok(cost_term(w_u, sigma_u, s))
}

/// Every `c_u`, with `σ_u` accumulated left to right over the whole sequence.
pub fn node_costs(ws: &WeightSequence) -> Vec<f64> {
    let s = ws.sum();
    let mut sigma = 0.0;
    ws.weights()
        .iter()
        .map(|&w| {
            let c = cost_term(w, sigma, s);
            sigma += w;
            c
        })
        .collect()
}

/// Cumulative costs for one rank's block.
#[derive(Debug, Clone, PartialEq)]
pub struct CostProfile {
    pub rank: usize,
    pub block_lo: usize,
    pub block_hi: usize,
    /// Weight prefix `σ` entering the block.
    pub sigma_start: f64,
    /// `C_u` for `u` in the block; block-local until finalized.
    pub cum_costs: Vec<f64>,
    /// Total block cost `z_i`, before any offset.
    pub block_cost: f64,
    /// Cost of every node before the block, `Z_i`; zero until finalized.
    pub global_offset: f64,
}

impl CostProfile {
    pub fn block(&self) -> Range<usize> {
        self.block_lo..self.block_hi
    }

    pub fn is_empty(&self) -> bool {
        self.cum_costs.is_empty()
    }

    /// `C_u` for global node `u` inside the block.
    pub fn cum(&self, u: usize) -> f64 {
        self.cum_costs[u - self.block_lo]
    }

    /// Cumulative cost of every node before `u`, for `u` in `[lo, hi]`.
    pub fn cum_before(&self, u: usize) -> f64 {
        if u == self.block_lo {
            self.global_offset
        } else {
            self.cum(u - 1)
        }
    }
}

/// Block-local cumulative costs for `rank` of `parts`, given the weight
/// prefix `sigma_start` of all nodes before the block.
pub fn block_cumulative(
    ws: &WeightSequence,
    rank: usize,
    parts: usize,
    sigma_start: f64,
) -> Result<CostProfile> {
    if parts == 0 || rank >= parts {
        return Err(Error::InvalidParameter(format!(
            "rank {rank} outside 0..{parts}"
        )));
    }
    let block = block_range(ws.len(), parts, rank);
    let w = ws.weights();
    let s = ws.sum();
    let mut cum_costs = Vec::with_capacity(block.len());
    let mut sigma = sigma_start;
    let mut acc = 0.0;
    for u in block.clone() {
        if u > block.start {
            sigma += w[u - 1];
        }
        acc += cost_term(w[u], sigma, s);
        cum_costs.push(acc);
    }
    Ok(CostProfile {
        rank,
        block_lo: block.start,
        block_hi: block.end,
        sigma_start,
        block_cost: cum_costs.last().copied().unwrap_or(0.0),
        cum_costs,
        global_offset: 0.0,
    })
}

/// Shifts a block-local profile by `offset`, the summed cost of all earlier blocks.
pub fn finalize_offsets(mut profile: CostProfile, offset: f64) -> CostProfile {
    for c in &mut profile.cum_costs {
        *c += offset;
    }
    profile.global_offset = offset;
    profile
}

/// Total and per-partition average cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalCost {
    pub total: f64,
    pub mean: f64,
}

impl GlobalCost {
    pub fn new(total: f64, parts: usize) -> Self {
        Self {
            total,
            mean: total / parts as f64,
        }
    }
}

#[inline]
pub(crate) fn partition_index(cum: f64, mean: f64, parts: usize) -> usize {
    let q = (cum / mean).floor();
    if q <= 0.0 {
        0
    } else if q >= (parts - 1) as f64 {
        parts - 1
    } else {
        q as usize
    }
}

/// Partition owning a node with cumulative cost `cum`: `floor(cum / mean)`
/// clamped to `[0, parts - 1]`.
pub fn partition_of(cum: f64, mean: f64, parts: usize) -> Result<usize> {
    if mean.is_nan() || mean <= 0.0 {
        return Err(Error::InvalidParameter(format!("mean cost {mean} must be positive")));
    }
    if parts == 0 {
        return Err(Error::InvalidParameter("need at least one partition".into()));
    }
    Ok(partition_index(cum, mean, parts))
}
