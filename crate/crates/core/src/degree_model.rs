//! Expected-degree weight sequences: loading, synthesis and validation.

use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::exact_sum::exact_sum;

/// How [`WeightSequence`] construction treats input that is not already
/// sorted non-increasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortPolicy {
    RequireSorted,
    SortDesc,
}

/// Expected degrees sorted non-increasing, with their sum and the permutation
/// back to input order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    weights: Vec<f64>,
    sum: f64,
    orig_labels: Vec<u64>,
}

impl WeightSequence {
    /// Builds a sequence from weights in input order.
    ///
    /// With [`SortPolicy::SortDesc`] the weights are stably sorted and
    /// `orig_labels[k]` holds the input position of the `k`-th sorted weight.
    pub fn new(weights: Vec<f64>, policy: SortPolicy) -> Result<Self> {
        let lines: Vec<usize> = (1..=weights.len()).collect();
        Self::with_line_numbers(weights, &lines, policy)
    }

    fn with_line_numbers(weights: Vec<f64>, lines: &[usize], policy: SortPolicy) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty);
        }
        for (&w, &line) in weights.iter().zip(lines) {
            if !w.is_finite() {
                return Err(Error::Parse {
                    line,
                    text: w.to_string(),
                });
            }
            if w < 0.0 {
                return Err(Error::NegativeWeight { line, value: w });
            }
        }
        let sorted = weights.windows(2).position(|pair| pair[0] < pair[1]);
        let (weights, orig_labels) = match (sorted, policy) {
            (None, _) => {
                let labels = (0..weights.len() as u64).collect();
                (weights, labels)
            }
            (Some(at), SortPolicy::RequireSorted) => {
                return Err(Error::Unsorted {
                    line: lines[at + 1],
                })
            }
            (Some(_), SortPolicy::SortDesc) => {
                let mut order: Vec<usize> = (0..weights.len()).collect();
                order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
                let sorted = order.iter().map(|&i| weights[i]).collect();
                (sorted, order.into_iter().map(|i| i as u64).collect())
            }
        };
        let sum = exact_sum(weights.iter().copied());
        Ok(Self {
            weights,
            sum,
            orig_labels,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, u: usize) -> f64 {
        self.weights[u]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Correctly rounded sum of all weights.
    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn orig_labels(&self) -> &[u64] {
        &self.orig_labels
    }

    /// Input label of the node at sorted position `u`.
    pub fn orig_label(&self, u: usize) -> u64 {
        self.orig_labels[u]
    }

    pub fn max_weight(&self) -> f64 {
        self.weights[0]
    }

    pub fn sum_of_squares(&self) -> f64 {
        exact_sum(self.weights.iter().map(|w| w * w))
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// Summary of the properties the generator relies on.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub is_sorted: bool,
    /// `max w² < S`; false whenever `S == 0`.
    pub admissible: bool,
    pub n: usize,
    pub sum_s: f64,
    pub max_weight: f64,
    pub zero_weight_count: usize,
}

pub fn validate(ws: &WeightSequence) -> ValidationReport {
    let w = ws.weights();
    let max_weight = w.iter().copied().fold(0.0, f64::max);
    let sum_s = exact_sum(w.iter().copied());
    ValidationReport {
        is_sorted: w.windows(2).all(|p| p[0] >= p[1]),
        admissible: sum_s > 0.0 && max_weight * max_weight < sum_s,
        n: w.len(),
        sum_s,
        max_weight,
        zero_weight_count: w.iter().filter(|&&x| x == 0.0).count(),
    }
}

/// Parses one weight per line; blank lines and lines starting with `#` are skipped.
pub fn parse_weights<R: BufRead>(reader: R, policy: SortPolicy) -> Result<WeightSequence> {
    let mut weights = Vec::new();
    let mut lines = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            text: e.to_string(),
        })?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let value: f64 = text.parse().map_err(|_| Error::Parse {
            line: line_no,
            text: text.to_string(),
        })?;
        weights.push(value);
        lines.push(line_no);
    }
    WeightSequence::with_line_numbers(weights, &lines, policy)
}

pub fn load_weights(path: impl AsRef<Path>, policy: SortPolicy) -> Result<WeightSequence> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_weights(std::io::BufReader::new(file), policy)
}

/// Writes one weight per line in sorted order.
pub fn write_weights<W: std::io::Write>(ws: &WeightSequence, mut out: W) -> std::io::Result<()> {
    for w in ws.weights() {
        writeln!(out, "{w}")?;
    }
    out.flush()
}

/// Draws `n` i.i.d. weights from the power law with density proportional to
/// `x^-gamma` on `[w_min, w_max]` by inverting its CDF, then sorts them.
pub fn synth_powerlaw(
    n: usize,
    gamma: f64,
    w_min: f64,
    w_max: f64,
    seed: u64,
) -> Result<WeightSequence> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(gamma.is_finite() && gamma > 1.0) {
        return Err(Error::InvalidParameter(format!("gamma {gamma} must exceed 1")));
    }
    if !(w_min.is_finite() && w_max.is_finite() && w_min > 0.0 && w_min <= w_max) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < w_min <= w_max, got [{w_min}, {w_max}]"
        )));
    }
    let e = 1.0 - gamma;
    let lo = w_min.powf(e);
    let span = w_max.powf(e) - lo;
    let mut rng = Pcg64::seed_from_u64(seed);
    let weights = (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            (lo + span * u).powf(1.0 / e).clamp(w_min, w_max)
        })
        .collect();
    WeightSequence::new(weights, SortPolicy::SortDesc)
}

/// Mean of the truncated power law sampled by [`synth_powerlaw`].
pub fn powerlaw_mean(gamma: f64, w_min: f64, w_max: f64) -> f64 {
    if w_min == w_max {
        return w_min;
    }
    let moment = |k: f64| {
        let e = k + 1.0 - gamma;
        if e.abs() < 1e-12 {
            (w_max / w_min).ln()
        } else {
            (w_max.powf(e) - w_min.powf(e)) / e
        }
    };
    moment(1.0) / moment(0.0)
}

/// `n` copies of `d`; rejects `d >= n` for positive `d`, which would make
/// the sequence inadmissible.
pub fn synth_constant(n: usize, d: f64) -> Result<WeightSequence> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::InvalidParameter(format!("degree {d} must be >= 0")));
    }
    let sum = d * n as f64;
    if d > 0.0 && d * d >= sum {
        return Err(Error::Inadmissible {
            max_sq: d * d,
            sum,
        });
    }
    WeightSequence::new(vec![d; n], SortPolicy::RequireSorted)
}

/// Expected number of edges, `(S² - Σw²) / (2S)`; zero when `S == 0`.
pub fn expected_total_edges(ws: &WeightSequence) -> f64 {
    let s = ws.sum();
    if s == 0.0 {
        return 0.0;
    }
    (s * s - ws.sum_of_squares()) / (2.0 * s)
}
