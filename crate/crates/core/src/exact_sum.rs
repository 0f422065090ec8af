//! Order-independent floating point summation.
//!
//! Keeps the running total as a list of non-overlapping partials so the sum
//! is held exactly; [`ExactSum::value`] rounds it once. Two accumulators fed
//! the same multiset of values in any order, or merged in any grouping,
//! produce bit-identical results.

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a finite value.
    pub fn add(&mut self, mut x: f64) {
        debug_assert!(x.is_finite());
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// The exact sum rounded to nearest, ties to even.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(&top) = p.last() else {
            return 0.0;
        };
        let mut n = p.len() - 1;
        let mut hi = top;
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // Half-way case: the remaining partials decide the rounding direction.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = ExactSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Correctly rounded sum of `values`.
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<ExactSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cancellation_is_exact() {
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        assert_eq!(exact_sum(std::iter::empty()), 0.0);
    }

    #[test]
    fn half_way_rounds_to_even() {
        // 1 + 2^-53 is a tie between 1 and 1 + 2^-52; the extra tiny term breaks it upward.
        let ulp = f64::EPSILON;
        assert_eq!(exact_sum([1.0, ulp / 2.0]), 1.0);
        assert_eq!(exact_sum([1.0, ulp / 2.0, ulp * 1e-10]), 1.0 + ulp);
    }

    proptest! {
        #[test]
        fn order_and_grouping_do_not_matter(
            mut xs in prop::collection::vec(0.0f64..1e6, 0..200),
            split in 0usize..200,
        ) {
            let forward = exact_sum(xs.iter().copied());
            let split = split.min(xs.len());
            let mut left: ExactSum = xs[..split].iter().copied().collect();
            let right: ExactSum = xs[split..].iter().copied().collect();
            left.merge(&right);
            prop_assert_eq!(forward.to_bits(), left.value().to_bits());
            xs.reverse();
            prop_assert_eq!(forward.to_bits(), exact_sum(xs.iter().copied()).to_bits());
        }
    }
}
