use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngState, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.70,
            val_fraction: 0.15,
            test_fraction: 0.15,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train_fraction, self.val_fraction, self.test_fraction];
        if f.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::Config(format!("split fractions must be positive, got {f:?}")));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1, got {f:?}")));
        }
        Ok(())
    }

    /// Partition sizes for `n` items; every partition gets at least one.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        self.validate()?;
        if n < 3 {
            return Err(Error::Validation(format!("cannot split {n} notes three ways")));
        }
        let mut val = ((n as f64 * self.val_fraction).round() as usize).max(1);
        let mut test = ((n as f64 * self.test_fraction).round() as usize).max(1);
        while val + test > n - 1 {
            if val >= test {
                val -= 1;
            } else {
                test -= 1;
            }
        }
        Ok((n - val - test, val, test))
    }
}

/// Index partitions after a seeded shuffle of `0..n`.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let (tr, va, _) = spec.sizes(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    RngState::named(spec.seed, Stream::Shuffle).fork(0).shuffle(&mut order);
    let test = order.split_off(tr + va);
    let val = order.split_off(tr);
    Ok((order, val, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

pub fn split_dataset<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<Split<T>> {
    let (tr, va, te) = split_indices(items.len(), spec)?;
    let pick = |ix: Vec<usize>| ix.into_iter().map(|i| items[i].clone()).collect();
    Ok(Split {
        train: pick(tr),
        val: pick(va),
        test: pick(te),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_splits_seventy_fifteen_fifteen() {
        let items: Vec<usize> = (0..100).collect();
        let s = split_dataset(&items, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (70, 15, 15));
        assert_eq!(s, split_dataset(&items, &SplitSpec::default()).unwrap());
    }

    #[test]
    fn tiny_corpora_keep_every_partition() {
        for n in 3..12 {
            let (a, b, c) = SplitSpec::default().sizes(n).unwrap();
            assert!(a >= 1 && b >= 1 && c >= 1 && a + b + c == n, "{n}");
        }
        assert!(SplitSpec::default().sizes(2).is_err());
    }

    #[test]
    fn degenerate_fractions_rejected() {
        let bad = SplitSpec {
            train_fraction: 0.8,
            val_fraction: 0.2,
            test_fraction: 0.0,
            seed: 0,
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let off = SplitSpec {
            train_fraction: 0.7,
            ..Default::default()
        };
        assert!(SplitSpec { train_fraction: 0.6, ..off }.validate().is_err());
    }
}
