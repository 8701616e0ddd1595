use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Smallest dataset for which every bucket of the 80/5/15 split is non-empty.
pub const MIN_SPLIT_SIZE: usize = 20;

/// Disjoint train/val/test partition of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Random 80/5/15 split: `floor(0.80 n)` train, `floor(0.05 n)` validation,
/// the remainder test. Each bucket is sorted ascending.
pub fn split_dataset(num_frames: usize, seed: u64) -> Result<DatasetSplit> {
    if num_frames < MIN_SPLIT_SIZE {
        return Err(Error::Validation(format!(
            "cannot split {num_frames} frames: at least {MIN_SPLIT_SIZE} required"
        )));
    }
    let n_train = num_frames * 80 / 100;
    let n_val = num_frames * 5 / 100;
    let mut order: Vec<usize> = (0..num_frames).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(DatasetSplit { train, val, test, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes_follow_floor_rule() {
        assert_eq!(split_dataset(1000, 3).unwrap().sizes(), (800, 50, 150));
        assert_eq!(split_dataset(20, 3).unwrap().sizes(), (16, 1, 3));
        assert_eq!(split_dataset(4086, 3).unwrap().sizes(), (3268, 204, 614));
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(split_dataset(19, 0).is_err());
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        assert_eq!(split_dataset(500, 42).unwrap(), split_dataset(500, 42).unwrap());
        for s in 0..10u64 {
            let a = split_dataset(500, s).unwrap();
            let b = split_dataset(500, s + 100).unwrap();
            assert_ne!(a.train, b.train);
        }
    }

    proptest! {
        #[test]
        fn partitions_the_range(n in 20usize..2000, seed in any::<u64>()) {
            let s = split_dataset(n, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
