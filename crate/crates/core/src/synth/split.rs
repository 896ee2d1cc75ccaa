use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Held-out rows of one dataset. Everything not in `test_indices` trains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n: usize,
    /// Sorted ascending, unique, each `< n`.
    pub test_indices: Vec<usize>,
    pub train_fraction: f64,
}

impl SplitSpec {
    pub fn new(n: usize, mut test_indices: Vec<usize>, train_fraction: f64) -> Result<Self> {
        test_indices.sort_unstable();
        let s = Self {
            n,
            test_indices,
            train_fraction,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&i) = self.test_indices.iter().find(|&&i| i >= self.n) {
            return Err(Error::Invariant(format!("test index {i} >= n = {}", self.n)));
        }
        if self.test_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invariant("test indices not strictly increasing".into()));
        }
        Ok(())
    }

    /// Complement of the test set, ascending.
    pub fn train_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n - self.test_indices.len());
        let mut t = self.test_indices.iter().peekable();
        for i in 0..self.n {
            if t.peek() == Some(&&i) {
                t.next();
            } else {
                out.push(i);
            }
        }
        out
    }

    pub fn n_train(&self) -> usize {
        self.n - self.test_indices.len()
    }

    pub fn n_test(&self) -> usize {
        self.test_indices.len()
    }

    pub fn is_test(&self, i: usize) -> bool {
        self.test_indices.binary_search(&i).is_ok()
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("train fraction must be in (0, 1), got {f}")))
    }
}

fn n_train_for(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).ceil() as usize).min(n)
}

/// Uniform random split: the first `ceil(fraction * n)` entries of a seeded
/// permutation train, the rest test.
pub fn split(n: usize, train_fraction: f64, seed: u64) -> Result<SplitSpec> {
    check_fraction(train_fraction)?;
    let perm = Rng::new(seed).permutation(n);
    let k = n_train_for(n, train_fraction);
    SplitSpec::new(n, perm[k..].to_vec(), train_fraction)
}

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

/// The split every command uses unless told otherwise: 80/20, seeded from
/// the dataset seed's split stream.
pub fn default_split(n: usize, data_seed: u64) -> Result<SplitSpec> {
    split(n, DEFAULT_TRAIN_FRACTION, crate::rng::derive_seed(data_seed, crate::rng::streams::SPLIT))
}

/// Per-class split with the same rule applied inside each class.
pub fn split_stratified(labels: &[usize], train_fraction: f64, seed: u64) -> Result<SplitSpec> {
    check_fraction(train_fraction)?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = Rng::new(seed);
    let mut test = Vec::new();
    for c in 0..classes {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let perm = rng.permutation(members.len());
        let k = n_train_for(members.len(), train_fraction);
        test.extend(perm[k..].iter().map(|&j| members[j]));
    }
    SplitSpec::new(labels.len(), test, train_fraction)
}
