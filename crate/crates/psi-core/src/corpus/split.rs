use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Train/dev/test fractions and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub dev_ratio: f64,
    pub test_ratio: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_ratio: 0.7,
            dev_ratio: 0.1,
            test_ratio: 0.2,
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let ratios = [self.train_ratio, self.dev_ratio, self.test_ratio];
        if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0 && *r < 1.0)) {
            return Err(CorpusError::InvalidSplit(format!(
                "ratios must lie in (0,1), got {ratios:?}"
            )));
        }
        let sum: f64 = ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidSplit(format!("ratios must sum to 1, got {sum}")));
        }
        Ok(())
    }

    /// `(train, dev, test)` sizes for `n` items: dev and test are floored,
    /// train takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // absorb representation error such as 0.1 * 1000 = 100.00000000000001
        let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
        let dev = floor(self.dev_ratio);
        let test = floor(self.test_ratio);
        (n - dev - test, dev, test)
    }
}

/// Seeded, unstratified shuffle followed by contiguous allocation.
/// Train, dev and test partitions.
pub type Splits<T> = (Vec<T>, Vec<T>, Vec<T>);

pub fn split_dataset<T: Clone>(data: &[T], spec: &SplitSpec) -> Result<Splits<T>, CorpusError> {
    spec.validate()?;
    if data.len() < 3 {
        return Err(CorpusError::InvalidSplit(format!(
            "need at least 3 items, got {}",
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let (train_n, dev_n, _) = spec.sizes(data.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();
    Ok((
        pick(&order[..train_n]),
        pick(&order[train_n..train_n + dev_n]),
        pick(&order[train_n + dev_n..]),
    ))
}
