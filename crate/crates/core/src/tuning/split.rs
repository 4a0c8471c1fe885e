//! Random train/test partitions.

use rand::seq::SliceRandom;

use crate::rng::rng_from;
use crate::{Error, Result};

/// Smallest dataset that can be split and still cross-validated.
pub const MIN_SPLIT_POINTS: usize = 5;

/// Uniform random split of `0..n` into `(train, test)` index lists, each sorted.
/// The test side gets `round(n * test_fraction)` points, at least one.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    if n < MIN_SPLIT_POINTS {
        return Err(Error::Insufficient(format!(
            "{n} points; a split needs at least {MIN_SPLIT_POINTS}"
        )));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from(seed));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}
