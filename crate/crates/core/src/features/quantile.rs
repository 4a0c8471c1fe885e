//! Empirical quantiles of stop durations.

use crate::{Error, Result};

/// Quantile levels 0.01, 0.02, .., 1.00 of the red-time feature vector.
pub const QUANTILE_GRID: usize = 100;

/// `Q_alpha = max { s_i : #{s_j <= s_i} / n < alpha }`.
///
/// The strict inequality leaves the set empty for small `alpha` (the minimum is
/// returned then) and always excludes the maximum, so `alpha >= 1` returns the
/// maximum stop time directly.
pub fn empirical_quantile(stops: &[f64], alpha: f64) -> Result<f64> {
    if stops.is_empty() {
        return Err(Error::data("empirical quantile of an empty sample"));
    }
    let mut sorted = stops.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, alpha))
}

fn quantile_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    if alpha >= 1.0 {
        return sorted[n - 1];
    }
    let nf = n as f64;
    let mut best = None;
    let mut i = 0;
    while i < n {
        // Count of values <= sorted[i] includes all duplicates.
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let count = (j + 1) as f64;
        if count / nf < alpha {
            best = Some(sorted[i]);
        } else {
            break;
        }
        i = j + 1;
    }
    best.unwrap_or(sorted[0])
}

/// The 100 quantiles `Q_0.01 .. Q_1.00`.
pub fn quantile_vector(stops: &[f64]) -> Result<Vec<f64>> {
    if stops.is_empty() {
        return Err(Error::data("quantile vector of an empty sample"));
    }
    let mut sorted = stops.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((1..=QUANTILE_GRID)
        .map(|j| quantile_sorted(&sorted, j as f64 / QUANTILE_GRID as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Literal set-builder evaluation.
    fn oracle(stops: &[f64], alpha: f64) -> f64 {
        let n = stops.len() as f64;
        if alpha >= 1.0 {
            return stops.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        let set: Vec<f64> = stops
            .iter()
            .copied()
            .filter(|&si| stops.iter().filter(|&&sj| sj <= si).count() as f64 / n < alpha)
            .collect();
        if set.is_empty() {
            stops.iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            set.into_iter().fold(f64::NEG_INFINITY, f64::max)
        }
    }

    #[test]
    fn worked_examples() {
        let s = [4.0, 8.0, 15.0, 16.0];
        assert_eq!(empirical_quantile(&s, 0.5).unwrap(), 4.0);
        assert_eq!(empirical_quantile(&s, 1.0).unwrap(), 16.0);
        assert_eq!(empirical_quantile(&s, 0.01).unwrap(), 4.0);
        assert_eq!(empirical_quantile(&s, 0.51).unwrap(), 8.0);
        assert!(empirical_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn duplicates_are_counted() {
        let s = [3.0, 3.0, 3.0, 9.0];
        assert_eq!(empirical_quantile(&s, 0.75).unwrap(), 3.0);
        assert_eq!(empirical_quantile(&s, 0.76).unwrap(), 3.0);
        assert_eq!(empirical_quantile(&s, 0.99).unwrap(), 3.0);
        assert_eq!(empirical_quantile(&s, 1.0).unwrap(), 9.0);
    }

    proptest! {
        #[test]
        fn matches_set_builder_and_is_monotone(
            stops in prop::collection::vec(0.0f64..120.0, 1..30),
        ) {
            let v = quantile_vector(&stops).unwrap();
            for (j, q) in v.iter().enumerate() {
                let alpha = (j + 1) as f64 / 100.0;
                prop_assert_eq!(*q, oracle(&stops, alpha));
            }
            prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(v[99], stops.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
    }
}
