//! Choosing the minimum number of acceleration starts a window needs.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CutoffRule {
    pub c_min: usize,
    pub c_max: usize,
    /// Required fraction of accurate predictions.
    pub threshold: f64,
    /// A prediction is accurate when its absolute error is strictly below this.
    pub tolerance_s: f64,
}

impl Default for CutoffRule {
    fn default() -> Self {
        Self {
            c_min: 2,
            c_max: 250,
            threshold: 0.95,
            tolerance_s: 2.0,
        }
    }
}

impl CutoffRule {
    pub fn range(&self) -> RangeInclusive<usize> {
        self.c_min..=self.c_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub c: usize,
    /// False when no `c` in range reached the threshold and `c` fell back to the maximum.
    pub satisfied: bool,
    /// Accurate fraction among windows with more than `c` starts, when any exist.
    pub fraction: Option<f64>,
}

/// Fraction of accurate points among those with more than `c` starts.
pub fn accurate_fraction(cv_errors: &[(usize, f64)], c: usize, tolerance_s: f64) -> Option<f64> {
    let (mut n, mut ok) = (0usize, 0usize);
    for &(starts, err) in cv_errors {
        if starts > c {
            n += 1;
            if err.abs() < tolerance_s {
                ok += 1;
            }
        }
    }
    (n > 0).then(|| ok as f64 / n as f64)
}

/// Smallest `c` whose restriction `n_starts > c` is at least `threshold` accurate.
/// Values of `c` that leave no points are skipped.
pub fn select_min_starts_cutoff(cv_errors: &[(usize, f64)], rule: &CutoffRule) -> Result<Cutoff> {
    if cv_errors.is_empty() {
        return Err(Error::Insufficient("cutoff selection needs CV errors".into()));
    }
    if rule.c_min > rule.c_max {
        return Err(Error::config("empty cutoff range"));
    }
    // Sort once by starts descending so each c is a prefix.
    let mut sorted: Vec<(usize, bool)> = cv_errors
        .iter()
        .map(|&(s, e)| (s, e.abs() < rule.tolerance_s))
        .collect();
    sorted.sort_by(|a, b| b.0.cmp(&a.0));
    let prefix_ok: Vec<usize> = sorted
        .iter()
        .scan(0, |acc, &(_, ok)| {
            *acc += ok as usize;
            Some(*acc)
        })
        .collect();
    // `end` tracks how many points have more than `c` starts.
    let mut end = sorted.len();
    let mut best = None;
    for c in rule.range() {
        while end > 0 && sorted[end - 1].0 <= c {
            end -= 1;
        }
        if end == 0 {
            break;
        }
        let fraction = prefix_ok[end - 1] as f64 / end as f64;
        if fraction >= rule.threshold {
            best = Some(Cutoff {
                c,
                satisfied: true,
                fraction: Some(fraction),
            });
            break;
        }
    }
    Ok(best.unwrap_or_else(|| Cutoff {
        c: rule.c_max,
        satisfied: false,
        fraction: accurate_fraction(cv_errors, rule.c_max, rule.tolerance_s),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(errs: &[(usize, f64)], rule: &CutoffRule) -> (usize, bool) {
        for c in rule.range() {
            if let Some(f) = accurate_fraction(errs, c, rule.tolerance_s) {
                if f >= rule.threshold {
                    return (c, true);
                }
            }
        }
        (rule.c_max, false)
    }

    #[test]
    fn all_exact() {
        let errs: Vec<(usize, f64)> = (3..40).map(|n| (n, 0.0)).collect();
        let c = select_min_starts_cutoff(&errs, &CutoffRule::default()).unwrap();
        assert_eq!((c.c, c.satisfied), (2, true));
    }

    #[test]
    fn step_at_twenty() {
        let mut errs: Vec<(usize, f64)> = (2..=20).flat_map(|n| [(n, 5.0); 3]).collect();
        errs.extend((21..51).map(|n| (n, 0.5)));
        let c = select_min_starts_cutoff(&errs, &CutoffRule::default()).unwrap();
        assert_eq!(c.c, 20);
        assert_eq!(c.fraction, Some(1.0));
    }

    #[test]
    fn empty_restrictions_are_skipped() {
        let errs = vec![(10, 5.0), (10, 5.0)];
        let c = select_min_starts_cutoff(&errs, &CutoffRule::default()).unwrap();
        assert_eq!((c.c, c.satisfied, c.fraction), (250, false, None));
        assert!(select_min_starts_cutoff(&[], &CutoffRule::default()).is_err());
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(
            errs in prop::collection::vec((0usize..300, 0.0f64..6.0), 1..200),
            threshold in 0.5f64..1.0,
        ) {
            let rule = CutoffRule { threshold, ..CutoffRule::default() };
            let got = select_min_starts_cutoff(&errs, &rule).unwrap();
            prop_assert_eq!((got.c, got.satisfied), brute(&errs, &rule));
        }
    }
}
