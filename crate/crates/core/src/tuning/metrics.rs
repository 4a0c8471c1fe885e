//! Regression metrics.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute errors below this count as accurate.
pub const WITHIN_TOLERANCE_S: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    /// `None` when the targets have zero variance.
    pub r2: Option<f64>,
    pub n_points: usize,
    pub fraction_within_2s: f64,
}

pub fn compute_metrics(preds: &[f64], targets: &[f64]) -> Result<Metrics> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(Error::data(format!(
            "metrics need equal nonzero lengths, got {} predictions and {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let n = preds.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let (mut abs, mut ss_res, mut ss_tot, mut within) = (0.0, 0.0, 0.0, 0usize);
    for (p, t) in preds.iter().zip(targets) {
        let e = p - t;
        abs += e.abs();
        ss_res += e * e;
        ss_tot += (t - mean) * (t - mean);
        if e.abs() < WITHIN_TOLERANCE_S {
            within += 1;
        }
    }
    Ok(Metrics {
        mae: abs / n,
        r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
        n_points: preds.len(),
        fraction_within_2s: within as f64 / n,
    })
}
