//! Evaluation results and the final report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{derive_green, Direction, TodBin, TodBoundaries};
use crate::trips::FilterStats;
use crate::tuning::{compute_metrics, Cutoff, CycleModelParams, CycleTrainingSet, Metrics};
use crate::features::{CycleSample, RedSample};
use crate::{Error, Result};

/// Residuals (prediction minus target) in 1 s bins over `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bin_width: f64,
    pub counts: Vec<usize>,
    pub below: usize,
    pub above: usize,
}

impl Histogram {
    pub fn residuals(pairs: &[ParityPoint]) -> Self {
        let (lo, hi, w) = (-30.0, 30.0, 1.0);
        let n_bins = ((hi - lo) / w) as usize;
        let mut h = Self {
            lo,
            hi,
            bin_width: w,
            counts: vec![0; n_bins],
            below: 0,
            above: 0,
        };
        for p in pairs {
            let r = p.prediction - p.target;
            if r < lo {
                h.below += 1;
            } else if r >= hi {
                h.above += 1;
            } else {
                h.counts[(((r - lo) / w).floor() as usize).min(n_bins - 1)] += 1;
            }
        }
        h
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.below + self.above
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityPoint {
    pub target: f64,
    pub prediction: f64,
}

fn parity(preds: &[f64], targets: &[f64]) -> Vec<ParityPoint> {
    preds
        .iter()
        .zip(targets)
        .map(|(&prediction, &target)| ParityPoint { target, prediction })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub train: Metrics,
    pub test: Metrics,
    pub train_parity: Vec<ParityPoint>,
    pub test_parity: Vec<ParityPoint>,
    pub test_residuals: Histogram,
}

impl ModelReport {
    pub fn new(train_pred: &[f64], train_target: &[f64], test_pred: &[f64], test_target: &[f64]) -> Result<Self> {
        let test_parity = parity(test_pred, test_target);
        Ok(Self {
            train: compute_metrics(train_pred, train_target)?,
            test: compute_metrics(test_pred, test_target)?,
            train_parity: parity(train_pred, train_target),
            test_residuals: Histogram::residuals(&test_parity),
            test_parity,
        })
    }
}

/// Green time of one red-time test row, derived from the two models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenRow {
    pub intersection_id: String,
    pub direction: Direction,
    pub tod_bin: TodBin,
    pub repetition: usize,
    pub cycle_pred: f64,
    pub red_pred: f64,
    pub green_pred: f64,
    pub green_target: f64,
    /// Whether the predicted red lies strictly inside the predicted cycle.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenReport {
    pub metrics: Metrics,
    pub rows: Vec<GreenRow>,
    pub residuals: Histogram,
}

/// Mean predicted cycle per (intersection, direction, time-of-day bin), with a
/// per-intersection fallback.
pub struct CycleLookup {
    by_bin: BTreeMap<(String, Direction, TodBin), (f64, usize)>,
    by_intersection: BTreeMap<String, (f64, usize)>,
}

impl CycleLookup {
    pub fn new(samples: &[&CycleSample], preds: &[f64], tod: &TodBoundaries) -> Self {
        let mut by_bin: BTreeMap<(String, Direction, TodBin), (f64, usize)> = BTreeMap::new();
        let mut by_intersection: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for (s, &p) in samples.iter().zip(preds) {
            let e = by_bin
                .entry((s.intersection_id.clone(), s.phase.direction, tod.bin(s.window_start_hour % 24)))
                .or_default();
            e.0 += p;
            e.1 += 1;
            let e = by_intersection.entry(s.intersection_id.clone()).or_default();
            e.0 += p;
            e.1 += 1;
        }
        Self {
            by_bin,
            by_intersection,
        }
    }

    pub fn get(&self, intersection_id: &str, direction: Direction, tod_bin: TodBin) -> Option<f64> {
        self.by_bin
            .get(&(intersection_id.to_string(), direction, tod_bin))
            .or_else(|| self.by_intersection.get(intersection_id))
            .map(|(sum, n)| sum / *n as f64)
    }
}

pub fn green_rows(red_test: &[RedSample], red_pred: &[f64], lookup: &CycleLookup) -> Result<Vec<GreenRow>> {
    let mut rows = Vec::with_capacity(red_test.len());
    for (s, &red) in red_test.iter().zip(red_pred) {
        let Some(cycle) = lookup.get(&s.intersection_id, s.direction, s.tod_bin) else {
            log::warn!(
                "no cycle prediction for {}/{}; green row skipped",
                s.intersection_id,
                s.direction
            );
            continue;
        };
        rows.push(GreenRow {
            intersection_id: s.intersection_id.clone(),
            direction: s.direction,
            tod_bin: s.tod_bin,
            repetition: s.repetition,
            cycle_pred: cycle,
            red_pred: red,
            green_pred: cycle - red,
            green_target: s.target_cycle_s - s.target_red_s,
            consistent: derive_green(cycle, red).is_ok(),
        });
    }
    Ok(rows)
}

impl GreenReport {
    pub fn new(rows: Vec<GreenRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Insufficient("no green rows to evaluate".into()));
        }
        let preds: Vec<f64> = rows.iter().map(|r| r.green_pred).collect();
        let targets: Vec<f64> = rows.iter().map(|r| r.green_target).collect();
        Ok(Self {
            metrics: compute_metrics(&preds, &targets)?,
            residuals: Histogram::residuals(&parity(&preds, &targets)),
            rows,
        })
    }
}

/// Everything computed from the held-out data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub cycle: ModelReport,
    pub red: ModelReport,
    pub green: GreenReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub crate_version: String,
    pub format_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSizes {
    pub stop_events: usize,
    pub cycle_windows: usize,
    pub cycle_train: usize,
    pub cycle_test: usize,
    pub red_samples: usize,
    pub red_train: usize,
    pub red_validation: usize,
    pub red_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub provenance: Provenance,
    pub filter_stats: FilterStats,
    pub sizes: DatasetSizes,
    pub cutoff: Cutoff,
    pub cycle_params: CycleModelParams,
    pub evaluation: Evaluation,
}

fn r2(m: &Metrics) -> String {
    m.r2.map_or("undefined".into(), |v| format!("{v:.4}"))
}

impl Report {
    /// A short human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let e = &self.evaluation;
        let _ = writeln!(s, "# Signal timing estimation report\n");
        let _ = writeln!(s, "config hash `{}`, seed {}, spat {}\n", self.provenance.config_hash, self.provenance.seed, self.provenance.crate_version);
        let _ = writeln!(
            s,
            "minimum starts per window: {} ({})\n",
            self.cutoff.c,
            if self.cutoff.satisfied { "rule satisfied" } else { "rule not met, range maximum used" }
        );
        let _ = writeln!(s, "| model | split | n | MAE (s) | R² | within 2 s |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for (name, m) in [
            ("cycle", &e.cycle.train),
            ("cycle", &e.cycle.test),
            ("red", &e.red.train),
            ("red", &e.red.test),
            ("green", &e.green.metrics),
        ]
        .iter()
        .zip(["train", "test", "train", "test", "test"])
        .map(|((n, m), split)| ((*n, split), *m))
        {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.3} | {} | {:.3} |",
                name.0,
                name.1,
                m.n_points,
                m.mae,
                r2(m),
                m.fraction_within_2s
            );
        }
        s
    }
}

/// The cycle rows a fitted model applies to: windows with more than `c` starts.
pub fn above_cutoff<'a>(samples: &'a [CycleSample], c: usize) -> Vec<&'a CycleSample> {
    samples.iter().filter(|s| s.n_starts > c).collect()
}

pub fn training_set(samples: &[&CycleSample]) -> Result<CycleTrainingSet> {
    let owned: Vec<CycleSample> = samples.iter().map(|s| (*s).clone()).collect();
    CycleTrainingSet::from_samples(&owned)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_bins() {
        let pts: Vec<ParityPoint> = [-31.0, -30.0, -0.5, 0.0, 29.999, 30.0]
            .iter()
            .map(|&r| ParityPoint { target: 50.0, prediction: 50.0 + r })
            .collect();
        let h = Histogram::residuals(&pts);
        assert_eq!(h.counts.len(), 60);
        assert_eq!((h.below, h.above), (1, 1));
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[29], 1);
        assert_eq!(h.counts[30], 1);
        assert_eq!(h.counts[59], 1);
        assert_eq!(h.total(), 6);
    }
}
