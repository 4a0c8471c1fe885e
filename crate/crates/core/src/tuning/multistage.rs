//! The four-step tuning procedure for the cycle-length model.
//!
//! 1. Bayesian optimisation of the boosting parameters and feature count by CV MAE.
//! 2. Out-of-fold predictions at that optimum.
//! 3. The minimum-starts cutoff from those predictions.
//! 4. Re-optimisation on windows with more than the cutoff's starts.

use serde::{Deserialize, Serialize};

use super::bayes::{bayes_optimize, BoConfig, BoResult};
use super::cutoff::{select_min_starts_cutoff, Cutoff, CutoffRule};
use super::cv::{gbdt_cv_predict, DEFAULT_FOLDS};
use super::metrics::compute_metrics;
use super::space::{Assignment, SearchSpace};
use crate::features::CycleSample;
use crate::learners::GbdtParams;
use crate::rng::derive_seed;
use crate::{Error, Matrix, Result};

/// Cycle-model rows with the full ranked frequency list and each window's start count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTrainingSet {
    pub features: Matrix,
    pub n_starts: Vec<usize>,
    pub targets: Vec<f64>,
}

impl CycleTrainingSet {
    pub fn from_samples(samples: &[CycleSample]) -> Result<Self> {
        let width = samples.first().map_or(0, |s| s.features.len());
        if samples.iter().any(|s| s.features.len() != width) {
            return Err(Error::data("cycle samples have differing feature counts"));
        }
        let rows: Vec<&[f64]> = samples.iter().map(|s| s.features.as_slice()).collect();
        Ok(Self {
            features: if rows.is_empty() {
                Matrix::zeros(0, width)
            } else {
                Matrix::from_rows(&rows)?
            },
            n_starts: samples.iter().map(|s| s.n_starts).collect(),
            targets: samples.iter().map(|s| s.target_cycle_s).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(idx),
            n_starts: idx.iter().map(|&i| self.n_starts[i]).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
        }
    }

    /// Rows with more than `min_starts` starts.
    pub fn above(&self, min_starts: usize) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.n_starts[i] > min_starts).collect();
        self.subset(&idx)
    }

    /// The first `k` (strongest) frequencies of every row.
    pub fn fourier(&self, k: usize) -> Result<Matrix> {
        if k == 0 || k > self.features.cols() {
            return Err(Error::config(format!(
                "{k} Fourier frequencies requested, {} available",
                self.features.cols()
            )));
        }
        Ok(self.features.take_cols(k))
    }
}

/// Everything that defines a trained cycle model besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleModelParams {
    pub gbdt: GbdtParams,
    pub n_fourier: usize,
    pub min_starts: usize,
}

impl CycleModelParams {
    pub fn from_assignment(a: &Assignment, min_starts: usize, seed: u64) -> Result<Self> {
        let get = |k: &str| {
            a.get(k)
                .copied()
                .ok_or_else(|| Error::config(format!("assignment lacks `{k}`")))
        };
        Ok(Self {
            gbdt: GbdtParams {
                n_estimators: get("n_estimators")?.round() as usize,
                learning_rate: get("learning_rate")?,
                max_depth: get("max_depth")?.round() as usize,
                gamma: get("gamma")?,
                min_child_weight: get("min_child_weight")?,
                subsample: get("subsample")?,
                colsample_by_tree: get("colsample_by_tree")?,
                lambda: 1.0,
                seed,
            },
            n_fourier: get("n_fourier")?.round() as usize,
            min_starts: a.get("min_starts").map_or(min_starts, |v| v.round() as usize),
        })
    }

    /// The optimum reported for the cycle model, including its single Fourier
    /// frequency and cutoff of 20 starts.
    pub fn reported_optimum() -> Self {
        Self {
            gbdt: GbdtParams::reported_optimum(),
            n_fourier: 1,
            min_starts: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneConfig {
    pub n_init: usize,
    pub n_iter: usize,
    pub restarts: usize,
    pub folds: usize,
    pub cutoff: CutoffRule,
    pub seed: u64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            n_init: 10,
            n_iter: 50,
            restarts: 64,
            folds: DEFAULT_FOLDS,
            cutoff: CutoffRule::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub params: CycleModelParams,
    pub cutoff: Cutoff,
    pub first_pass: BoResult,
    pub second_pass: BoResult,
    /// `(n_starts, |error|)` of the out-of-fold predictions at the first optimum.
    pub cv_errors: Vec<(usize, f64)>,
}

/// CV MAE of the boosted model on `data` with the given parameters.
pub fn cv_mae(data: &CycleTrainingSet, params: &CycleModelParams, folds: usize, seed: u64) -> Result<f64> {
    let x = data.fourier(params.n_fourier)?;
    let preds = gbdt_cv_predict(&x, &data.targets, &params.gbdt, folds, seed)?;
    Ok(compute_metrics(&preds, &data.targets)?.mae)
}

fn optimise(data: &CycleTrainingSet, space: &SearchSpace, cfg: &TuneConfig, label: &str) -> Result<BoResult> {
    let gbdt_seed = derive_seed(cfg.seed, "gbdt");
    let cv_seed = derive_seed(cfg.seed, "cv");
    let bo = BoConfig {
        n_init: cfg.n_init,
        n_iter: cfg.n_iter,
        restarts: cfg.restarts,
        seed: derive_seed(cfg.seed, label),
        ..BoConfig::default()
    };
    bayes_optimize(
        |a| {
            CycleModelParams::from_assignment(a, 0, gbdt_seed)
                .and_then(|p| cv_mae(data, &p, cfg.folds, cv_seed))
                .map_or(f64::NAN, |mae| -mae)
        },
        space,
        &bo,
    )
}

pub fn multistage_tune(train: &CycleTrainingSet, cfg: &TuneConfig) -> Result<TuneOutcome> {
    let min_rows = 5 * cfg.folds;
    if train.len() < min_rows {
        return Err(Error::Insufficient(format!(
            "{} training windows; tuning needs at least {min_rows}",
            train.len()
        )));
    }
    // The cutoff rule, not the optimiser, decides the minimum start count.
    let space = SearchSpace::cycle_model().without("min_starts");
    let gbdt_seed = derive_seed(cfg.seed, "gbdt");

    let first_pass = optimise(train, &space, cfg, "bo/first")?;
    let first = CycleModelParams::from_assignment(&first_pass.best, 0, gbdt_seed)?;
    let x = train.fourier(first.n_fourier)?;
    let preds = gbdt_cv_predict(&x, &train.targets, &first.gbdt, cfg.folds, derive_seed(cfg.seed, "cv"))?;
    let cv_errors: Vec<(usize, f64)> = train
        .n_starts
        .iter()
        .zip(preds.iter().zip(&train.targets))
        .map(|(&n, (p, t))| (n, (p - t).abs()))
        .collect();
    let cutoff = select_min_starts_cutoff(&cv_errors, &cfg.cutoff)?;
    log::info!(
        "first pass CV MAE {:.3}; cutoff {} (fraction {:?})",
        -first_pass.best_score,
        cutoff.c,
        cutoff.fraction
    );

    let filtered = train.above(cutoff.c);
    if filtered.len() < min_rows {
        return Err(Error::Insufficient(format!(
            "{} windows have more than {} starts; tuning needs at least {min_rows}",
            filtered.len(),
            cutoff.c
        )));
    }
    let second_pass = optimise(&filtered, &space, cfg, "bo/second")?;
    let params = CycleModelParams::from_assignment(&second_pass.best, cutoff.c, gbdt_seed)?;
    log::info!("second pass CV MAE {:.3}", -second_pass.best_score);
    Ok(TuneOutcome {
        params,
        cutoff,
        first_pass,
        second_pass,
        cv_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;

    /// Windows whose strongest frequency is exactly 1 / cycle.
    fn learnable(n: usize, starts: impl Fn(usize) -> usize, seed: u64) -> CycleTrainingSet {
        let mut rng = rng_from(seed);
        let cycles = [60.0, 75.0, 90.0, 100.0, 110.0, 120.0];
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..n {
            let c = cycles[rng.gen_range(0..cycles.len())];
            let mut f = vec![1.0 / c, 2.0 / c];
            f.extend((0..28).map(|_| rng.gen::<f64>() * 0.1));
            rows.push(f);
            targets.push(c);
        }
        CycleTrainingSet {
            features: Matrix::from_rows(&rows).unwrap(),
            n_starts: (0..n).map(starts).collect(),
            targets,
        }
    }

    fn quick(seed: u64) -> TuneConfig {
        TuneConfig {
            n_init: 3,
            n_iter: 2,
            restarts: 4,
            seed,
            ..TuneConfig::default()
        }
    }

    #[test]
    fn dense_windows_keep_lowest_cutoff() {
        let data = learnable(60, |i| 200 + i, 1);
        let out = multistage_tune(&data, &quick(5)).unwrap();
        assert_eq!(out.cutoff.c, 2);
        assert!(out.cutoff.satisfied);
        assert_eq!(out.params.min_starts, 2);
        assert_eq!(out.cv_errors.len(), 60);
        let keys = |r: &BoResult| r.best.keys().cloned().collect::<Vec<_>>();
        assert_eq!(keys(&out.first_pass), keys(&out.second_pass));
        assert_eq!(out, multistage_tune(&data, &quick(5)).unwrap());
    }

    #[test]
    fn too_few_windows() {
        let data = learnable(20, |_| 50, 2);
        assert!(matches!(multistage_tune(&data, &quick(1)), Err(Error::Insufficient(_))));
    }

    #[test]
    fn reported_optimum_round_trips() {
        let p = CycleModelParams::reported_optimum();
        assert_eq!(p.gbdt.max_depth, 17);
        assert_eq!(p.gbdt.min_child_weight, 1.499);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<CycleModelParams>(&json).unwrap(), p);
    }

    #[test]
    fn fourier_prefix() {
        let data = learnable(6, |_| 5, 3);
        let x = data.fourier(2).unwrap();
        assert_eq!(x.cols(), 2);
        assert_eq!(x.row(0), &data.features.row(0)[..2]);
        assert!(data.fourier(31).is_err());
        assert_eq!(data.above(4).len(), 6);
        assert_eq!(data.above(5).len(), 0);
    }
}
