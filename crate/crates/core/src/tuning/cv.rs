//! K-fold cross-validation with per-fold feature scaling.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::features::ScalerParams;
use crate::learners::gbdt::{self, GbdtParams};
use crate::rng::rng_from;
use crate::{Error, Matrix, Result};

pub const DEFAULT_FOLDS: usize = 5;

/// Shuffles `0..n` and cuts it into `k` contiguous validation folds whose sizes
/// differ by at most one. Each fold is returned sorted.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::config("cross-validation needs at least two folds"));
    }
    if k > n {
        return Err(Error::Insufficient(format!("{k} folds requested for {n} points")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = idx[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// Out-of-fold predictions: `fit_predict(train, validation)` must return one
/// prediction per validation index. Folds run in parallel.
pub fn cross_val_predict<F>(n: usize, k: usize, seed: u64, fit_predict: F) -> Result<Vec<f64>>
where
    F: Fn(&[usize], &[usize]) -> Result<Vec<f64>> + Sync,
{
    let folds = kfold_indices(n, k, seed)?;
    let per_fold: Vec<Vec<f64>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, val)| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, fold)| fold.iter().copied())
                .collect();
            let preds = fit_predict(&train, val)?;
            if preds.len() != val.len() {
                return Err(Error::data("learner returned the wrong number of predictions"));
            }
            Ok(preds)
        })
        .collect::<Result<_>>()?;
    let mut out = vec![f64::NAN; n];
    for (fold, preds) in folds.iter().zip(per_fold) {
        for (&i, p) in fold.iter().zip(preds) {
            out[i] = p;
        }
    }
    Ok(out)
}

/// Cross-validates `learner(x_train, y_train, x_val)`, standardising features
/// with a scaler fit on each training fold only.
pub fn kfold_cv_predict<F>(x: &Matrix, y: &[f64], k: usize, seed: u64, learner: F) -> Result<Vec<f64>>
where
    F: Fn(&Matrix, &[f64], &Matrix) -> Result<Vec<f64>> + Sync,
{
    if x.rows() != y.len() {
        return Err(Error::data("row and target counts differ"));
    }
    cross_val_predict(x.rows(), k, seed, |train, val| {
        let xt = x.select_rows(train);
        let scaler = ScalerParams::fit(&xt)?;
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        learner(&scaler.apply(&xt)?, &yt, &scaler.apply(&x.select_rows(val))?)
    })
}

pub fn gbdt_cv_predict(x: &Matrix, y: &[f64], params: &GbdtParams, k: usize, seed: u64) -> Result<Vec<f64>> {
    kfold_cv_predict(x, y, k, seed, |xt, yt, xv| gbdt::train(xt, yt, params)?.predict(xv))
}
