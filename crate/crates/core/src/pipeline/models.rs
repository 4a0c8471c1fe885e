//! The two trained estimators with their feature scaling.

use serde::{Deserialize, Serialize};

use crate::features::{RedSample, ScalerParams};
use crate::learners::{gbdt, mlp, GbdtModel, MlpConfig, MlpModel};
use crate::tuning::{CycleModelParams, CycleTrainingSet};
use crate::{Error, Matrix, Result};

/// Boosted trees on the strongest Fourier frequencies of a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleModel {
    pub params: CycleModelParams,
    pub scaler: ScalerParams,
    pub trees: GbdtModel,
}

impl CycleModel {
    /// Fits on the rows with more than `params.min_starts` starts.
    pub fn fit(train: &CycleTrainingSet, params: &CycleModelParams) -> Result<Self> {
        let rows = train.above(params.min_starts);
        if rows.is_empty() {
            return Err(Error::Insufficient(format!(
                "no training windows with more than {} starts",
                params.min_starts
            )));
        }
        let x = rows.fourier(params.n_fourier)?;
        let scaler = ScalerParams::fit(&x)?;
        let trees = gbdt::train(&scaler.apply(&x)?, &rows.targets, &params.gbdt)?;
        Ok(Self {
            params: params.clone(),
            scaler,
            trees,
        })
    }

    /// Predicts from full-width frequency rows.
    pub fn predict(&self, data: &CycleTrainingSet) -> Result<Vec<f64>> {
        if data.is_empty() {
            return Ok(Vec::new());
        }
        let x = data.fourier(self.params.n_fourier)?;
        self.trees.predict(&self.scaler.apply(&x)?)
    }
}

pub fn red_features(samples: &[RedSample]) -> Result<Matrix> {
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.quantiles.as_slice()).collect();
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, crate::features::QUANTILE_GRID));
    }
    Matrix::from_rows(&rows)
}

/// The dense network on standardised quantile vectors. Targets are standardised
/// with the training mean and deviation and mapped back at prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedModel {
    pub scaler: ScalerParams,
    pub target_mean: f64,
    pub target_std: f64,
    pub network: MlpModel<f32>,
}

impl RedModel {
    pub fn fit(train: &[RedSample], validation: &[RedSample], cfg: &MlpConfig) -> Result<Self> {
        if train.is_empty() || validation.is_empty() {
            return Err(Error::Insufficient("red-time training needs training and validation rows".into()));
        }
        let xt = red_features(train)?;
        let xv = red_features(validation)?;
        let scaler = ScalerParams::fit(&xt)?;
        let yt: Vec<f64> = train.iter().map(|s| s.target_red_s).collect();
        let yv: Vec<f64> = validation.iter().map(|s| s.target_red_s).collect();
        let n = yt.len() as f64;
        let target_mean = yt.iter().sum::<f64>() / n;
        let var = yt.iter().map(|v| (v - target_mean).powi(2)).sum::<f64>() / n;
        let target_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let z = |y: &[f64]| y.iter().map(|v| (v - target_mean) / target_std).collect::<Vec<_>>();
        let init = MlpModel::<f32>::init(cfg)?;
        let network = mlp::train(init, &scaler.apply(&xt)?, &z(&yt), &scaler.apply(&xv)?, &z(&yv), cfg)?;
        log::info!(
            "red network stopped after {} epochs, best epoch {:?}",
            network.history.len(),
            network.best_epoch
        );
        Ok(Self {
            scaler,
            target_mean,
            target_std,
            network,
        })
    }

    pub fn predict(&self, samples: &[RedSample]) -> Result<Vec<f64>> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        let x = self.scaler.apply(&red_features(samples)?)?;
        Ok(self
            .network
            .predict(&x)?
            .into_iter()
            .map(|z| self.target_mean + self.target_std * z)
            .collect())
    }
}
