//! The two regressors: boosted trees for cycle length, a dense network for red time.

pub mod gbdt;
pub mod mlp;

pub use gbdt::{GbdtModel, GbdtParams, Node, Tree};
pub use mlp::{Dense, EpochRecord, MlpConfig, MlpModel, Real, HIDDEN_SIZES};
