//! Splitting, cross-validation, Bayesian optimisation and the multistage
//! tuning procedure for the cycle model.

pub mod bayes;
pub mod cutoff;
pub mod cv;
pub mod metrics;
pub mod multistage;
pub mod space;
pub mod split;

pub use bayes::{bayes_optimize, BoConfig, BoResult};
pub use cutoff::{select_min_starts_cutoff, Cutoff, CutoffRule};
pub use cv::{cross_val_predict, gbdt_cv_predict, kfold_cv_predict, kfold_indices};
pub use metrics::{compute_metrics, Metrics};
pub use multistage::{multistage_tune, CycleModelParams, CycleTrainingSet, TuneConfig, TuneOutcome};
pub use space::{Assignment, Dim, Scale, SearchSpace};
pub use split::train_test_split;
