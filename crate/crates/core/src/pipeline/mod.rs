//! Configuration, persistence and the staged batch pipeline.

pub mod config;
pub mod io;
pub mod models;
pub mod report;
pub mod stages;

pub use config::{FeatureConfig, RunConfig, Scenario, SplitConfig};
pub use models::{CycleModel, RedModel};
pub use report::{Evaluation, GreenRow, Histogram, ModelReport, ParityPoint, Report};
pub use stages::{parse_stages, run_in_memory, run_pipeline, RunSummary, Stage, StageStatus};
