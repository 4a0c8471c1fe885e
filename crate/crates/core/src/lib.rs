//! Pre-timed traffic signal timing estimation from probe vehicle trajectories.
//!
//! The crate is organised as a pipeline:
//!
//! - [`model`]: domain types (trace points, signal plans, stop events) and the
//!   small identities shared by everything else (green derivation, direction and
//!   movement classification, time-of-day bins).
//! - [`sim`]: a deterministic corridor simulator that emits 1 Hz probe
//!   trajectories through pre-timed signals together with the ground-truth plans.
//! - [`trips`]: clipping trajectories around intersections, the four trip filters
//!   and stop / acceleration-start extraction.
//! - [`features`]: KDE + FFT periodicity features for cycle length, empirical
//!   quantile vectors for red time, and z-score scaling.
//! - [`learners`]: gradient boosted regression trees and a dense network.
//! - [`tuning`]: splits, k-fold CV, Gaussian-process Bayesian optimisation, the
//!   minimum-starts cutoff rule and the multistage tuning procedure.
//! - [`pipeline`]: run configuration, on-disk artifacts, stage orchestration and
//!   reports.
//! - [`verify`]: executable acceptance checks, shared by the `spat verify`
//!   subcommand and the `acceptance` test target.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod error;
pub mod features;
pub mod learners;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod sim;
pub mod trips;
pub mod tuning;
pub mod verify;

pub use error::{Error, Result};
pub use matrix::Matrix;
