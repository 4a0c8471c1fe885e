//! Model inputs: periodicity features for cycle length, quantile vectors for red
//! time, and z-score scaling.

mod dataset;
mod periodicity;
mod quantile;
mod scaler;

pub use dataset::{
    bin_accel_starts, build_cycle_dataset, build_red_dataset, group_stop_durations, CycleBin,
    CycleBinKey, CycleSample, RedBinKey, RedSample, ResampleConfig,
};
pub use periodicity::{
    kde_density, top_fourier_frequencies, KDE_BANDWIDTH_S, WINDOW_GRID_LEN,
};
pub use quantile::{empirical_quantile, quantile_vector, QUANTILE_GRID};
pub use scaler::ScalerParams;
