//! Grouping of stop events into model samples.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::periodicity::{kde_density, top_fourier_frequencies, WINDOW_GRID_LEN};
use super::quantile::quantile_vector;
use crate::model::{Direction, Movement, PhaseKey, StopEvent, TodBin};
use crate::rng::derived_rng;
use crate::sim::GroundTruth;
use crate::{Error, Result};

/// (intersection, phase, hour) window of acceleration starts. `hour` counts from
/// the start of the data, not the hour of day.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CycleBinKey {
    pub intersection_id: String,
    pub phase: PhaseKey,
    pub hour: u32,
}

impl fmt::Display for CycleBinKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/h{}", self.intersection_id, self.phase, self.hour)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleBin {
    /// Absolute acceleration start times, ascending.
    pub starts: Vec<f64>,
    pub target_cycle_s: f64,
}

pub fn bin_accel_starts(
    events: &[StopEvent],
    truth: &GroundTruth,
) -> Result<BTreeMap<CycleBinKey, CycleBin>> {
    let mut bins: BTreeMap<CycleBinKey, CycleBin> = BTreeMap::new();
    for e in events {
        let hour = (e.accel_start_s / 3600.0).floor();
        if hour < 0.0 {
            return Err(Error::data(format!(
                "event of {} has a negative start time",
                e.vehicle_id
            )));
        }
        let key = CycleBinKey {
            intersection_id: e.intersection_id.clone(),
            phase: e.phase_key(),
            hour: hour as u32,
        };
        if let Some(bin) = bins.get_mut(&key) {
            bin.starts.push(e.accel_start_s);
            continue;
        }
        let target = truth
            .target(&key.intersection_id, key.phase, key.hour)
            .ok_or_else(|| Error::MissingTarget(key.to_string()))?;
        bins.insert(
            key,
            CycleBin {
                starts: vec![e.accel_start_s],
                target_cycle_s: target.cycle_s,
            },
        );
    }
    for bin in bins.values_mut() {
        bin.starts.sort_by(f64::total_cmp);
    }
    Ok(bins)
}

/// One window's features: the strongest Fourier frequencies of its start-time KDE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSample {
    pub intersection_id: String,
    pub phase: PhaseKey,
    pub window_start_hour: u32,
    pub n_starts: usize,
    /// Frequencies in Hz, strongest first.
    pub features: Vec<f64>,
    pub target_cycle_s: f64,
}

/// Builds one sample per window with at least two starts and, when
/// `min_starts >= 2`, strictly more than `min_starts` starts.
pub fn build_cycle_dataset(
    bins: &BTreeMap<CycleBinKey, CycleBin>,
    k: usize,
    min_starts: usize,
    bandwidth_s: f64,
) -> Result<Vec<CycleSample>> {
    let selected: Vec<(&CycleBinKey, &CycleBin)> = bins
        .iter()
        .filter(|(_, b)| {
            let n = b.starts.len();
            n >= 2 && (min_starts < 2 || n > min_starts)
        })
        .collect();
    selected
        .into_par_iter()
        .map(|(key, bin)| {
            let first = bin.starts[0];
            let rel: Vec<f64> = bin.starts.iter().map(|s| s - first).collect();
            let density = kde_density(&rel, bandwidth_s, WINDOW_GRID_LEN)?;
            let features = top_fourier_frequencies(&density, k)?;
            Ok(CycleSample {
                intersection_id: key.intersection_id.clone(),
                phase: key.phase,
                window_start_hour: key.hour,
                n_starts: bin.starts.len(),
                features,
                target_cycle_s: bin.target_cycle_s,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RedBinKey {
    pub intersection_id: String,
    pub direction: Direction,
    pub tod_bin: TodBin,
}

impl fmt::Display for RedBinKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.intersection_id, self.direction, self.tod_bin)
    }
}

/// Stop durations grouped by intersection, direction of travel and time-of-day bin.
pub fn group_stop_durations(events: &[StopEvent]) -> BTreeMap<RedBinKey, Vec<f64>> {
    let mut out: BTreeMap<RedBinKey, Vec<f64>> = BTreeMap::new();
    for e in events {
        out.entry(RedBinKey {
            intersection_id: e.intersection_id.clone(),
            direction: e.direction,
            tod_bin: e.tod_bin,
        })
        .or_default()
        .push(e.stop_duration_s);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResampleConfig {
    pub samples_per_grouping: usize,
    pub repetitions: usize,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self {
            samples_per_grouping: 50,
            repetitions: 40,
        }
    }
}

/// One resampled grouping of a bin's stop durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedSample {
    pub intersection_id: String,
    pub direction: Direction,
    pub tod_bin: TodBin,
    pub repetition: usize,
    /// `Q_0.01 .. Q_1.00` of the grouping, seconds.
    pub quantiles: Vec<f64>,
    pub target_red_s: f64,
    pub target_cycle_s: f64,
}

/// Draws `repetitions` with-replacement groupings of `samples_per_grouping` stop
/// durations from every bin. Each bin has its own random stream keyed by the bin.
pub fn build_red_dataset(
    groups: &BTreeMap<RedBinKey, Vec<f64>>,
    truth: &GroundTruth,
    cfg: ResampleConfig,
    seed: u64,
) -> Result<Vec<RedSample>> {
    if cfg.samples_per_grouping == 0 {
        return Err(Error::config("samples_per_grouping must be positive"));
    }
    let bins: Vec<(&RedBinKey, &Vec<f64>)> = groups.iter().collect();
    let per_bin: Vec<Vec<RedSample>> = bins
        .into_par_iter()
        .map(|(key, stops)| {
            if stops.is_empty() {
                return Err(Error::data(format!("red-time bin {key} is empty")));
            }
            let plan = truth
                .plan(&key.intersection_id)
                .ok_or_else(|| Error::MissingTarget(key.to_string()))?;
            let phase = plan
                .resolve_phase(PhaseKey::new(key.direction, Movement::Through))
                .ok_or_else(|| Error::MissingTarget(key.to_string()))?;
            let mut rng = derived_rng(seed, &format!("red/{key}"));
            (0..cfg.repetitions)
                .map(|repetition| {
                    let grouping: Vec<f64> = (0..cfg.samples_per_grouping)
                        .map(|_| stops[rng.gen_range(0..stops.len())])
                        .collect();
                    Ok(RedSample {
                        intersection_id: key.intersection_id.clone(),
                        direction: key.direction,
                        tod_bin: key.tod_bin,
                        repetition,
                        quantiles: quantile_vector(&grouping)?,
                        target_red_s: phase.red_s,
                        target_cycle_s: plan.cycle_s,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_bin.into_iter().flatten().collect())
}
