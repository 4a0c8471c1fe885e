//! Run configuration, loaded from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::features::{ResampleConfig, KDE_BANDWIDTH_S};
use crate::learners::MlpConfig;
use crate::rng::derive_seed;
use crate::sim::{CorridorSpec, SimConfig};
use crate::trips::TripConfig;
use crate::tuning::TuneConfig;
use crate::{Error, Result};

/// Where the trajectories come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// A randomly generated arterial corridor.
    Corridor(CorridorSpec),
    /// A fully specified network.
    Explicit(SimConfig),
}

impl Default for Scenario {
    fn default() -> Self {
        Self::Corridor(CorridorSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub kde_bandwidth_s: f64,
    /// Frequencies kept per window; the tuner picks how many of these the model uses.
    pub n_fourier_max: usize,
    pub resample: ResampleConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            kde_bandwidth_s: KDE_BANDWIDTH_S,
            n_fourier_max: 30,
            resample: ResampleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub test_fraction: f64,
    /// Share of the red-time training rows held out for early stopping.
    pub validation_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            validation_fraction: 0.2,
        }
    }
}

/// Everything a pipeline run depends on. Seeds inside the embedded configs are
/// replaced by ones derived from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Not part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workspace: Option<PathBuf>,
    #[serde(default)]
    pub scenario: Scenario,
    #[serde(default)]
    pub trips: TripConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub tuning: TuneConfig,
    #[serde(default)]
    pub network: MlpConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 2023,
            workspace: None,
            scenario: Scenario::default(),
            trips: TripConfig::default(),
            features: FeatureConfig::default(),
            split: SplitConfig::default(),
            tuning: TuneConfig::default(),
            network: MlpConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    /// The simulator configuration with its seed derived from the master seed.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let seed = derive_seed(self.seed, "sim");
        match &self.scenario {
            Scenario::Corridor(spec) => CorridorSpec { seed, ..spec.clone() }.build(),
            Scenario::Explicit(cfg) => {
                let cfg = SimConfig {
                    rng_seed: seed,
                    ..cfg.clone()
                };
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }

    pub fn tune_config(&self) -> TuneConfig {
        TuneConfig {
            seed: derive_seed(self.seed, "tune"),
            ..self.tuning.clone()
        }
    }

    pub fn network_config(&self) -> MlpConfig {
        MlpConfig {
            seed: derive_seed(self.seed, "network"),
            ..self.network.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim_config()?;
        let t = &self.trips;
        if !(t.radius_m > 0.0 && t.max_gap_s > 0.0 && t.center_distance_m > 0.0 && t.max_duration_s > 0.0) {
            return Err(Error::config("trip filter thresholds must be positive"));
        }
        let f = &self.features;
        if !(f.kde_bandwidth_s > 0.0) || f.n_fourier_max == 0 || f.resample.samples_per_grouping == 0 || f.resample.repetitions == 0 {
            return Err(Error::config("invalid feature settings"));
        }
        let s = &self.split;
        for v in [s.test_fraction, s.validation_fraction] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config("split fractions must lie in (0, 1)"));
            }
        }
        let tu = &self.tuning;
        if tu.folds < 2 || tu.n_init + tu.n_iter == 0 {
            return Err(Error::config("tuning needs at least two folds and a nonzero budget"));
        }
        if tu.cutoff.c_min > tu.cutoff.c_max {
            return Err(Error::config("empty cutoff range"));
        }
        self.network.validate()?;
        if self.network.input_dim != crate::features::QUANTILE_GRID {
            return Err(Error::config(format!(
                "network input must match the {}-point quantile grid",
                crate::features::QUANTILE_GRID
            )));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the config, without the workspace path.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_value(RunConfig {
            workspace: None,
            ..self.clone()
        })
        .expect("config serialises");
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml() {
        let cfg = RunConfig::from_toml("seed = 7\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.scenario, Scenario::default());
        assert!(cfg.network.is_reference_architecture());
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let mut cfg = RunConfig::default();
        cfg.tuning.n_init = 5;
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let moved = RunConfig {
            workspace: Some("/tmp/elsewhere".into()),
            ..cfg.clone()
        };
        assert_eq!(moved.hash(), cfg.hash());
        assert_ne!(RunConfig { seed: 1, ..cfg.clone() }.hash(), cfg.hash());
    }

    #[test]
    fn partial_sections() {
        let cfg = RunConfig::from_toml(
            "seed = 1\n[scenario]\nkind = \"corridor\"\nn_intersections = 2\nduration_s = 3600.0\n[tuning]\nn_init = 3\n",
        )
        .unwrap();
        match &cfg.scenario {
            Scenario::Corridor(c) => assert_eq!((c.n_intersections, c.duration_s), (2, 3600.0)),
            s => panic!("{s:?}"),
        }
        assert_eq!((cfg.tuning.n_init, cfg.tuning.n_iter), (3, 50));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(RunConfig::from_toml("seed = 1\nbogus = 2\n"), Err(Error::Config(_))));
        assert!(RunConfig::from_toml("seed = 1\n[split]\ntest_fraction = 1.5\n").is_err());
        assert!(RunConfig::from_toml("seed = 1\n[network]\ninput_dim = 50\n").is_err());
        assert!(RunConfig::from_toml("seed = 1\n[scenario]\nkind = \"corridor\"\nn_intersections = 0\n").is_err());
    }
}
