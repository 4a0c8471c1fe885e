//! The stage functions and the workspace-backed runner.
//!
//! Each stage is a pure function of the config and earlier results. The runner
//! wraps them: it loads inputs from the workspace, skips stages whose outputs
//! already carry the current config hash, and writes outputs atomically.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::io::{
    artifact_header, load_artifact, read_trajectories, read_trajectory_meta, save_artifact, write_atomic,
    write_trajectories, TrajectoryFileMeta, FORMAT_VERSION,
};
use super::models::{CycleModel, RedModel};
use super::report::{
    above_cutoff, green_rows, training_set, CycleLookup, DatasetSizes, Evaluation, GreenReport, ModelReport,
    Provenance, Report,
};
use crate::features::{
    bin_accel_starts, build_cycle_dataset, build_red_dataset, group_stop_durations, CycleSample, RedSample,
};
use crate::model::{StopEvent, TodBoundaries, Trajectory};
use crate::rng::derive_seed;
use crate::sim::{simulate_probes, GroundTruth};
use crate::trips::{process_trajectories, FilterStats};
use crate::tuning::{multistage_tune, train_test_split, CycleTrainingSet, TuneOutcome};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Simulate,
    Extract,
    Features,
    Split,
    Tune,
    Train,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Simulate,
        Stage::Extract,
        Stage::Features,
        Stage::Split,
        Stage::Tune,
        Stage::Train,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Extract => "extract",
            Stage::Features => "features",
            Stage::Split => "split",
            Stage::Tune => "tune",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }

    /// Files the stage writes, relative to the workspace.
    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Simulate => &[files::TRAJECTORIES, files::GROUND_TRUTH],
            Stage::Extract => &[files::EVENTS],
            Stage::Features => &[files::CYCLE_DATASET, files::RED_DATASET],
            Stage::Split => &[
                files::CYCLE_TRAIN,
                files::CYCLE_TEST,
                files::RED_TRAIN,
                files::RED_VALIDATION,
                files::RED_TEST,
            ],
            Stage::Tune => &[files::TUNING],
            Stage::Train => &[files::CYCLE_MODEL, files::RED_MODEL],
            Stage::Evaluate => &[files::EVALUATION],
            Stage::Report => &[files::REPORT],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| Error::config(format!("unknown stage `{s}`")))
    }
}

/// Parses a comma-separated stage list (or `all`) into pipeline order.
pub fn parse_stages(list: &str) -> Result<Vec<Stage>> {
    if list.trim() == "all" {
        return Ok(Stage::ALL.to_vec());
    }
    let mut stages = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Stage::from_str)
        .collect::<Result<Vec<_>>>()?;
    if stages.is_empty() {
        return Err(Error::config("empty stage list"));
    }
    stages.sort();
    stages.dedup();
    Ok(stages)
}

/// Workspace file names.
pub mod files {
    pub const TRAJECTORIES: &str = "trajectories.csv";
    pub const GROUND_TRUTH: &str = "ground_truth.json";
    pub const EVENTS: &str = "events.json";
    pub const CYCLE_DATASET: &str = "cycle_dataset.json";
    pub const RED_DATASET: &str = "red_dataset.json";
    pub const CYCLE_TRAIN: &str = "cycle_train.json";
    pub const CYCLE_TEST: &str = "cycle_test.json";
    pub const RED_TRAIN: &str = "red_train.json";
    pub const RED_VALIDATION: &str = "red_validation.json";
    pub const RED_TEST: &str = "red_test.json";
    pub const TUNING: &str = "tuning.json";
    pub const CYCLE_MODEL: &str = "cycle_model.json";
    pub const RED_MODEL: &str = "red_model.json";
    pub const EVALUATION: &str = "evaluation.json";
    pub const REPORT: &str = "report.json";
    /// Markdown rendering of the report; not checked for caching.
    pub const SUMMARY: &str = "report.md";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extracted {
    pub events: Vec<StopEvent>,
    pub stats: FilterStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Datasets {
    pub cycle: Vec<CycleSample>,
    pub red: Vec<RedSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub cycle_train: Vec<CycleSample>,
    pub cycle_test: Vec<CycleSample>,
    pub red_train: Vec<RedSample>,
    pub red_validation: Vec<RedSample>,
    pub red_test: Vec<RedSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub cycle: CycleModel,
    pub red: RedModel,
}

pub fn simulate(cfg: &RunConfig) -> Result<(Vec<Trajectory>, GroundTruth)> {
    let out = simulate_probes(&cfg.sim_config()?)?;
    Ok((out.trajectories, out.ground_truth))
}

pub fn extract(cfg: &RunConfig, trajectories: &[Trajectory]) -> Result<Extracted> {
    let geoms = cfg.sim_config()?.geometries();
    let (events, stats) = process_trajectories(trajectories, &geoms, &cfg.trips);
    Ok(Extracted { events, stats })
}

pub fn build_features(cfg: &RunConfig, events: &[StopEvent], truth: &GroundTruth) -> Result<Datasets> {
    let f = &cfg.features;
    let bins = bin_accel_starts(events, truth)?;
    let cycle = build_cycle_dataset(&bins, f.n_fourier_max, 0, f.kde_bandwidth_s)?;
    let red = build_red_dataset(
        &group_stop_durations(events),
        truth,
        f.resample,
        derive_seed(cfg.seed, "resample"),
    )?;
    Ok(Datasets { cycle, red })
}

fn pick<T: Clone>(rows: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| rows[i].clone()).collect()
}

pub fn split(cfg: &RunConfig, data: &Datasets) -> Result<Splits> {
    let s = &cfg.split;
    let (ctrain, ctest) = train_test_split(data.cycle.len(), s.test_fraction, derive_seed(cfg.seed, "split/cycle"))?;
    let (rtrain, rtest) = train_test_split(data.red.len(), s.test_fraction, derive_seed(cfg.seed, "split/red"))?;
    let red_train_all = pick(&data.red, &rtrain);
    let (fit, val) = train_test_split(
        red_train_all.len(),
        s.validation_fraction,
        derive_seed(cfg.seed, "split/red-val"),
    )?;
    Ok(Splits {
        cycle_train: pick(&data.cycle, &ctrain),
        cycle_test: pick(&data.cycle, &ctest),
        red_train: pick(&red_train_all, &fit),
        red_validation: pick(&red_train_all, &val),
        red_test: pick(&data.red, &rtest),
    })
}

/// Tunes the cycle model. Only training windows are passed in.
pub fn tune(cfg: &RunConfig, cycle_train: &[CycleSample]) -> Result<TuneOutcome> {
    multistage_tune(&CycleTrainingSet::from_samples(cycle_train)?, &cfg.tune_config())
}

pub fn train(
    cfg: &RunConfig,
    cycle_train: &[CycleSample],
    red_train: &[RedSample],
    red_validation: &[RedSample],
    tuning: &TuneOutcome,
) -> Result<Models> {
    let cycle = CycleModel::fit(&CycleTrainingSet::from_samples(cycle_train)?, &tuning.params)?;
    let red = RedModel::fit(red_train, red_validation, &cfg.network_config())?;
    Ok(Models { cycle, red })
}

/// Metrics and plot data on both splits. Cycle metrics cover the windows with
/// more than the selected minimum number of starts.
pub fn evaluate(splits: &Splits, models: &Models) -> Result<Evaluation> {
    let c = models.cycle.params.min_starts;
    let train_rows = above_cutoff(&splits.cycle_train, c);
    let test_rows = above_cutoff(&splits.cycle_test, c);
    let train_set = training_set(&train_rows)?;
    let test_set = training_set(&test_rows)?;
    let ctrain_pred = models.cycle.predict(&train_set)?;
    let ctest_pred = models.cycle.predict(&test_set)?;
    let cycle = ModelReport::new(&ctrain_pred, &train_set.targets, &ctest_pred, &test_set.targets)?;

    let rtrain_pred = models.red.predict(&splits.red_train)?;
    let rtest_pred = models.red.predict(&splits.red_test)?;
    let targets = |s: &[RedSample]| s.iter().map(|r| r.target_red_s).collect::<Vec<_>>();
    let red = ModelReport::new(
        &rtrain_pred,
        &targets(&splits.red_train),
        &rtest_pred,
        &targets(&splits.red_test),
    )?;

    let windows: Vec<&CycleSample> = train_rows.iter().chain(&test_rows).copied().collect();
    let preds: Vec<f64> = ctrain_pred.iter().chain(&ctest_pred).copied().collect();
    let lookup = CycleLookup::new(&windows, &preds, &TodBoundaries::default());
    let green = GreenReport::new(green_rows(&splits.red_test, &rtest_pred, &lookup)?)?;
    Ok(Evaluation { cycle, red, green })
}

pub fn report(
    cfg: &RunConfig,
    extracted: &Extracted,
    splits: &Splits,
    tuning: &TuneOutcome,
    evaluation: Evaluation,
) -> Report {
    Report {
        provenance: Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            format_version: FORMAT_VERSION,
        },
        filter_stats: extracted.stats.clone(),
        sizes: DatasetSizes {
            stop_events: extracted.events.len(),
            cycle_windows: splits.cycle_train.len() + splits.cycle_test.len(),
            cycle_train: evaluation.cycle.train.n_points,
            cycle_test: evaluation.cycle.test.n_points,
            red_samples: splits.red_train.len() + splits.red_validation.len() + splits.red_test.len(),
            red_train: splits.red_train.len(),
            red_validation: splits.red_validation.len(),
            red_test: splits.red_test.len(),
        },
        cutoff: tuning.cutoff,
        cycle_params: tuning.params.clone(),
        evaluation,
    }
}

/// Every stage in memory, without touching the disk.
pub fn run_in_memory(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let (trajectories, truth) = simulate(cfg)?;
    let extracted = extract(cfg, &trajectories)?;
    drop(trajectories);
    let data = build_features(cfg, &extracted.events, &truth)?;
    let splits = split(cfg, &data)?;
    let tuning = tune(cfg, &splits.cycle_train)?;
    let models = train(cfg, &splits.cycle_train, &splits.red_train, &splits.red_validation, &tuning)?;
    let evaluation = evaluate(&splits, &models)?;
    Ok(report(cfg, &extracted, &splits, &tuning, evaluation))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    Cached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub stages: Vec<(Stage, StageStatus)>,
    /// The report, when the report stage was requested.
    pub report: Option<Report>,
}

mod kinds {
    pub const GROUND_TRUTH: &str = "ground_truth";
    pub const EVENTS: &str = "stop_events";
    pub const CYCLE_DATASET: &str = "cycle_dataset";
    pub const RED_DATASET: &str = "red_dataset";
    pub const CYCLE_SPLIT: &str = "cycle_split";
    pub const RED_SPLIT: &str = "red_split";
    pub const TUNING: &str = "tuning";
    pub const CYCLE_MODEL: &str = "cycle_model";
    pub const RED_MODEL: &str = "red_model";
    pub const EVALUATION: &str = "evaluation";
    pub const REPORT: &str = "report";
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    root: PathBuf,
    hash: String,
    overwrite: bool,
}

impl Runner<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn load<T: serde::de::DeserializeOwned>(&self, name: &str, kind: &str) -> Result<T> {
        load_artifact(&self.path(name), kind, Some(&self.hash))
    }

    fn save<T: Serialize>(&self, name: &str, kind: &str, data: &T) -> Result<()> {
        save_artifact(&self.path(name), kind, &self.hash, data)
    }

    fn output_hash(&self, name: &str) -> Result<Option<String>> {
        let path = self.path(name);
        if !path.exists() {
            return Ok(None);
        }
        let hash = if name.ends_with(".csv") {
            read_trajectory_meta(&path).map(|m| m.config_hash)
        } else {
            artifact_header(&path).map(|(_, h)| h)
        };
        match hash {
            Ok(h) => Ok(Some(h)),
            Err(_) if self.overwrite => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// True when every output exists with the current hash. Outputs from another
    /// config are an error unless overwriting.
    fn is_cached(&self, stage: Stage) -> Result<bool> {
        let mut all = true;
        for name in stage.outputs() {
            match self.output_hash(name)? {
                Some(h) if h == self.hash => {}
                Some(h) if !self.overwrite => {
                    return Err(Error::StaleArtifact {
                        path: self.path(name),
                        found: h,
                        expected: self.hash.clone(),
                    })
                }
                _ => all = false,
            }
        }
        Ok(all)
    }

    fn trajectories(&self) -> Result<Vec<Trajectory>> {
        let path = self.path(files::TRAJECTORIES);
        let (meta, trajs) = read_trajectories(&path)?;
        if meta.config_hash != self.hash {
            return Err(Error::StaleArtifact {
                path,
                found: meta.config_hash,
                expected: self.hash.clone(),
            });
        }
        Ok(trajs)
    }

    fn splits(&self) -> Result<Splits> {
        Ok(Splits {
            cycle_train: self.load(files::CYCLE_TRAIN, kinds::CYCLE_SPLIT)?,
            cycle_test: self.load(files::CYCLE_TEST, kinds::CYCLE_SPLIT)?,
            red_train: self.load(files::RED_TRAIN, kinds::RED_SPLIT)?,
            red_validation: self.load(files::RED_VALIDATION, kinds::RED_SPLIT)?,
            red_test: self.load(files::RED_TEST, kinds::RED_SPLIT)?,
        })
    }

    fn models(&self) -> Result<Models> {
        Ok(Models {
            cycle: self.load(files::CYCLE_MODEL, kinds::CYCLE_MODEL)?,
            red: self.load(files::RED_MODEL, kinds::RED_MODEL)?,
        })
    }

    fn run(&self, stage: Stage) -> Result<()> {
        let cfg = self.cfg;
        match stage {
            Stage::Simulate => {
                let (trajs, truth) = simulate(cfg)?;
                let meta = TrajectoryFileMeta {
                    format_version: FORMAT_VERSION,
                    seed: cfg.seed,
                    config_hash: self.hash.clone(),
                };
                write_trajectories(&self.path(files::TRAJECTORIES), &trajs, &meta)?;
                self.save(files::GROUND_TRUTH, kinds::GROUND_TRUTH, &truth)?;
            }
            Stage::Extract => {
                let extracted = extract(cfg, &self.trajectories()?)?;
                self.save(files::EVENTS, kinds::EVENTS, &extracted)?;
            }
            Stage::Features => {
                let extracted: Extracted = self.load(files::EVENTS, kinds::EVENTS)?;
                let truth: GroundTruth = self.load(files::GROUND_TRUTH, kinds::GROUND_TRUTH)?;
                let data = build_features(cfg, &extracted.events, &truth)?;
                self.save(files::CYCLE_DATASET, kinds::CYCLE_DATASET, &data.cycle)?;
                self.save(files::RED_DATASET, kinds::RED_DATASET, &data.red)?;
            }
            Stage::Split => {
                let data = Datasets {
                    cycle: self.load(files::CYCLE_DATASET, kinds::CYCLE_DATASET)?,
                    red: self.load(files::RED_DATASET, kinds::RED_DATASET)?,
                };
                let s = split(cfg, &data)?;
                self.save(files::CYCLE_TRAIN, kinds::CYCLE_SPLIT, &s.cycle_train)?;
                self.save(files::CYCLE_TEST, kinds::CYCLE_SPLIT, &s.cycle_test)?;
                self.save(files::RED_TRAIN, kinds::RED_SPLIT, &s.red_train)?;
                self.save(files::RED_VALIDATION, kinds::RED_SPLIT, &s.red_validation)?;
                self.save(files::RED_TEST, kinds::RED_SPLIT, &s.red_test)?;
            }
            Stage::Tune => {
                let train: Vec<CycleSample> = self.load(files::CYCLE_TRAIN, kinds::CYCLE_SPLIT)?;
                self.save(files::TUNING, kinds::TUNING, &tune(cfg, &train)?)?;
            }
            Stage::Train => {
                let cycle_train: Vec<CycleSample> = self.load(files::CYCLE_TRAIN, kinds::CYCLE_SPLIT)?;
                let red_train: Vec<RedSample> = self.load(files::RED_TRAIN, kinds::RED_SPLIT)?;
                let red_val: Vec<RedSample> = self.load(files::RED_VALIDATION, kinds::RED_SPLIT)?;
                let tuning: TuneOutcome = self.load(files::TUNING, kinds::TUNING)?;
                let models = train(cfg, &cycle_train, &red_train, &red_val, &tuning)?;
                self.save(files::CYCLE_MODEL, kinds::CYCLE_MODEL, &models.cycle)?;
                self.save(files::RED_MODEL, kinds::RED_MODEL, &models.red)?;
            }
            Stage::Evaluate => {
                let evaluation = evaluate(&self.splits()?, &self.models()?)?;
                self.save(files::EVALUATION, kinds::EVALUATION, &evaluation)?;
            }
            Stage::Report => {
                let extracted: Extracted = self.load(files::EVENTS, kinds::EVENTS)?;
                let tuning: TuneOutcome = self.load(files::TUNING, kinds::TUNING)?;
                let evaluation: Evaluation = self.load(files::EVALUATION, kinds::EVALUATION)?;
                let report = report(cfg, &extracted, &self.splits()?, &tuning, evaluation);
                self.save(files::REPORT, kinds::REPORT, &report)?;
                let summary = report.summary();
                write_atomic(&self.path(files::SUMMARY), |w| Ok(w.write_all(summary.as_bytes())?))?;
            }
        }
        Ok(())
    }
}

/// Runs `stages` in pipeline order against the workspace at `root`.
pub fn run_pipeline(cfg: &RunConfig, root: &Path, stages: &[Stage], overwrite: bool) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(root)?;
    let runner = Runner {
        cfg,
        root: root.to_path_buf(),
        hash: cfg.hash(),
        overwrite,
    };
    let mut ordered = stages.to_vec();
    ordered.sort();
    ordered.dedup();
    let mut statuses = Vec::with_capacity(ordered.len());
    for &stage in &ordered {
        let status = if runner.is_cached(stage)? {
            log::info!("{stage}: cached");
            StageStatus::Cached
        } else {
            let t0 = Instant::now();
            runner.run(stage)?;
            log::info!("{stage}: done in {:.1?}", t0.elapsed());
            StageStatus::Ran
        };
        statuses.push((stage, status));
    }
    let report = if ordered.contains(&Stage::Report) {
        Some(runner.load(files::REPORT, kinds::REPORT)?)
    } else {
        None
    };
    Ok(RunSummary {
        stages: statuses,
        report,
    })
}
