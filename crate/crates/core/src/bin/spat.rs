use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spat::pipeline::{parse_stages, run_pipeline, RunConfig, StageStatus};
use spat::{verify, Error};

/// Estimate pre-timed signal timing from probe vehicle trajectories.
#[derive(Parser)]
#[command(version, subcommand_negates_reqs = true)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, required = true)]
    config: Option<PathBuf>,
    /// Comma-separated stages to run, or `all`.
    #[arg(long, default_value = "all")]
    stages: String,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for artifacts; defaults to the config's `workspace`, then `./workspace`.
    #[arg(long, env = "SPAT_WORKSPACE")]
    workspace: Option<PathBuf>,
    /// Replace artifacts produced by a different configuration.
    #[arg(long)]
    overwrite: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the acceptance checks and print a pass/fail table.
    Verify,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_VERIFY: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::StaleArtifact { .. } => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    if let Some(Command::Verify) = cli.command {
        let results = verify::run_all(&verify::reference_config());
        print!("{}", verify::format_table(&results));
        let ok = results.iter().all(|r| r.passed);
        return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VERIFY) });
    }
    let path = cli.config.expect("clap enforces --config");
    let mut cfg = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let workspace = cli
        .workspace
        .or_else(|| cfg.workspace.clone())
        .unwrap_or_else(|| PathBuf::from("workspace"));
    let stages = parse_stages(&cli.stages)?;
    let summary = run_pipeline(&cfg, &workspace, &stages, cli.overwrite)?;
    for (stage, status) in &summary.stages {
        let s = match status {
            StageStatus::Ran => "done",
            StageStatus::Cached => "cached",
        };
        println!("{stage:<9} {s}");
    }
    if let Some(report) = &summary.report {
        println!();
        print!("{}", report.summary());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
