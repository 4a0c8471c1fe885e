//! Runs every stage of the small configuration into a workspace, runs it again
//! to show caching, and writes the parity and residual data of the report as CSV.
//!
//! ```text
//! cargo run --release --example run_pipeline -- [workspace]
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use spat::pipeline::{run_pipeline, Stage};
use spat::verify::small_config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("spat-example"));
    let cfg = small_config();

    for attempt in ["first run", "second run"] {
        let summary = run_pipeline(&cfg, &root, &Stage::ALL, true)?;
        let statuses: Vec<String> = summary.stages.iter().map(|(s, st)| format!("{s}={st:?}")).collect();
        println!("{attempt}: {}", statuses.join(" "));
    }
    let report = run_pipeline(&cfg, &root, &[Stage::Report], false)?
        .report
        .expect("report stage returns the report");
    print!("{}", report.summary());

    let ev = &report.evaluation;
    let mut out = BufWriter::new(File::create(root.join("parity.csv"))?);
    writeln!(out, "model,split,target,prediction")?;
    for (model, split, points) in [
        ("cycle", "train", &ev.cycle.train_parity),
        ("cycle", "test", &ev.cycle.test_parity),
        ("red", "train", &ev.red.train_parity),
        ("red", "test", &ev.red.test_parity),
    ] {
        for p in points {
            writeln!(out, "{model},{split},{},{}", p.target, p.prediction)?;
        }
    }
    let mut hist = BufWriter::new(File::create(root.join("red_residuals.csv"))?);
    writeln!(hist, "bin_start_s,count")?;
    for (i, n) in ev.red.test_residuals.counts.iter().enumerate() {
        writeln!(hist, "{},{n}", ev.red.test_residuals.lo + i as f64 * ev.red.test_residuals.bin_width)?;
    }
    println!("artifacts, parity.csv and red_residuals.csv in {}", root.display());
    Ok(())
}
