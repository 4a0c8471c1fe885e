//! Runs the two-pass tuning procedure on simulated cycle windows: a first
//! Bayesian search, the minimum-starts cutoff, then a search on dense windows.
//!
//! ```text
//! cargo run --release --example multistage_tune
//! ```

use spat::pipeline::stages;
use spat::tuning::CycleTrainingSet;
use spat::verify::small_config;

fn main() -> spat::Result<()> {
    let cfg = small_config();
    let (trajs, truth) = stages::simulate(&cfg)?;
    let extracted = stages::extract(&cfg, &trajs)?;
    let data = stages::build_features(&cfg, &extracted.events, &truth)?;
    let splits = stages::split(&cfg, &data)?;
    println!("{} training windows", splits.cycle_train.len());

    let outcome = stages::tune(&cfg, &splits.cycle_train)?;
    println!(
        "first pass best CV score {:.3} over {} evaluations",
        outcome.first_pass.best_score,
        outcome.first_pass.history.len()
    );
    println!("cutoff {:?}", outcome.cutoff);
    println!(
        "second pass best CV score {:.3}; {} windows above the cutoff",
        outcome.second_pass.best_score,
        CycleTrainingSet::from_samples(&splits.cycle_train)?.above(outcome.cutoff.c).len()
    );
    println!("{:#?}", outcome.params);
    Ok(())
}
