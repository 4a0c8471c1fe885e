//! Maximises a two-dimensional test function with the Gaussian-process
//! optimiser and shows the evaluation trace.
//!
//! ```text
//! cargo run --release --example bayes_opt
//! ```

use spat::tuning::{bayes_optimize, BoConfig, Dim, SearchSpace};

fn main() -> spat::Result<()> {
    let space = SearchSpace::new(vec![Dim::linear("x", -2.0, 2.0), Dim::log("rate", 1e-4, 1.0)])?;
    let objective = |a: &spat::tuning::Assignment| {
        let (x, r) = (a["x"], a["rate"].log10());
        -(x - 0.7).powi(2) - 0.5 * (r + 2.0).powi(2) + 0.1 * (5.0 * x).cos()
    };
    let cfg = BoConfig {
        n_init: 5,
        n_iter: 20,
        seed: 9,
        ..BoConfig::default()
    };
    let result = bayes_optimize(objective, &space, &cfg)?;
    for (i, e) in result.history.iter().enumerate() {
        let phase = if i < cfg.n_init { "init" } else { "EI" };
        println!("{i:>2} {phase:<4} x {:+.3} rate {:.2e} -> {:.4}", e.params["x"], e.params["rate"], e.score);
    }
    println!(
        "best x {:+.3}, rate {:.2e}, score {:.4}",
        result.best["x"], result.best["rate"], result.best_score
    );
    Ok(())
}
