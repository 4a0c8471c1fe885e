//! Turns an hour of acceleration start times into periodicity features and
//! reads the cycle length off the strongest frequency.
//!
//! ```text
//! cargo run --release --example cycle_features
//! ```

use rand::Rng;
use spat::features::{kde_density, top_fourier_frequencies, KDE_BANDWIDTH_S, WINDOW_GRID_LEN};
use spat::rng::rng_from;

fn main() -> spat::Result<()> {
    let mut rng = rng_from(17);
    for cycle in [60.0, 90.0, 120.0] {
        // Queue discharges start shortly after each green onset, and not every cycle has a probe.
        let mut starts = Vec::new();
        let mut onset = rng.gen_range(0.0..cycle);
        while onset < 3600.0 {
            if rng.gen_bool(0.6) {
                starts.push(onset + rng.gen_range(0.0..4.0));
            }
            onset += cycle;
        }
        let first = starts[0];
        let rel: Vec<f64> = starts.iter().map(|s| s - first).collect();
        let density = kde_density(&rel, KDE_BANDWIDTH_S, WINDOW_GRID_LEN)?;
        let freqs = top_fourier_frequencies(&density, 3)?;
        let mass: f64 = density.iter().sum();
        println!(
            "true cycle {cycle:>5.1} s, {} starts, KDE mass {mass:.4}, top frequencies {:?} Hz -> {:.1} s",
            starts.len(),
            freqs.iter().map(|f| format!("{f:.5}")).collect::<Vec<_>>(),
            1.0 / freqs[0]
        );
    }
    Ok(())
}
