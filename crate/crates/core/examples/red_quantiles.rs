//! Summarises a bin of stop durations by its empirical quantile vector, the
//! input of the red-time network.
//!
//! ```text
//! cargo run --release --example red_quantiles
//! ```

use rand::Rng;
use spat::features::{empirical_quantile, quantile_vector};
use spat::rng::rng_from;

fn main() -> spat::Result<()> {
    let red = 42.0;
    let mut rng = rng_from(3);
    // Arrivals spread uniformly over the red interval wait for the rest of it.
    let stops: Vec<f64> = (0..50).map(|_| red - rng.gen_range(0.0..red)).collect();

    let q = quantile_vector(&stops)?;
    println!("{} quantiles from {} stops", q.len(), stops.len());
    for (i, v) in q.iter().enumerate().filter(|(i, _)| (i + 1) % 10 == 0) {
        println!("  Q{:.2} = {v:6.2} s", (i + 1) as f64 / 100.0);
    }
    println!("median {:.2} s, longest stop {:.2} s, true red {red} s", empirical_quantile(&stops, 0.5)?, empirical_quantile(&stops, 1.0)?);
    Ok(())
}
