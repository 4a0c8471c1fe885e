//! Picks the minimum number of acceleration starts a window needs before its
//! cycle prediction is trusted.
//!
//! ```text
//! cargo run --release --example cutoff
//! ```

use rand::Rng;
use spat::rng::rng_from;
use spat::tuning::cutoff::accurate_fraction;
use spat::tuning::{select_min_starts_cutoff, CutoffRule};

fn main() -> spat::Result<()> {
    // Out-of-fold errors shrink as windows get denser.
    let mut rng = rng_from(5);
    let errors: Vec<(usize, f64)> = (0..600)
        .map(|_| {
            let n = rng.gen_range(2..80);
            let spread = 12.0 / (n as f64).sqrt();
            (n, rng.gen_range(-spread..spread))
        })
        .collect();

    let rule = CutoffRule::default();
    for c in [2, 10, 20, 30, 40] {
        if let Some(f) = accurate_fraction(&errors, c, rule.tolerance_s) {
            println!("n_starts > {c:>2}: {:.1}% within {} s", 100.0 * f, rule.tolerance_s);
        }
    }
    let cutoff = select_min_starts_cutoff(&errors, &rule)?;
    println!(
        "chosen c = {} (threshold {:.0}%, satisfied {}, fraction {:?})",
        cutoff.c,
        100.0 * rule.threshold,
        cutoff.satisfied,
        cutoff.fraction
    );
    Ok(())
}
