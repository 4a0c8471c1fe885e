//! Runs the acceptance checks that finish in seconds and prints the same
//! table as `spat verify`. The end-to-end checks are left to that command.
//!
//! ```text
//! cargo run --release --example verify_checks
//! ```

use spat::verify;

fn main() {
    let results = vec![
        verify::check_cutoff(),
        verify::check_quantile(),
        verify::check_fft(),
        verify::check_kde(),
        verify::check_gradients(),
        verify::check_gbdt(),
        verify::check_bo(),
    ];
    print!("{}", verify::format_table(&results));
    if results.iter().any(|r| !r.passed) {
        std::process::exit(1);
    }
}
