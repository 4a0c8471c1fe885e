//! Clips simulated probe trajectories around each intersection, applies the
//! trip filters and extracts stop events.
//!
//! ```text
//! cargo run --release --example extract_stops
//! ```

use spat::sim::{simulate_probes, CorridorSpec};
use spat::trips::{process_trajectories, TripConfig};

fn main() -> spat::Result<()> {
    let config = CorridorSpec {
        n_intersections: 2,
        duration_s: 3.0 * 3600.0,
        ..CorridorSpec::default()
    }
    .build()?;
    let out = simulate_probes(&config)?;
    let (events, stats) = process_trajectories(&out.trajectories, &config.geometries(), &TripConfig::default());

    println!("{stats:#?}");
    println!("{} stop events", events.len());
    for e in events.iter().take(8) {
        println!(
            "{:>8} at {} heading {:?}: stopped {:.0} s from t = {:.0}, moving again at {:.0}",
            e.vehicle_id, e.intersection_id, e.direction, e.stop_duration_s, e.stop_start_s, e.accel_start_s
        );
    }
    Ok(())
}
