//! Simulates a short corridor and prints the ground-truth plans alongside a
//! summary of the probe trajectories.
//!
//! ```text
//! cargo run --release --example simulate_corridor
//! ```

use spat::sim::{simulate_probes, CorridorSpec};

fn main() -> spat::Result<()> {
    let spec = CorridorSpec {
        n_intersections: 3,
        duration_s: 2.0 * 3600.0,
        ..CorridorSpec::default()
    };
    let config = spec.build()?;
    let out = simulate_probes(&config)?;

    for plan in &out.ground_truth.plans {
        let reds: Vec<String> = plan
            .phases
            .iter()
            .map(|p| format!("{:?} {:.0}s", p.direction, p.red_s))
            .collect();
        println!(
            "{}: cycle {:.0} s, offset {:.0} s, red {}",
            plan.intersection_id,
            plan.cycle_s,
            plan.plan_offset_s,
            reds.join(", ")
        );
    }

    let points: usize = out.trajectories.iter().map(|t| t.points.len()).sum();
    println!(
        "{} probe trajectories, {} points at 1 Hz, {} queue records",
        out.trajectories.len(),
        points,
        out.queue_log.len()
    );
    if let Some(t) = out.trajectories.first() {
        let (a, b) = (t.points.first().unwrap(), t.points.last().unwrap());
        println!(
            "first probe {}: t {:.0}..{:.0} s, ({:.0}, {:.0}) -> ({:.0}, {:.0})",
            t.vehicle_id, a.t, b.t, a.x, a.y, b.x, b.y
        );
    }
    Ok(())
}
