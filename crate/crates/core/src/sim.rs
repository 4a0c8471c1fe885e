//! Deterministic corridor simulator for pre-timed signals.
//!
//! Intersections sit on an east-west arterial (`y = 0`, increasing `x`), each
//! with a north-south cross street. Every approach is a single lane served as a
//! FIFO point queue: a vehicle that meets red, or finds vehicles still waiting,
//! decelerates to the back of the queue, waits, and starts when the signal is
//! green and the vehicle ahead started at least one saturation headway earlier.
//! Motion is piecewise constant-acceleration and is sampled on the global 1 Hz
//! clock.
//!
//! Arterial vehicles enter mid-block upstream of any intersection and leave
//! mid-block after traversing a geometric number of intersections; cross-street
//! vehicles traverse a single intersection.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::model::{
    Direction, IntersectionGeometry, Movement, Phase, PhaseKey, SignalPlan, TracePoint, Trajectory,
};
use crate::rng::{derive_seed, derived_rng, keyed_uniform};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionSpec {
    pub geometry: IntersectionGeometry,
    pub plan: SignalPlan,
    /// Distance from the previous intersection's center. Unused for the first one.
    pub spacing_m: f64,
}

/// Arrival rate of one approach, constant (`vph.len() == 1`) or per hour of day (24 values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachDemand {
    pub intersection_id: String,
    pub direction: Direction,
    pub vph: Vec<f64>,
}

impl ApproachDemand {
    fn rate_at(&self, t: f64) -> f64 {
        let h = (t / 3600.0).floor().max(0.0) as usize;
        self.vph[h % self.vph.len()] / 3600.0
    }

    fn max_rate(&self) -> f64 {
        self.vph.iter().copied().fold(0.0, f64::max) / 3600.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub intersections: Vec<IntersectionSpec>,
    pub demand: Vec<ApproachDemand>,
    pub duration_s: f64,
    #[serde(default = "defaults::cruise")]
    pub cruise_speed_mps: f64,
    #[serde(default = "defaults::accel")]
    pub max_accel_mps2: f64,
    #[serde(default = "defaults::decel")]
    pub max_decel_mps2: f64,
    #[serde(default = "defaults::headway")]
    pub saturation_headway_s: f64,
    #[serde(default = "defaults::setback")]
    pub stopline_setback_m: f64,
    /// Bumper-to-bumper spacing of stopped vehicles.
    #[serde(default = "defaults::jam")]
    pub jam_spacing_m: f64,
    /// Lateral offset of each travel lane from the road centerline.
    #[serde(default = "defaults::lane_offset")]
    pub lane_offset_m: f64,
    /// Length of each cross-street leg.
    #[serde(default = "defaults::cross_leg")]
    pub cross_street_length_m: f64,
    /// Length of the arterial links beyond the first and last intersections.
    #[serde(default = "defaults::end_link")]
    pub end_link_m: f64,
    /// Probability that an arterial vehicle continues to the next intersection.
    #[serde(default = "defaults::continue_prob")]
    pub arterial_continue_prob: f64,
    pub probe_penetration: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

mod defaults {
    pub fn cruise() -> f64 {
        13.4
    }
    pub fn accel() -> f64 {
        2.0
    }
    pub fn decel() -> f64 {
        3.0
    }
    pub fn headway() -> f64 {
        2.0
    }
    pub fn setback() -> f64 {
        3.0
    }
    pub fn jam() -> f64 {
        7.0
    }
    pub fn lane_offset() -> f64 {
        1.8
    }
    pub fn cross_leg() -> f64 {
        200.0
    }
    pub fn end_link() -> f64 {
        400.0
    }
    pub fn continue_prob() -> f64 {
        0.5
    }
}

impl SimConfig {
    /// Config with default kinematics and no demand.
    pub fn new(intersections: Vec<IntersectionSpec>, duration_s: f64, rng_seed: u64) -> Self {
        Self {
            intersections,
            demand: Vec::new(),
            duration_s,
            cruise_speed_mps: defaults::cruise(),
            max_accel_mps2: defaults::accel(),
            max_decel_mps2: defaults::decel(),
            saturation_headway_s: defaults::headway(),
            stopline_setback_m: defaults::setback(),
            jam_spacing_m: defaults::jam(),
            lane_offset_m: defaults::lane_offset(),
            cross_street_length_m: defaults::cross_leg(),
            end_link_m: defaults::end_link(),
            arterial_continue_prob: defaults::continue_prob(),
            probe_penetration: 1.0,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::config("duration_s must be positive"));
        }
        if !(self.probe_penetration > 0.0 && self.probe_penetration <= 1.0) {
            return Err(Error::config("probe_penetration must be in (0, 1]"));
        }
        let positive = [
            ("cruise_speed_mps", self.cruise_speed_mps),
            ("max_accel_mps2", self.max_accel_mps2),
            ("max_decel_mps2", self.max_decel_mps2),
            ("saturation_headway_s", self.saturation_headway_s),
            ("stopline_setback_m", self.stopline_setback_m),
            ("jam_spacing_m", self.jam_spacing_m),
            ("cross_street_length_m", self.cross_street_length_m),
            ("end_link_m", self.end_link_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.arterial_continue_prob) {
            return Err(Error::config("arterial_continue_prob must be in [0, 1]"));
        }
        if self.intersections.is_empty() {
            return Err(Error::config("at least one intersection is required"));
        }
        for (i, spec) in self.intersections.iter().enumerate() {
            spec.geometry.validate()?;
            spec.plan.validate()?;
            if spec.plan.intersection_id != spec.geometry.intersection_id {
                return Err(Error::config(format!(
                    "plan id {} does not match geometry id {}",
                    spec.plan.intersection_id, spec.geometry.intersection_id
                )));
            }
            if spec.geometry.center.1 != 0.0 {
                return Err(Error::config(format!(
                    "intersection {} must lie on the arterial (y = 0)",
                    spec.geometry.intersection_id
                )));
            }
            for d in Direction::ALL {
                if spec.plan.resolve_phase(PhaseKey::new(d, Movement::Through)).is_none() {
                    return Err(Error::config(format!(
                        "plan {} has no phase for direction {d}",
                        spec.plan.intersection_id
                    )));
                }
            }
            if i > 0 {
                let prev = &self.intersections[i - 1].geometry;
                let dx = spec.geometry.center.0 - prev.center.0;
                if (dx - spec.spacing_m).abs() > 1e-6 || !(dx > 0.0) {
                    return Err(Error::config(format!(
                        "intersection {}: spacing_m {} does not match center distance {dx}",
                        spec.geometry.intersection_id, spec.spacing_m
                    )));
                }
            }
        }
        for d in &self.demand {
            if d.vph.is_empty() || d.vph.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::config(format!(
                    "demand for {} {} must be non-empty and non-negative",
                    d.intersection_id, d.direction
                )));
            }
            if self.index_of(&d.intersection_id).is_none() {
                return Err(Error::config(format!(
                    "demand references unknown intersection {}",
                    d.intersection_id
                )));
            }
        }
        Ok(())
    }

    fn index_of(&self, id: &str) -> Option<usize> {
        self.intersections
            .iter()
            .position(|s| s.geometry.intersection_id == id)
    }

    pub fn geometries(&self) -> Vec<IntersectionGeometry> {
        self.intersections.iter().map(|s| s.geometry.clone()).collect()
    }

    /// Seed of the probe-selection stream.
    pub fn probe_seed(&self) -> u64 {
        derive_seed(self.rng_seed, "probes")
    }

    /// Length of the arterial link upstream of intersection `i` for travel direction `dir`.
    fn upstream_link(&self, i: usize, dir: Direction) -> f64 {
        let n = self.intersections.len();
        match dir {
            Direction::E if i > 0 => self.intersections[i].spacing_m,
            Direction::W if i + 1 < n => self.intersections[i + 1].spacing_m,
            _ => self.end_link_m,
        }
    }

    fn downstream_link(&self, i: usize, dir: Direction) -> f64 {
        let opposite = match dir {
            Direction::E => Direction::W,
            _ => Direction::E,
        };
        self.upstream_link(i, opposite)
    }
}

/// Per-(intersection, phase, hour) targets for a run. Plans are pre-timed, so the
/// targets of a phase are the same in every covered hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub plans: Vec<SignalPlan>,
    /// Hours `0..n_hours` (counted from the simulation start) are covered.
    pub n_hours: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub cycle_s: f64,
    pub red_s: f64,
}

impl GroundTruth {
    pub fn plan(&self, intersection_id: &str) -> Option<&SignalPlan> {
        self.plans.iter().find(|p| p.intersection_id == intersection_id)
    }

    pub fn target(&self, intersection_id: &str, key: PhaseKey, hour: u32) -> Option<Target> {
        if hour >= self.n_hours {
            return None;
        }
        let plan = self.plan(intersection_id)?;
        let phase = plan.resolve_phase(key)?;
        Some(Target {
            cycle_s: plan.cycle_s,
            red_s: phase.red_s,
        })
    }
}

/// A vehicle recorded as joining a queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueRecord {
    pub vehicle_id: String,
    pub intersection_id: String,
    pub direction: Direction,
    /// 0 for the vehicle at the stop line.
    pub queue_position: usize,
    /// Instant the vehicle came to rest.
    pub stop_time_s: f64,
    /// Instant the vehicle started accelerating.
    pub go_time_s: f64,
    /// Green onset of the interval in which the vehicle started.
    pub green_onset_s: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trajectories: Vec<Trajectory>,
    pub ground_truth: GroundTruth,
    pub queue_log: Vec<QueueRecord>,
}

#[derive(Debug, Clone, Copy)]
struct Stop {
    decel_start_t: f64,
    decel_start_p: f64,
    stop_t: f64,
    stop_p: f64,
    go_t: f64,
}

#[derive(Debug, Clone)]
struct Vehicle {
    id: String,
    origin: (f64, f64),
    unit: (f64, f64),
    heading: f64,
    length: f64,
    enter_t: f64,
    /// Intersection indices traversed, in order.
    route: Vec<usize>,
    direction: Direction,
    /// Reference point of the current cruise: at `ref_t` the vehicle is at `ref_p` at cruise speed.
    ref_t: f64,
    ref_p: f64,
    stops: Vec<Stop>,
}

impl Vehicle {
    /// Distance along the path to the point closest to `c`.
    fn along(&self, c: (f64, f64)) -> f64 {
        (c.0 - self.origin.0) * self.unit.0 + (c.1 - self.origin.1) * self.unit.1
    }
}

/// Runs the simulation and returns every vehicle's trajectory.
pub fn simulate(config: &SimConfig) -> Result<SimOutput> {
    run(config, |_| true)
}

/// Runs the simulation but renders only probe vehicles. Equivalent to
/// `sample_probes(simulate(config).trajectories, config.probe_penetration, config.probe_seed())`
/// without materialising the non-probe trajectories.
pub fn simulate_probes(config: &SimConfig) -> Result<SimOutput> {
    let seed = config.probe_seed();
    let p = config.probe_penetration;
    run(config, |id| is_probe(id, p, seed))
}

fn is_probe(vehicle_id: &str, penetration: f64, seed: u64) -> bool {
    penetration >= 1.0 || keyed_uniform(seed, vehicle_id) < penetration
}

/// Keeps each whole trajectory independently with probability `penetration`.
/// The decision depends only on `(seed, vehicle_id)`.
pub fn sample_probes(trajs: Vec<Trajectory>, penetration: f64, seed: u64) -> Vec<Trajectory> {
    trajs
        .into_iter()
        .filter(|t| is_probe(&t.vehicle_id, penetration, seed))
        .collect()
}

fn run(config: &SimConfig, keep: impl Fn(&str) -> bool) -> Result<SimOutput> {
    config.validate()?;
    let mut vehicles = spawn_vehicles(config);

    let n = config.intersections.len();
    let mut queue_log = Vec::new();
    for i in 0..n {
        for dir in [Direction::N, Direction::S] {
            serve_approach(config, &mut vehicles, i, dir, &mut queue_log)?;
        }
    }
    for i in 0..n {
        serve_approach(config, &mut vehicles, i, Direction::E, &mut queue_log)?;
    }
    for i in (0..n).rev() {
        serve_approach(config, &mut vehicles, i, Direction::W, &mut queue_log)?;
    }

    let mut trajectories: Vec<Trajectory> = vehicles
        .iter()
        .filter(|v| keep(&v.id))
        .map(|v| render(config, v))
        .filter(|t| !t.points.is_empty())
        .collect();
    trajectories.sort_by(|a, b| a.vehicle_id.cmp(&b.vehicle_id));
    queue_log.sort_by(|a, b| {
        (a.intersection_id.as_str(), a.direction, a.stop_time_s)
            .partial_cmp(&(b.intersection_id.as_str(), b.direction, b.stop_time_s))
            .unwrap()
            .then_with(|| a.vehicle_id.cmp(&b.vehicle_id))
    });

    let ground_truth = GroundTruth {
        plans: config.intersections.iter().map(|s| s.plan.clone()).collect(),
        n_hours: (config.duration_s / 3600.0).ceil() as u32,
    };
    Ok(SimOutput {
        trajectories,
        ground_truth,
        queue_log,
    })
}

fn spawn_vehicles(config: &SimConfig) -> Vec<Vehicle> {
    let n = config.intersections.len();
    let off = config.lane_offset_m;
    let leg = config.cross_street_length_m;
    let mut out = Vec::new();

    // Sorted sources make vehicle numbering independent of the demand list order.
    let mut sources: Vec<&ApproachDemand> = config.demand.iter().collect();
    sources.sort_by(|a, b| {
        (a.intersection_id.as_str(), a.direction).cmp(&(b.intersection_id.as_str(), b.direction))
    });

    for src in sources {
        let i = config.index_of(&src.intersection_id).expect("validated");
        let max_rate = src.max_rate();
        if max_rate <= 0.0 {
            continue;
        }
        let label = format!("arrivals/{}/{}", src.intersection_id, src.direction);
        let mut rng = derived_rng(config.rng_seed, &label);
        let (cx, _) = config.intersections[i].geometry.center;
        let mut t = 0.0;
        let mut count = 0usize;
        loop {
            let u: f64 = rng.gen();
            t += -(1.0 - u).ln() / max_rate;
            if t >= config.duration_s {
                break;
            }
            let accept: f64 = rng.gen();
            if accept * max_rate >= src.rate_at(t) {
                continue;
            }
            let id = format!("{}-{}-{:06}", src.intersection_id, src.direction, count);
            count += 1;
            let dir = src.direction;
            let (origin, unit, length, route) = match dir {
                Direction::N => ((cx + off, -leg), (0.0, 1.0), 2.0 * leg, vec![i]),
                Direction::S => ((cx - off, leg), (0.0, -1.0), 2.0 * leg, vec![i]),
                Direction::E | Direction::W => {
                    let mut route = vec![i];
                    loop {
                        let last = *route.last().unwrap();
                        let next = match dir {
                            Direction::E if last + 1 < n => last + 1,
                            Direction::W if last > 0 => last - 1,
                            _ => break,
                        };
                        let c: f64 = rng.gen();
                        if c >= config.arterial_continue_prob {
                            break;
                        }
                        route.push(next);
                    }
                    let last = *route.last().unwrap();
                    let up = config.upstream_link(i, dir) / 2.0;
                    let down = config.downstream_link(last, dir) / 2.0;
                    let last_x = config.intersections[last].geometry.center.0;
                    if dir == Direction::E {
                        let x0 = cx - up;
                        ((x0, -off), (1.0, 0.0), last_x + down - x0, route)
                    } else {
                        let x0 = cx + up;
                        ((x0, off), (-1.0, 0.0), x0 - (last_x - down), route)
                    }
                }
            };
            out.push(Vehicle {
                id,
                origin,
                unit,
                heading: dir.heading(),
                length,
                enter_t: t,
                route,
                direction: dir,
                ref_t: t,
                ref_p: 0.0,
                stops: Vec::new(),
            });
        }
    }
    out
}

fn serve_approach(
    config: &SimConfig,
    vehicles: &mut [Vehicle],
    i: usize,
    dir: Direction,
    log: &mut Vec<QueueRecord>,
) -> Result<()> {
    let spec = &config.intersections[i];
    let plan = &spec.plan;
    let phase: &Phase = plan
        .resolve_phase(PhaseKey::new(dir, Movement::Through))
        .expect("validated");
    let v = config.cruise_speed_mps;
    let a = config.max_accel_mps2;
    let b = config.max_decel_mps2;
    let h = config.saturation_headway_s;
    let center = spec.geometry.center;

    // (free arrival at the stop line, vehicle index)
    let mut arrivals: Vec<(f64, usize)> = vehicles
        .iter()
        .enumerate()
        .filter(|(_, veh)| veh.direction == dir && veh.route.contains(&i))
        .map(|(k, veh)| {
            let stopline = veh.along(center) - config.stopline_setback_m;
            (veh.ref_t + (stopline - veh.ref_p) / v, k)
        })
        .collect();
    arrivals.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap()
            .then_with(|| vehicles[x.1].id.cmp(&vehicles[y.1].id))
    });

    // Start times of queued vehicles still relevant to newcomers, in FIFO order.
    let mut starts: Vec<f64> = Vec::new();
    for (arrive, k) in arrivals {
        let waiting = starts.iter().rev().take_while(|&&s| s > arrive).count();
        if !plan.is_red(phase, arrive) && waiting == 0 {
            continue;
        }
        let veh = &mut vehicles[k];
        let stopline = veh.along(center) - config.stopline_setback_m;
        let stop_p = stopline - waiting as f64 * config.jam_spacing_m;
        let decel_start_p = stop_p - v * v / (2.0 * b);
        if decel_start_p < veh.ref_p {
            return Err(Error::Spillback {
                intersection: spec.geometry.intersection_id.clone(),
                direction: dir.to_string(),
                detail: format!(
                    "vehicle {} would join a queue of {waiting} beyond the end of its link at t = {arrive:.1} s",
                    veh.id
                ),
            });
        }
        let decel_start_t = veh.ref_t + (decel_start_p - veh.ref_p) / v;
        let stop_t = decel_start_t + v / b;
        let mut earliest = stop_t + 1.0;
        if let Some(&prev) = starts.last() {
            earliest = earliest.max(prev + h);
        }
        let go_t = plan.next_green(phase, earliest);
        starts.push(go_t);
        log.push(QueueRecord {
            vehicle_id: veh.id.clone(),
            intersection_id: spec.geometry.intersection_id.clone(),
            direction: dir,
            queue_position: waiting,
            stop_time_s: stop_t,
            go_time_s: go_t,
            green_onset_s: plan.last_green_onset(phase, go_t),
        });
        veh.stops.push(Stop {
            decel_start_t,
            decel_start_p,
            stop_t,
            stop_p,
            go_t,
        });
        veh.ref_t = go_t + v / a;
        veh.ref_p = stop_p + v * v / (2.0 * a);
    }
    Ok(())
}

/// Position along the path and speed at time `t`.
fn state_at(config: &SimConfig, veh: &Vehicle, t: f64) -> (f64, f64) {
    let v = config.cruise_speed_mps;
    let a = config.max_accel_mps2;
    let b = config.max_decel_mps2;
    let (mut cruise_t, mut cruise_p) = (veh.enter_t, 0.0);
    for s in &veh.stops {
        if t < s.decel_start_t {
            break;
        }
        if t < s.stop_t {
            let dt = t - s.decel_start_t;
            return (s.decel_start_p + v * dt - 0.5 * b * dt * dt, v - b * dt);
        }
        if t <= s.go_t {
            return (s.stop_p, 0.0);
        }
        let dt = t - s.go_t;
        if dt < v / a {
            return (s.stop_p + 0.5 * a * dt * dt, a * dt);
        }
        cruise_t = s.go_t + v / a;
        cruise_p = s.stop_p + v * v / (2.0 * a);
    }
    (cruise_p + v * (t - cruise_t), v)
}

fn exit_time(config: &SimConfig, veh: &Vehicle) -> f64 {
    let v = config.cruise_speed_mps;
    match veh.stops.last() {
        Some(s) => {
            let a = config.max_accel_mps2;
            let p = s.stop_p + v * v / (2.0 * a);
            s.go_t + v / a + (veh.length - p) / v
        }
        None => veh.enter_t + veh.length / v,
    }
}

/// Samples a vehicle at whole seconds until it leaves the network or the
/// simulation horizon ends.
fn render(config: &SimConfig, veh: &Vehicle) -> Trajectory {
    let end = exit_time(config, veh);
    let mut points = Vec::new();
    let mut t = veh.enter_t.ceil();
    while t <= end && t < config.duration_s {
        let (p, speed) = state_at(config, veh, t);
        points.push(TracePoint {
            t,
            x: veh.origin.0 + veh.unit.0 * p,
            y: veh.origin.1 + veh.unit.1 * p,
            speed: speed.max(0.0),
            heading: veh.heading,
        });
        t += 1.0;
    }
    Trajectory {
        vehicle_id: veh.id.clone(),
        points,
    }
}

/// Parameters of a randomly generated test corridor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorridorSpec {
    pub n_intersections: usize,
    pub spacing_m: f64,
    /// Cycle lengths are drawn uniformly from this list.
    pub cycle_choices: Vec<f64>,
    /// Red share of the north-south phase; east-west gets the rest of the cycle.
    pub ns_red_fraction: (f64, f64),
    /// Arterial vehicles entering at each intersection, per direction, by hour of day.
    pub arterial_entry_vph: Vec<f64>,
    /// Cross-street arrivals per approach, by hour of day.
    pub cross_vph: Vec<f64>,
    pub duration_s: f64,
    pub probe_penetration: f64,
    pub seed: u64,
}

/// Relative hourly demand with AM and PM peaks, peak = 1.
pub fn daily_profile() -> Vec<f64> {
    vec![
        0.45, 0.45, 0.45, 0.45, 0.5, 0.6, 0.85, 1.0, 1.0, 0.85, 0.7, 0.7, 0.75, 0.75, 0.7, 0.85, 1.0,
        1.0, 0.9, 0.7, 0.6, 0.55, 0.5, 0.45,
    ]
}

impl Default for CorridorSpec {
    fn default() -> Self {
        let profile = daily_profile();
        Self {
            n_intersections: 8,
            spacing_m: 400.0,
            cycle_choices: vec![60.0, 75.0, 90.0, 100.0, 110.0, 120.0],
            ns_red_fraction: (0.4, 0.6),
            arterial_entry_vph: profile.iter().map(|f| f * 160.0).collect(),
            cross_vph: profile.iter().map(|f| f * 320.0).collect(),
            duration_s: 24.0 * 3600.0,
            probe_penetration: 0.5,
            seed: 2023,
        }
    }
}

impl CorridorSpec {
    pub fn build(&self) -> Result<SimConfig> {
        if self.n_intersections == 0 || self.cycle_choices.is_empty() {
            return Err(Error::config("corridor needs intersections and cycle choices"));
        }
        let (lo, hi) = self.ns_red_fraction;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(Error::config("ns_red_fraction must satisfy 0 < lo <= hi < 1"));
        }
        let mut rng = derived_rng(self.seed, "corridor");
        let mut intersections = Vec::with_capacity(self.n_intersections);
        let mut demand = Vec::new();
        for i in 0..self.n_intersections {
            let id = format!("I{:02}", i + 1);
            let center = (i as f64 * self.spacing_m, 0.0);
            let cycle = self.cycle_choices[rng.gen_range(0..self.cycle_choices.len())];
            let frac = rng.gen_range(lo..=hi);
            let ns_red = (cycle * frac).round().clamp(1.0, cycle - 1.0);
            let ew_red = cycle - ns_red;
            let offset = rng.gen_range(0..cycle as u32) as f64;
            let phase = |phase_id, direction, red_s: f64, red_start_offset_s| Phase {
                phase_id,
                direction,
                movement: Movement::Through,
                red_s,
                green_s: cycle - red_s,
                red_start_offset_s,
            };
            let plan = SignalPlan {
                intersection_id: id.clone(),
                cycle_s: cycle,
                phases: vec![
                    phase(1, Direction::N, ns_red, 0.0),
                    phase(2, Direction::S, ns_red, 0.0),
                    phase(3, Direction::E, ew_red, ns_red),
                    phase(4, Direction::W, ew_red, ns_red),
                ],
                plan_offset_s: offset,
            };
            intersections.push(IntersectionSpec {
                geometry: IntersectionGeometry::cardinal(id.clone(), center),
                plan,
                spacing_m: if i == 0 { 0.0 } else { self.spacing_m },
            });
            for (direction, vph) in [
                (Direction::N, &self.cross_vph),
                (Direction::S, &self.cross_vph),
                (Direction::E, &self.arterial_entry_vph),
                (Direction::W, &self.arterial_entry_vph),
            ] {
                demand.push(ApproachDemand {
                    intersection_id: id.clone(),
                    direction,
                    vph: vph.clone(),
                });
            }
        }
        let mut config = SimConfig::new(intersections, self.duration_s, self.seed);
        config.demand = demand;
        config.probe_penetration = self.probe_penetration;
        config.validate()?;
        Ok(config)
    }
}

/// Groups queue records by `(intersection, direction)`.
pub fn queue_log_by_approach(log: &[QueueRecord]) -> BTreeMap<(String, Direction), Vec<&QueueRecord>> {
    let mut out: BTreeMap<(String, Direction), Vec<&QueueRecord>> = BTreeMap::new();
    for r in log {
        out.entry((r.intersection_id.clone(), r.direction))
            .or_default()
            .push(r);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(cycle: f64, ns_red: f64) -> SimConfig {
        let phase = |phase_id, direction, red_s: f64, off| Phase {
            phase_id,
            direction,
            movement: Movement::Through,
            red_s,
            green_s: cycle - red_s,
            red_start_offset_s: off,
        };
        let plan = SignalPlan {
            intersection_id: "A".into(),
            cycle_s: cycle,
            phases: vec![
                phase(1, Direction::N, ns_red, 0.0),
                phase(2, Direction::S, ns_red, 0.0),
                phase(3, Direction::E, cycle - ns_red, ns_red),
                phase(4, Direction::W, cycle - ns_red, ns_red),
            ],
            plan_offset_s: 0.0,
        };
        SimConfig::new(
            vec![IntersectionSpec {
                geometry: IntersectionGeometry::cardinal("A", (0.0, 0.0)),
                plan,
                spacing_m: 0.0,
            }],
            3600.0,
            11,
        )
    }

    #[test]
    fn zero_demand_gives_no_vehicles_but_ground_truth() {
        let mut cfg = single(90.0, 40.0);
        cfg.demand.push(ApproachDemand {
            intersection_id: "A".into(),
            direction: Direction::N,
            vph: vec![0.0],
        });
        let out = simulate(&cfg).unwrap();
        assert!(out.trajectories.is_empty());
        assert_eq!(out.ground_truth.n_hours, 1);
        let t = out
            .ground_truth
            .target("A", PhaseKey::new(Direction::E, Movement::Through), 0)
            .unwrap();
        assert_eq!(t.cycle_s, 90.0);
        assert_eq!(t.red_s, 50.0);
    }

    #[test]
    fn stop_duration_of_first_queued_vehicle() {
        // North phase red over [0, 40) of a 100 s cycle. Place one vehicle so it comes
        // to rest at t = 10 and check the rendered stop.
        let cfg = single(100.0, 40.0);
        let v = cfg.cruise_speed_mps;
        let b = cfg.max_decel_mps2;
        let leg = cfg.cross_street_length_m;
        let stopline = leg - cfg.stopline_setback_m;
        let decel_p = stopline - v * v / (2.0 * b);
        let enter_t = 10.0 - v / b - decel_p / v;
        let mut vehicles = vec![Vehicle {
            id: "x".into(),
            origin: (cfg.lane_offset_m, -leg),
            unit: (0.0, 1.0),
            heading: 0.0,
            length: 2.0 * leg,
            enter_t,
            route: vec![0],
            direction: Direction::N,
            ref_t: enter_t,
            ref_p: 0.0,
            stops: vec![],
        }];
        let mut log = vec![];
        serve_approach(&cfg, &mut vehicles, 0, Direction::N, &mut log).unwrap();
        assert_eq!(log.len(), 1);
        assert!((log[0].stop_time_s - 10.0).abs() < 1e-9);
        assert_eq!(log[0].go_time_s, 40.0);
        let traj = render(&cfg, &vehicles[0]);
        let zero: Vec<f64> = traj.points.iter().filter(|p| p.speed == 0.0).map(|p| p.t).collect();
        let first_zero = zero[0];
        let accel = traj
            .points
            .iter()
            .find(|p| p.t > first_zero && p.speed > 0.0)
            .unwrap()
            .t;
        let duration = accel - first_zero;
        assert!((duration - 30.0).abs() <= 1.0, "duration {duration}");
    }

    #[test]
    fn deterministic_and_kinematically_sane() {
        let spec = CorridorSpec {
            n_intersections: 3,
            duration_s: 1800.0,
            ..CorridorSpec::default()
        };
        let cfg = spec.build().unwrap();
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a.trajectories, b.trajectories);
        assert!(!a.trajectories.is_empty());
        for t in &a.trajectories {
            for w in t.points.windows(2) {
                let dv = w[1].speed - w[0].speed;
                assert!(dv <= cfg.max_accel_mps2 + 1e-9);
                assert!(-dv <= cfg.max_decel_mps2 + 1e-9);
                assert_eq!(w[1].t - w[0].t, 1.0);
            }
        }
    }

    #[test]
    fn probes_match_post_hoc_sampling() {
        let spec = CorridorSpec {
            n_intersections: 2,
            duration_s: 1800.0,
            probe_penetration: 0.4,
            ..CorridorSpec::default()
        };
        let cfg = spec.build().unwrap();
        let all = simulate(&cfg).unwrap();
        let probes = simulate_probes(&cfg).unwrap();
        let sampled = sample_probes(all.trajectories, 0.4, cfg.probe_seed());
        assert_eq!(probes.trajectories, sampled);
    }

    #[test]
    fn spillback_is_reported() {
        let mut cfg = single(180.0, 170.0);
        cfg.cross_street_length_m = 60.0;
        cfg.demand.push(ApproachDemand {
            intersection_id: "A".into(),
            direction: Direction::N,
            vph: vec![1500.0],
        });
        assert!(matches!(simulate(&cfg), Err(Error::Spillback { .. })));
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = single(90.0, 40.0);
        cfg.probe_penetration = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = single(90.0, 40.0);
        cfg.duration_s = 0.0;
        assert!(cfg.validate().is_err());
    }
}
