//! Domain model shared by every stage.
//!
//! Units are SI throughout: meters, meters per second, seconds. Headings are
//! compass degrees in `[0, 360)`, 0 = north, clockwise.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const FEET_TO_METERS: f64 = 0.3048;

/// Radius around an intersection center used to clip trajectories (500 ft).
pub const BOUNDING_RADIUS_M: f64 = 500.0 * FEET_TO_METERS;

/// A trip must come at least this close to the center to count as traversing it (50 ft).
pub const CENTER_PASSAGE_M: f64 = 50.0 * FEET_TO_METERS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    N,
    S,
    E,
    W,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::N, Direction::S, Direction::E, Direction::W];

    /// Heading of a vehicle travelling in this direction.
    pub fn heading(self) -> f64 {
        match self {
            Direction::N => 0.0,
            Direction::E => 90.0,
            Direction::S => 180.0,
            Direction::W => 270.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Direction::N => "N",
            Direction::S => "S",
            Direction::E => "E",
            Direction::W => "W",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Movement {
    Through,
    Left,
    Right,
}

impl fmt::Display for Movement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Movement::Through => "through",
            Movement::Left => "left",
            Movement::Right => "right",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TodBin {
    AM,
    PM,
    OffPeak,
}

impl fmt::Display for TodBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TodBin::AM => "AM",
            TodBin::PM => "PM",
            TodBin::OffPeak => "OffPeak",
        };
        f.write_str(s)
    }
}

/// Phase identity used for binning: approach direction plus turning movement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhaseKey {
    pub direction: Direction,
    pub movement: Movement,
}

impl PhaseKey {
    pub fn new(direction: Direction, movement: Movement) -> Self {
        Self {
            direction,
            movement,
        }
    }
}

impl fmt::Display for PhaseKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.direction, self.movement)
    }
}

/// One 1 Hz probe record. The owning vehicle id lives on [`Trajectory`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub heading: f64,
}

impl TracePoint {
    pub fn distance_to(&self, (cx, cy): (f64, f64)) -> f64 {
        (self.x - cx).hypot(self.y - cy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub vehicle_id: String,
    pub points: Vec<TracePoint>,
}

impl Trajectory {
    /// Validates strictly increasing timestamps, non-negative speeds and headings in range.
    pub fn new(vehicle_id: impl Into<String>, points: Vec<TracePoint>) -> Result<Self> {
        let vehicle_id = vehicle_id.into();
        for (i, p) in points.iter().enumerate() {
            if !(p.speed >= 0.0) || !p.speed.is_finite() {
                return Err(Error::data(format!(
                    "{vehicle_id}: speed {} at index {i} is not a finite non-negative value",
                    p.speed
                )));
            }
            if !(0.0..360.0).contains(&p.heading) {
                return Err(Error::data(format!(
                    "{vehicle_id}: heading {} at index {i} outside [0, 360)",
                    p.heading
                )));
            }
            if i > 0 && !(p.t > points[i - 1].t) {
                return Err(Error::data(format!(
                    "{vehicle_id}: timestamps not strictly increasing at index {i}"
                )));
            }
        }
        Ok(Self { vehicle_id, points })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionGeometry {
    pub intersection_id: String,
    pub center: (f64, f64),
    /// Nominal inbound heading of each approach.
    pub approach_headings: BTreeMap<Direction, f64>,
}

impl IntersectionGeometry {
    pub fn new(
        intersection_id: impl Into<String>,
        center: (f64, f64),
        approach_headings: BTreeMap<Direction, f64>,
    ) -> Result<Self> {
        let g = Self {
            intersection_id: intersection_id.into(),
            center,
            approach_headings,
        };
        g.validate()?;
        Ok(g)
    }

    /// A four-legged intersection with cardinal approaches.
    pub fn cardinal(intersection_id: impl Into<String>, center: (f64, f64)) -> Self {
        let approach_headings = Direction::ALL.iter().map(|&d| (d, d.heading())).collect();
        Self {
            intersection_id: intersection_id.into(),
            center,
            approach_headings,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.approach_headings.len() < 2 {
            return Err(Error::config(format!(
                "intersection {} needs at least two approaches",
                self.intersection_id
            )));
        }
        let hs: Vec<f64> = self.approach_headings.values().copied().collect();
        for (i, a) in hs.iter().enumerate() {
            if !(0.0..360.0).contains(a) {
                return Err(Error::config(format!(
                    "intersection {}: approach heading {a} outside [0, 360)",
                    self.intersection_id
                )));
            }
            if hs[i + 1..].contains(a) {
                return Err(Error::config(format!(
                    "intersection {}: duplicate approach heading {a}",
                    self.intersection_id
                )));
            }
        }
        Ok(())
    }
}

/// One signal phase. Yellow is folded into green, so `red_s + green_s` is the cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub phase_id: u32,
    pub direction: Direction,
    pub movement: Movement,
    pub red_s: f64,
    pub green_s: f64,
    /// Start of the red interval within the cycle, relative to the plan offset.
    pub red_start_offset_s: f64,
}

impl Phase {
    pub fn key(&self) -> PhaseKey {
        PhaseKey::new(self.direction, self.movement)
    }
}

/// Ground-truth pre-timed plan of one intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalPlan {
    pub intersection_id: String,
    pub cycle_s: f64,
    pub phases: Vec<Phase>,
    pub plan_offset_s: f64,
}

impl SignalPlan {
    pub fn validate(&self) -> Result<()> {
        let id = &self.intersection_id;
        if !(30.0..=180.0).contains(&self.cycle_s) {
            return Err(Error::config(format!(
                "plan {id}: cycle {} outside [30, 180] s",
                self.cycle_s
            )));
        }
        if self.phases.is_empty() {
            return Err(Error::config(format!("plan {id} has no phases")));
        }
        for p in &self.phases {
            if !(p.red_s > 0.0 && p.green_s > 0.0) {
                return Err(Error::config(format!(
                    "plan {id} phase {}: red and green must be positive",
                    p.phase_id
                )));
            }
            if p.red_s + p.green_s != self.cycle_s {
                return Err(Error::config(format!(
                    "plan {id} phase {}: red {} + green {} != cycle {}",
                    p.phase_id, p.red_s, p.green_s, self.cycle_s
                )));
            }
            if !(0.0..self.cycle_s).contains(&p.red_start_offset_s) {
                return Err(Error::config(format!(
                    "plan {id} phase {}: red start offset outside [0, cycle)",
                    p.phase_id
                )));
            }
        }
        Ok(())
    }

    /// Phase serving `key`. Falls back to the through phase of the same direction,
    /// then any phase of that direction, since plans need not list every movement.
    pub fn resolve_phase(&self, key: PhaseKey) -> Option<&Phase> {
        self.phases
            .iter()
            .find(|p| p.key() == key)
            .or_else(|| {
                self.phases
                    .iter()
                    .find(|p| p.direction == key.direction && p.movement == Movement::Through)
            })
            .or_else(|| self.phases.iter().find(|p| p.direction == key.direction))
    }

    /// Position of `t` within the phase's cycle, measured from its red start.
    fn cycle_position(&self, phase: &Phase, t: f64) -> f64 {
        (t - self.plan_offset_s - phase.red_start_offset_s).rem_euclid(self.cycle_s)
    }

    pub fn is_red(&self, phase: &Phase, t: f64) -> bool {
        self.cycle_position(phase, t) < phase.red_s
    }

    /// Earliest time `>= t` at which the phase shows green.
    pub fn next_green(&self, phase: &Phase, t: f64) -> f64 {
        let pos = self.cycle_position(phase, t);
        if pos < phase.red_s {
            t + (phase.red_s - pos)
        } else {
            t
        }
    }

    /// Most recent green onset at or before `t`.
    pub fn last_green_onset(&self, phase: &Phase, t: f64) -> f64 {
        let pos = self.cycle_position(phase, t);
        if pos >= phase.red_s {
            t - (pos - phase.red_s)
        } else {
            t - pos - phase.green_s
        }
    }
}

/// A stop extracted from one trajectory segment at one intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopEvent {
    pub intersection_id: String,
    pub vehicle_id: String,
    pub direction: Direction,
    pub movement: Movement,
    pub stop_start_s: f64,
    pub stop_duration_s: f64,
    pub accel_start_s: f64,
    pub hour_of_day: u32,
    pub tod_bin: TodBin,
}

impl StopEvent {
    pub fn phase_key(&self) -> PhaseKey {
        PhaseKey::new(self.direction, self.movement)
    }
}

/// Green time of a phase from its cycle length and red time.
pub fn derive_green(cycle_s: f64, red_s: f64) -> Result<f64> {
    if !(red_s > 0.0 && red_s < cycle_s) {
        return Err(Error::Domain(format!(
            "red time {red_s} s must lie strictly inside (0, {cycle_s}) s"
        )));
    }
    Ok(cycle_s - red_s)
}

/// Nearest cardinal direction. Each class owns the half-open arc `(c - 45, c + 45]`,
/// so boundary headings go to the smaller compass angle.
pub fn classify_direction(heading_deg: f64) -> Direction {
    let h = heading_deg.rem_euclid(360.0);
    if h <= 45.0 {
        Direction::N
    } else if h <= 135.0 {
        Direction::E
    } else if h <= 225.0 {
        Direction::S
    } else if h <= 315.0 {
        Direction::W
    } else {
        Direction::N
    }
}

/// Signed heading change wrapped to `(-180, 180]`; negative is a left turn.
pub fn heading_change(heading_in: f64, heading_out: f64) -> f64 {
    let d = (heading_out - heading_in).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

pub fn classify_movement(heading_in: f64, heading_out: f64) -> Movement {
    let d = heading_change(heading_in, heading_out);
    if d.abs() < 45.0 {
        Movement::Through
    } else if d <= -45.0 {
        Movement::Left
    } else {
        Movement::Right
    }
}

/// Inclusive hour ranges of the two peak periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TodBoundaries {
    pub am: (u32, u32),
    pub pm: (u32, u32),
}

impl Default for TodBoundaries {
    fn default() -> Self {
        Self {
            am: (6, 9),
            pm: (15, 18),
        }
    }
}

impl TodBoundaries {
    pub fn bin(&self, hour: u32) -> TodBin {
        if (self.am.0..=self.am.1).contains(&hour) {
            TodBin::AM
        } else if (self.pm.0..=self.pm.1).contains(&hour) {
            TodBin::PM
        } else {
            TodBin::OffPeak
        }
    }
}

pub fn tod_bin(hour: u32) -> TodBin {
    TodBoundaries::default().bin(hour)
}

/// Hour of day (0-23) of a timestamp in seconds since midnight of day 0.
pub fn hour_of_day(t: f64) -> u32 {
    ((t / 3600.0).floor() as i64).rem_euclid(24) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn green_derivation() {
        assert_eq!(derive_green(90.0, 30.0).unwrap(), 60.0);
        assert!((derive_green(75.5, 41.2).unwrap() - 34.3).abs() < 1e-12);
        assert!(matches!(derive_green(120.0, 120.0), Err(Error::Domain(_))));
        assert!(derive_green(120.0, 0.0).is_err());
        assert!(derive_green(120.0, -3.0).is_err());
    }

    #[test]
    fn direction_examples() {
        assert_eq!(classify_direction(0.0), Direction::N);
        assert_eq!(classify_direction(44.9), Direction::N);
        assert_eq!(classify_direction(45.0), Direction::N);
        assert_eq!(classify_direction(45.1), Direction::E);
        assert_eq!(classify_direction(359.9), Direction::N);
        assert_eq!(classify_direction(135.0), Direction::E);
        assert_eq!(classify_direction(225.0), Direction::S);
        assert_eq!(classify_direction(315.0), Direction::W);
        assert_eq!(classify_direction(315.1), Direction::N);
    }

    #[test]
    fn movement_examples() {
        assert_eq!(classify_movement(0.0, 0.0), Movement::Through);
        assert_eq!(classify_movement(0.0, 270.0), Movement::Left);
        assert_eq!(classify_movement(90.0, 180.0), Movement::Right);
        assert_eq!(classify_movement(350.0, 10.0), Movement::Through);
    }

    #[test]
    fn tod_examples() {
        assert_eq!(tod_bin(7), TodBin::AM);
        assert_eq!(tod_bin(16), TodBin::PM);
        assert_eq!(tod_bin(2), TodBin::OffPeak);
        assert_eq!(tod_bin(6), TodBin::AM);
        assert_eq!(tod_bin(10), TodBin::OffPeak);
        assert_eq!(tod_bin(18), TodBin::PM);
        assert_eq!(tod_bin(19), TodBin::OffPeak);
    }

    fn two_phase_plan() -> SignalPlan {
        let phase = |id, direction, red: f64, off: f64| Phase {
            phase_id: id,
            direction,
            movement: Movement::Through,
            red_s: red,
            green_s: 90.0 - red,
            red_start_offset_s: off,
        };
        SignalPlan {
            intersection_id: "I".into(),
            cycle_s: 90.0,
            phases: vec![
                phase(1, Direction::N, 40.0, 0.0),
                phase(2, Direction::E, 50.0, 40.0),
            ],
            plan_offset_s: 5.0,
        }
    }

    #[test]
    fn plan_signal_state() {
        let plan = two_phase_plan();
        plan.validate().unwrap();
        let n = &plan.phases[0];
        assert!(plan.is_red(n, 5.0));
        assert!(plan.is_red(n, 44.9));
        assert!(!plan.is_red(n, 45.0));
        assert_eq!(plan.next_green(n, 10.0), 45.0);
        assert_eq!(plan.next_green(n, 50.0), 50.0);
        assert_eq!(plan.last_green_onset(n, 60.0), 45.0);
        assert_eq!(plan.last_green_onset(n, 100.0), 45.0);
        assert_eq!(plan.last_green_onset(n, 140.0), 135.0);
        let e = &plan.phases[1];
        // E is red exactly while N is green.
        for t in 0..400 {
            let t = t as f64 + 0.5;
            assert_ne!(plan.is_red(n, t), plan.is_red(e, t));
        }
        let s_key = PhaseKey::new(Direction::S, Movement::Left);
        assert!(plan.resolve_phase(s_key).is_none());
        let n_left = PhaseKey::new(Direction::N, Movement::Left);
        assert_eq!(plan.resolve_phase(n_left).unwrap().phase_id, 1);
    }

    #[test]
    fn plan_validation_rejects_inconsistent_phase() {
        let mut plan = two_phase_plan();
        plan.phases[0].green_s += 1.0;
        assert!(plan.validate().is_err());
        let mut plan = two_phase_plan();
        plan.cycle_s = 200.0;
        assert!(plan.validate().is_err());
    }

    #[test]
    fn trajectory_validation() {
        let p = |t: f64, speed: f64| TracePoint {
            t,
            x: 0.0,
            y: 0.0,
            speed,
            heading: 0.0,
        };
        assert!(Trajectory::new("v", vec![p(0.0, 1.0), p(1.0, 0.0)]).is_ok());
        assert!(Trajectory::new("v", vec![p(0.0, 1.0), p(0.0, 0.0)]).is_err());
        assert!(Trajectory::new("v", vec![p(0.0, -1.0)]).is_err());
    }

    #[test]
    fn geometry_validation() {
        let mut hs = BTreeMap::new();
        hs.insert(Direction::N, 0.0);
        assert!(IntersectionGeometry::new("I", (0.0, 0.0), hs.clone()).is_err());
        hs.insert(Direction::S, 0.0);
        assert!(IntersectionGeometry::new("I", (0.0, 0.0), hs.clone()).is_err());
        hs.insert(Direction::S, 180.0);
        assert!(IntersectionGeometry::new("I", (0.0, 0.0), hs).is_ok());
        IntersectionGeometry::cardinal("I", (1.0, 2.0)).validate().unwrap();
    }

    proptest! {
        #[test]
        fn green_round_trip(cycle in 30u32..=180, frac in 0.01f64..0.99) {
            let cycle = cycle as f64;
            let red = (cycle * frac).max(0.5).min(cycle - 0.5);
            let green = derive_green(cycle, red).unwrap();
            prop_assert!((green + red - cycle).abs() <= 1e-12 * cycle);
        }

        #[test]
        fn direction_arcs_are_quarter_circles(h in 0.0f64..360.0) {
            let d = classify_direction(h);
            let diff = heading_change(d.heading(), h);
            prop_assert!(diff > -45.0 && diff <= 45.0);
        }

        #[test]
        fn same_heading_is_through(h in 0.0f64..360.0) {
            prop_assert_eq!(classify_movement(h, h), Movement::Through);
        }
    }
}
