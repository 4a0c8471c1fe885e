//! Trip metrics around intersections: clipping, the four trip filters and
//! stop / acceleration-start extraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{
    classify_direction, classify_movement, hour_of_day, IntersectionGeometry, StopEvent,
    TodBoundaries, TracePoint, Trajectory, BOUNDING_RADIUS_M, CENTER_PASSAGE_M,
};

/// Contiguous run of a trajectory inside an intersection's bounding radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub vehicle_id: String,
    pub intersection_id: String,
    pub points: Vec<TracePoint>,
    pub min_center_distance_m: f64,
    /// Index into `points` of the point closest to the center.
    pub closest_index: usize,
    pub duration_s: f64,
    pub max_gap_s: f64,
}

impl TrajectorySegment {
    fn from_points(
        vehicle_id: &str,
        geom: &IntersectionGeometry,
        points: Vec<TracePoint>,
    ) -> Self {
        let (closest_index, min_center_distance_m) = points
            .iter()
            .map(|p| p.distance_to(geom.center))
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, d)| if d < best.1 { (i, d) } else { best });
        let duration_s = match (points.first(), points.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        };
        let max_gap_s = points
            .windows(2)
            .map(|w| w[1].t - w[0].t)
            .fold(0.0, f64::max);
        Self {
            vehicle_id: vehicle_id.to_owned(),
            intersection_id: geom.intersection_id.clone(),
            points,
            min_center_distance_m,
            closest_index,
            duration_s,
            max_gap_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    NoStopPattern,
    SparseGap,
    NoCenterPassage,
    TooLong,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub accepted: bool,
    pub rejection_reason: RejectionReason,
}

impl FilterOutcome {
    fn accept() -> Self {
        Self {
            accepted: true,
            rejection_reason: RejectionReason::None,
        }
    }

    fn reject(reason: RejectionReason) -> Self {
        Self {
            accepted: false,
            rejection_reason: reason,
        }
    }
}

/// Thresholds of the trip filters. Defaults are the 500 ft / 50 ft / 10 s / 2 min rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TripConfig {
    pub radius_m: f64,
    pub max_gap_s: f64,
    pub center_distance_m: f64,
    pub max_duration_s: f64,
    /// Speeds below this count as stopped.
    pub stop_speed_eps: f64,
    #[serde(default)]
    pub tod: TodBoundaries,
}

impl Default for TripConfig {
    fn default() -> Self {
        Self {
            radius_m: BOUNDING_RADIUS_M,
            max_gap_s: 10.0,
            center_distance_m: CENTER_PASSAGE_M,
            max_duration_s: 120.0,
            stop_speed_eps: 0.05,
            tod: TodBoundaries::default(),
        }
    }
}

/// Maximal runs of points within `radius_m` of the center; one segment per visit.
pub fn clip_to_intersection(
    traj: &Trajectory,
    geom: &IntersectionGeometry,
    radius_m: f64,
) -> Vec<TrajectorySegment> {
    let mut out = Vec::new();
    let mut run: Vec<TracePoint> = Vec::new();
    for p in &traj.points {
        if p.distance_to(geom.center) <= radius_m {
            run.push(*p);
        } else if !run.is_empty() {
            out.push(TrajectorySegment::from_points(
                &traj.vehicle_id,
                geom,
                std::mem::take(&mut run),
            ));
        }
    }
    if !run.is_empty() {
        out.push(TrajectorySegment::from_points(&traj.vehicle_id, geom, run));
    }
    out
}

/// Zero-speed runs as half-open index ranges `[start, end)`.
fn stopped_runs(points: &[TracePoint], eps: f64) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < points.len() {
        if points[i].speed < eps {
            let start = i;
            while i < points.len() && points[i].speed < eps {
                i += 1;
            }
            runs.push((start, i));
        } else {
            i += 1;
        }
    }
    runs
}

/// Deceleration into a stop followed by movement.
pub fn has_stop_pattern(seg: &TrajectorySegment, cfg: &TripConfig) -> bool {
    let pts = &seg.points;
    stopped_runs(pts, cfg.stop_speed_eps)
        .into_iter()
        .any(|(start, end)| start > 0 && pts[start - 1].speed > pts[start].speed && end < pts.len())
}

/// No gap of `max_gap_s` or more between consecutive samples.
pub fn within_gap_limit(seg: &TrajectorySegment, cfg: &TripConfig) -> bool {
    seg.max_gap_s < cfg.max_gap_s
}

/// The trip comes within `center_distance_m` of the center.
pub fn passes_center(seg: &TrajectorySegment, cfg: &TripConfig) -> bool {
    seg.min_center_distance_m <= cfg.center_distance_m
}

/// At most `max_duration_s` inside the radius.
pub fn within_duration(seg: &TrajectorySegment, cfg: &TripConfig) -> bool {
    seg.duration_s <= cfg.max_duration_s
}

/// Applies the four criteria, reporting the first failure in the order
/// gap, duration, center passage, stop pattern.
pub fn apply_filters(seg: &TrajectorySegment, cfg: &TripConfig) -> FilterOutcome {
    if !within_gap_limit(seg, cfg) {
        FilterOutcome::reject(RejectionReason::SparseGap)
    } else if !within_duration(seg, cfg) {
        FilterOutcome::reject(RejectionReason::TooLong)
    } else if !passes_center(seg, cfg) {
        FilterOutcome::reject(RejectionReason::NoCenterPassage)
    } else if !has_stop_pattern(seg, cfg) {
        FilterOutcome::reject(RejectionReason::NoStopPattern)
    } else {
        FilterOutcome::accept()
    }
}

/// One event per zero-speed run that starts before the closest approach to the
/// center and is followed by movement. The acceleration start is the first
/// sample after the run, i.e. the first sample faster than its predecessor.
pub fn extract_stop_events(
    seg: &TrajectorySegment,
    geom: &IntersectionGeometry,
    cfg: &TripConfig,
) -> Vec<StopEvent> {
    let pts = &seg.points;
    let (Some(first), Some(last)) = (pts.first(), pts.last()) else {
        return Vec::new();
    };
    let movement = classify_movement(first.heading, last.heading);
    stopped_runs(pts, cfg.stop_speed_eps)
        .into_iter()
        .filter(|&(start, end)| start <= seg.closest_index && end < pts.len())
        .map(|(start, end)| {
            let approach = if start > 0 { &pts[start - 1] } else { &pts[start] };
            let stop_start_s = pts[start].t;
            let accel_start_s = pts[end].t;
            let hour = hour_of_day(stop_start_s);
            StopEvent {
                intersection_id: geom.intersection_id.clone(),
                vehicle_id: seg.vehicle_id.clone(),
                direction: classify_direction(approach.heading),
                movement,
                stop_start_s,
                stop_duration_s: accel_start_s - stop_start_s,
                accel_start_s,
                hour_of_day: hour,
                tod_bin: cfg.tod.bin(hour),
            }
        })
        .collect()
}

/// Counts of filter outcomes over a batch of segments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub segments: usize,
    pub accepted: usize,
    pub no_stop_pattern: usize,
    pub sparse_gap: usize,
    pub no_center_passage: usize,
    pub too_long: usize,
    /// Accepted segments that yielded no event.
    pub empty_extractions: usize,
}

impl FilterStats {
    fn record(&mut self, outcome: FilterOutcome) {
        self.segments += 1;
        match outcome.rejection_reason {
            RejectionReason::None => self.accepted += 1,
            RejectionReason::NoStopPattern => self.no_stop_pattern += 1,
            RejectionReason::SparseGap => self.sparse_gap += 1,
            RejectionReason::NoCenterPassage => self.no_center_passage += 1,
            RejectionReason::TooLong => self.too_long += 1,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.segments += other.segments;
        self.accepted += other.accepted;
        self.no_stop_pattern += other.no_stop_pattern;
        self.sparse_gap += other.sparse_gap;
        self.no_center_passage += other.no_center_passage;
        self.too_long += other.too_long;
        self.empty_extractions += other.empty_extractions;
        self
    }
}

/// Clips, filters and extracts events for every trajectory at every intersection.
/// Output is sorted by vehicle id, then stop start time.
pub fn process_trajectories(
    trajs: &[Trajectory],
    geoms: &[IntersectionGeometry],
    cfg: &TripConfig,
) -> (Vec<StopEvent>, FilterStats) {
    let per_traj: Vec<(Vec<StopEvent>, FilterStats)> = trajs
        .par_iter()
        .map(|traj| {
            let mut events = Vec::new();
            let mut stats = FilterStats::default();
            for geom in geoms {
                for seg in clip_to_intersection(traj, geom, cfg.radius_m) {
                    let outcome = apply_filters(&seg, cfg);
                    stats.record(outcome);
                    if outcome.accepted {
                        let found = extract_stop_events(&seg, geom, cfg);
                        if found.is_empty() {
                            log::debug!(
                                "{} at {}: accepted segment without a pre-center stop",
                                seg.vehicle_id,
                                seg.intersection_id
                            );
                            stats.empty_extractions += 1;
                        }
                        events.extend(found);
                    }
                }
            }
            (events, stats)
        })
        .collect();
    let mut stats = FilterStats::default();
    let mut events = Vec::new();
    for (e, s) in per_traj {
        events.extend(e);
        stats = stats.merge(s);
    }
    events.sort_by(|a, b| {
        a.vehicle_id
            .cmp(&b.vehicle_id)
            .then(a.stop_start_s.total_cmp(&b.stop_start_s))
            .then_with(|| a.intersection_id.cmp(&b.intersection_id))
    });
    (events, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Direction, Movement};
    use proptest::prelude::*;

    fn geom() -> IntersectionGeometry {
        IntersectionGeometry::cardinal("I", (0.0, 0.0))
    }

    /// Northbound samples at 1 Hz starting at `t0`, positions from the speeds,
    /// ending at the center.
    fn seg_from_speeds(t0: f64, speeds: &[f64]) -> TrajectorySegment {
        let n = speeds.len();
        let pts: Vec<TracePoint> = speeds
            .iter()
            .enumerate()
            .map(|(i, &s)| TracePoint {
                t: t0 + i as f64,
                x: 0.0,
                y: -((n - 1 - i) as f64) * 5.0,
                speed: s,
                heading: 0.0,
            })
            .collect();
        TrajectorySegment::from_points("v", &geom(), pts)
    }

    fn line(y0: f64, y1: f64, n: usize) -> Trajectory {
        let pts = (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                TracePoint {
                    t: i as f64,
                    x: 1.8,
                    y: y0 + (y1 - y0) * f,
                    speed: 10.0,
                    heading: 0.0,
                }
            })
            .collect();
        Trajectory::new("v", pts).unwrap()
    }

    #[test]
    fn clipping() {
        let far = Trajectory::new(
            "v",
            (0..10)
                .map(|i| TracePoint {
                    t: i as f64,
                    x: 500.0,
                    y: i as f64,
                    speed: 1.0,
                    heading: 0.0,
                })
                .collect(),
        )
        .unwrap();
        assert!(clip_to_intersection(&far, &geom(), BOUNDING_RADIUS_M).is_empty());

        let pass = line(-300.0, 300.0, 61);
        let segs = clip_to_intersection(&pass, &geom(), BOUNDING_RADIUS_M);
        assert_eq!(segs.len(), 1);
        assert!((segs[0].min_center_distance_m - 1.8).abs() < 1e-9);
        assert!(segs[0]
            .points
            .iter()
            .all(|p| p.distance_to((0.0, 0.0)) <= BOUNDING_RADIUS_M));

        // In, out to 300 m, back in: two visits.
        let ys = [-100.0, -50.0, 0.0, 150.0, 300.0, 300.0, 150.0, 50.0];
        let pts = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| TracePoint {
                t: i as f64,
                x: 0.0,
                y,
                speed: 5.0,
                heading: 0.0,
            })
            .collect();
        let dumbbell = Trajectory::new("v", pts).unwrap();
        let segs = clip_to_intersection(&dumbbell, &geom(), BOUNDING_RADIUS_M);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].points.len(), 4);
        assert_eq!(segs[1].points.len(), 2);
    }

    #[test]
    fn filter_examples() {
        let cfg = TripConfig::default();
        let mut gap = seg_from_speeds(0.0, &[8.0, 4.0, 0.0, 0.0, 3.0, 6.0]);
        gap.points[5].t += 12.0;
        let gap = TrajectorySegment::from_points("v", &geom(), gap.points);
        assert_eq!(apply_filters(&gap, &cfg).rejection_reason, RejectionReason::SparseGap);

        let rolling = seg_from_speeds(0.0, &[8.0, 6.0, 4.0, 3.0, 5.0, 7.0]);
        assert_eq!(
            apply_filters(&rolling, &cfg).rejection_reason,
            RejectionReason::NoStopPattern
        );

        let mut speeds = vec![8.0, 4.0];
        speeds.extend(std::iter::repeat(0.0).take(146));
        speeds.extend([2.0, 6.0, 8.0]);
        let long = seg_from_speeds(0.0, &speeds);
        assert_eq!(long.duration_s, 150.0);
        assert_eq!(apply_filters(&long, &cfg).rejection_reason, RejectionReason::TooLong);

        let ok = seg_from_speeds(0.0, &[8.0, 4.0, 0.0, 0.0, 3.0, 6.0]);
        assert_eq!(apply_filters(&ok, &cfg), FilterOutcome::accept());

        let mut off = ok.clone();
        off.min_center_distance_m = 40.0;
        assert_eq!(
            apply_filters(&off, &cfg).rejection_reason,
            RejectionReason::NoCenterPassage
        );
    }

    #[test]
    fn gap_threshold_is_inclusive() {
        let cfg = TripConfig::default();
        let mut s = seg_from_speeds(0.0, &[8.0, 4.0, 0.0, 3.0]);
        s.max_gap_s = 10.0;
        assert!(!within_gap_limit(&s, &cfg));
        s.max_gap_s = 9.99;
        assert!(within_gap_limit(&s, &cfg));
        s.duration_s = 120.0;
        assert!(within_duration(&s, &cfg));
    }

    #[test]
    fn extraction_examples() {
        let cfg = TripConfig::default();
        let seg = seg_from_speeds(100.0, &[8.0, 4.0, 0.0, 0.0, 0.0, 0.0, 2.0, 6.0]);
        let ev = extract_stop_events(&seg, &geom(), &cfg);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].stop_start_s, 102.0);
        assert_eq!(ev[0].accel_start_s, 106.0);
        assert_eq!(ev[0].stop_duration_s, 4.0);
        assert_eq!(ev[0].direction, Direction::N);
        assert_eq!(ev[0].movement, Movement::Through);

        let seg = seg_from_speeds(0.0, &[5.0, 0.0, 3.0, 0.0, 0.0, 4.0]);
        let ev = extract_stop_events(&seg, &geom(), &cfg);
        let got: Vec<(f64, f64)> = ev.iter().map(|e| (e.stop_duration_s, e.accel_start_s)).collect();
        assert_eq!(got, vec![(1.0, 2.0), (2.0, 5.0)]);

        let seg = seg_from_speeds(0.0, &[7.0; 10]);
        assert!(extract_stop_events(&seg, &geom(), &cfg).is_empty());
    }

    #[test]
    fn post_center_stops_are_ignored() {
        let cfg = TripConfig::default();
        let pts: Vec<TracePoint> = [(-20.0, 5.0), (-10.0, 5.0), (0.0, 5.0), (10.0, 3.0), (12.0, 0.0), (12.0, 0.0), (14.0, 2.0)]
            .iter()
            .enumerate()
            .map(|(i, &(y, s))| TracePoint { t: i as f64, x: 0.0, y, speed: s, heading: 0.0 })
            .collect();
        let seg = TrajectorySegment::from_points("v", &geom(), pts);
        assert!(extract_stop_events(&seg, &geom(), &cfg).is_empty());
    }

    proptest! {
        #[test]
        fn filter_conjunction(
            speeds in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..15.0], 2..40),
            gaps in prop::collection::vec(prop_oneof![Just(1.0), 1.0f64..14.0], 40),
            min_dist in 0.0f64..40.0,
        ) {
            let cfg = TripConfig::default();
            let mut t = 0.0;
            let pts: Vec<TracePoint> = speeds.iter().enumerate().map(|(i, &s)| {
                if i > 0 { t += gaps[i]; }
                TracePoint { t, x: 0.0, y: -(i as f64), speed: s, heading: 0.0 }
            }).collect();
            let mut seg = TrajectorySegment::from_points("v", &geom(), pts);
            seg.min_center_distance_m = min_dist;

            // Independent restatement of the four criteria.
            let p = &seg.points;
            let gap_ok = p.windows(2).all(|w| w[1].t - w[0].t < 10.0);
            let dur_ok = p.last().unwrap().t - p[0].t <= 120.0;
            let center_ok = min_dist <= 15.24;
            let mut stop_ok = false;
            for j in 1..p.len() {
                if p[j].speed < 0.05 && p[j - 1].speed > p[j].speed {
                    let mut k = j;
                    while k < p.len() && p[k].speed < 0.05 { k += 1; }
                    if k < p.len() { stop_ok = true; }
                }
            }
            let out = apply_filters(&seg, &cfg);
            prop_assert_eq!(out.accepted, gap_ok && dur_ok && center_ok && stop_ok);
            prop_assert_eq!(out.accepted, out.rejection_reason == RejectionReason::None);
            if out.accepted {
                for e in extract_stop_events(&seg, &geom(), &cfg) {
                    prop_assert!(e.stop_duration_s > 0.0);
                    prop_assert!(e.stop_duration_s <= seg.duration_s);
                }
            }
        }
    }
}
