//! Map-based ground-truth scan classification.
//!
//! Each hit beam is tested against the expected analytic ray cast of the
//! permanent line map: points matching their expected segment are long-term
//! features (map, +1); the rest are matched against recent non-map
//! observations to split short-term from dynamic features (both non-map,
//! -1). This labels training data and backs the planner's oracle-label
//! mode.

use crate::error::{Error, Result};
use crate::geom::{Point2, Pose, Segment};
use crate::world::{HitSource, LineWorld, Scan};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClassifierParams {
    /// Observation variance in m^2.
    pub sigma_s: f64,
    /// Map-match probability threshold.
    pub tau_ltf: f64,
    /// Temporal-correspondence probability threshold.
    pub tau_stf: f64,
    /// Number of prior scans retained for short-term matching.
    pub history_window: usize,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self {
            sigma_s: 0.0025, // (0.05 m)^2
            tau_ltf: 0.5,
            tau_stf: 0.5,
            history_window: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FineLabel {
    Ltf,
    Stf,
    Df,
    NoHit,
}

impl FineLabel {
    /// Coarse map/non-map label: +1 for map (LTF and no-hit), -1 otherwise.
    pub fn coarse(self) -> i8 {
        match self {
            FineLabel::Ltf | FineLabel::NoHit => 1,
            FineLabel::Stf | FineLabel::Df => -1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClassifiedScan {
    pub scan: Scan,
    /// Per-beam coarse labels in {-1, +1}.
    pub labels: Vec<i8>,
    pub fine_labels: Vec<FineLabel>,
}

/// Probability that a world-frame point corresponds to its expected map
/// line: `exp(-dist^2 / sigma_s)` with perpendicular distance to the
/// ray-cast-matched segment.
pub fn ltf_probability(point_world: Point2, expected_line: &Segment, sigma_s: f64) -> f64 {
    let d = expected_line.distance_to_point(point_world);
    (-d * d / sigma_s).exp()
}

/// Grid-hashed ring buffer of recent non-map points in the world frame.
/// Holds at most `history_window` scans; nearest-neighbor queries are exact
/// over everything stored.
#[derive(Clone, Debug, Default)]
pub struct ObservationHistory {
    window: usize,
    entries: VecDeque<HistoryEntry>,
    grid: HashMap<(i64, i64), Vec<GridPoint>>,
    n_beams: Option<usize>,
    total_points: usize,
}

#[derive(Clone, Debug)]
struct HistoryEntry {
    step: u64,
    points: Vec<Point2>,
}

#[derive(Clone, Copy, Debug)]
struct GridPoint {
    step: u64,
    p: Point2,
}

/// Uniform hash cell size for nearest-neighbor search, meters.
const NN_BIN: f64 = 0.1;
/// Ring radius beyond which the search falls back to a linear scan.
const NN_MAX_RING: i64 = 64;

impl ObservationHistory {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            ..Self::default()
        }
    }

    pub fn len_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn total_points(&self) -> usize {
        self.total_points
    }

    pub fn iter_points(&self) -> impl Iterator<Item = Point2> + '_ {
        self.entries.iter().flat_map(|e| e.points.iter().copied())
    }

    fn bin_of(p: Point2) -> (i64, i64) {
        ((p.x / NN_BIN).floor() as i64, (p.y / NN_BIN).floor() as i64)
    }

    /// Appends one scan's non-map points, evicting the oldest scan beyond
    /// the window.
    pub fn push(&mut self, step: u64, points: Vec<Point2>) {
        for &p in &points {
            self.grid
                .entry(Self::bin_of(p))
                .or_default()
                .push(GridPoint { step, p });
        }
        self.total_points += points.len();
        self.entries.push_back(HistoryEntry { step, points });
        while self.entries.len() > self.window {
            let old = self.entries.pop_front().unwrap();
            self.total_points -= old.points.len();
            for &p in &old.points {
                if let Some(v) = self.grid.get_mut(&Self::bin_of(p)) {
                    v.retain(|g| g.step != old.step);
                }
            }
        }
    }

    /// Exact nearest stored point to `p`, expanding-ring grid search with a
    /// linear-scan fallback for sparse far-away histories.
    pub fn nearest(&self, p: Point2) -> Option<(Point2, f64)> {
        if self.total_points == 0 {
            return None;
        }
        let (bx, by) = Self::bin_of(p);
        let mut best: Option<(Point2, f64)> = None;
        for ring in 0..=NN_MAX_RING {
            if let Some((_, d)) = best {
                // everything in rings >= ring is at least (ring-1)*bin away
                if d <= (ring - 1).max(0) as f64 * NN_BIN {
                    return best;
                }
            }
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs().max(dy.abs()) != ring {
                        continue;
                    }
                    if let Some(points) = self.grid.get(&(bx + dx, by + dy)) {
                        for g in points {
                            let d = g.p.distance(p);
                            if best.map_or(true, |(_, bd)| d < bd) {
                                best = Some((g.p, d));
                            }
                        }
                    }
                }
            }
        }
        if best.is_some() {
            return best;
        }
        self.iter_points()
            .map(|q| (q, q.distance(p)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }
}

/// Likelihood that `point_now_world` corresponds to some recently observed
/// non-map point: `exp(-||delta||^2 / sigma_s)` against the exact nearest
/// stored point, 0 when the history is empty.
pub fn stf_likelihood(
    point_now_world: Point2,
    history: &ObservationHistory,
    sigma_s: f64,
) -> (f64, Option<Point2>) {
    match history.nearest(point_now_world) {
        None => (0.0, None),
        Some((q, d)) => ((-d * d / sigma_s).exp(), Some(q)),
    }
}

/// Classifies every beam of `scan` taken from the true `pose`, then appends
/// this scan's non-map points to `history`.
pub fn classify_scan_gt(
    world: &LineWorld,
    pose: &Pose,
    scan: &Scan,
    params: &ClassifierParams,
    history: &mut ObservationHistory,
) -> Result<ClassifiedScan> {
    let n = scan.n_beams();
    if let Some(expected) = history.n_beams {
        if expected != n {
            return Err(Error::BeamCountMismatch { expected, got: n });
        }
    } else {
        history.n_beams = Some(n);
    }

    let mut labels = Vec::with_capacity(n);
    let mut fine = Vec::with_capacity(n);
    let mut new_points = Vec::new();
    for j in 0..n {
        let fine_label = match scan.hit_point(pose, j) {
            None => FineLabel::NoHit,
            Some(point) => {
                let angle = scan.beam_angle(pose, j);
                let expected = world.ray_cast(pose, angle, scan.max_range, false)?;
                let p_ltf = match expected.source {
                    Some(HitSource::Segment(i)) => {
                        ltf_probability(point, &world.segments()[i], params.sigma_s)
                    }
                    // no map line along this beam: cannot be a map point
                    _ => 0.0,
                };
                if p_ltf >= params.tau_ltf {
                    FineLabel::Ltf
                } else {
                    let (p_stf, _) = stf_likelihood(point, history, params.sigma_s);
                    new_points.push(point);
                    if p_stf >= params.tau_stf {
                        FineLabel::Stf
                    } else {
                        FineLabel::Df
                    }
                }
            }
        };
        labels.push(fine_label.coarse());
        fine.push(fine_label);
    }
    history.push(scan.timestamp, new_points);
    Ok(ClassifiedScan {
        scan: scan.clone(),
        labels,
        fine_labels: fine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Bounds, ConvexPolygon};
    use crate::world::{SensorSpec, Target};

    #[test]
    fn ltf_probability_closed_forms() {
        let line = Segment::new(Point2::new(0.0, 0.0), Point2::new(10.0, 0.0));
        assert!((ltf_probability(Point2::new(3.0, 0.0), &line, 0.0025) - 1.0).abs() < 1e-15);
        // dist^2 == sigma_s -> exp(-1)
        let sigma: f64 = 0.0025;
        let p = ltf_probability(Point2::new(3.0, sigma.sqrt()), &line, sigma);
        assert!((p - (-1.0f64).exp()).abs() < 1e-12);
        // dist 0.05 m, sigma 0.0025 m^2 -> exp(-1)
        let p = ltf_probability(Point2::new(3.0, 0.05), &line, 0.0025);
        assert!((p - (-1.0f64).exp()).abs() < 1e-12);
        // 1 m off the line is numerically zero
        assert!(ltf_probability(Point2::new(3.0, 1.0), &line, 0.0025) < 1e-100);
    }

    #[test]
    fn stf_identical_point_and_empty_history() {
        let mut history = ObservationHistory::new(10);
        let p = Point2::new(1.25, -0.75);
        assert_eq!(stf_likelihood(p, &history, 0.0025).0, 0.0);
        history.push(0, vec![p, Point2::new(4.0, 4.0)]);
        let (prob, matched) = stf_likelihood(p, &history, 0.0025);
        assert!((prob - 1.0).abs() < 1e-15);
        assert_eq!(matched, Some(p));
    }

    #[test]
    fn history_window_evicts_oldest() {
        let mut history = ObservationHistory::new(2);
        history.push(0, vec![Point2::new(0.0, 0.0)]);
        history.push(1, vec![Point2::new(1.0, 0.0)]);
        history.push(2, vec![Point2::new(2.0, 0.0)]);
        assert_eq!(history.len_entries(), 2);
        // the step-0 point is gone; nearest to origin is now (1, 0)
        let (q, d) = history.nearest(Point2::new(0.0, 0.0)).unwrap();
        assert_eq!(q, Point2::new(1.0, 0.0));
        assert!((d - 1.0).abs() < 1e-12);
    }

    fn room_with_box() -> (LineWorld, SensorSpec) {
        let m = 5.0;
        let corners = [
            Point2::new(-m, -m),
            Point2::new(m, -m),
            Point2::new(m, m),
            Point2::new(-m, m),
        ];
        let segments = (0..4)
            .map(|i| Segment::new(corners[i], corners[(i + 1) % 4]))
            .collect();
        let world = LineWorld::new(
            segments,
            vec![ConvexPolygon::rect(
                Point2::new(2.0, -0.5),
                Point2::new(3.0, 0.5),
            )],
            vec![],
            Bounds::new(Point2::new(-m, -m), Point2::new(m, m)),
            Pose::new(0.0, 0.0, 0.0),
        )
        .unwrap();
        let spec = SensorSpec {
            n_beams: 180,
            lidar_noise_sigma: 0.0,
            ..SensorSpec::default()
        };
        (world, spec)
    }

    #[test]
    fn object_free_noise_free_world_is_all_ltf() {
        let world = crate::world::square_room(5.0);
        let spec = SensorSpec {
            n_beams: 180,
            lidar_noise_sigma: 0.0,
            ..SensorSpec::default()
        };
        let pose = Pose::new(0.5, -0.25, 0.3);
        let scan = world.simulate_scan(&pose, &spec, 0).unwrap();
        let mut history = ObservationHistory::new(10);
        let out =
            classify_scan_gt(&world, &pose, &scan, &ClassifierParams::default(), &mut history)
                .unwrap();
        for (j, f) in out.fine_labels.iter().enumerate() {
            if scan.hits[j] {
                assert_eq!(*f, FineLabel::Ltf, "beam {j}");
            }
        }
        assert!(history.total_points() == 0);
    }

    #[test]
    fn static_object_becomes_stf_on_second_scan() {
        let (world, spec) = room_with_box();
        let pose = Pose::new(0.0, 0.0, 0.0);
        let params = ClassifierParams::default();
        let mut history = ObservationHistory::new(10);

        let mut scan1 = world.simulate_scan(&pose, &spec, 0).unwrap();
        scan1.timestamp = 1;
        let out1 = classify_scan_gt(&world, &pose, &scan1, &params, &mut history).unwrap();
        // first scan of a run can never contain an STF
        assert!(out1.fine_labels.iter().all(|f| *f != FineLabel::Stf));
        let df_beams: Vec<usize> = out1
            .fine_labels
            .iter()
            .enumerate()
            .filter(|(_, f)| **f == FineLabel::Df)
            .map(|(j, _)| j)
            .collect();
        assert!(!df_beams.is_empty(), "object beams should be non-map");

        let mut scan2 = world.simulate_scan(&pose, &spec, 1).unwrap();
        scan2.timestamp = 2;
        let out2 = classify_scan_gt(&world, &pose, &scan2, &params, &mut history).unwrap();
        for &j in &df_beams {
            assert_eq!(out2.fine_labels[j], FineLabel::Stf, "beam {j}");
            assert_eq!(out2.labels[j], -1);
        }
    }

    #[test]
    fn labels_are_deterministic() {
        let (world, spec) = room_with_box();
        let pose = Pose::new(-1.0, 1.0, 0.4);
        let scan = world.simulate_scan(&pose, &spec, 9).unwrap();
        let params = ClassifierParams::default();
        let mut h1 = ObservationHistory::new(10);
        let mut h2 = ObservationHistory::new(10);
        let a = classify_scan_gt(&world, &pose, &scan, &params, &mut h1).unwrap();
        let b = classify_scan_gt(&world, &pose, &scan, &params, &mut h2).unwrap();
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn beam_count_mismatch_is_domain_error() {
        let (world, spec) = room_with_box();
        let pose = Pose::new(0.0, 0.0, 0.0);
        let params = ClassifierParams::default();
        let mut history = ObservationHistory::new(10);
        let scan = world.simulate_scan(&pose, &spec, 0).unwrap();
        classify_scan_gt(&world, &pose, &scan, &params, &mut history).unwrap();
        let small = SensorSpec {
            n_beams: 64,
            ..spec
        };
        let scan2 = world.simulate_scan(&pose, &small, 0).unwrap();
        assert!(matches!(
            classify_scan_gt(&world, &pose, &scan2, &params, &mut history),
            Err(Error::BeamCountMismatch { .. })
        ));
    }

    #[test]
    fn no_hit_beams_labeled_map() {
        let world = LineWorld::new(
            vec![],
            vec![],
            vec![Target {
                center: Point2::new(1.0, 1.0),
                radius: 0.2,
            }],
            Bounds::new(Point2::new(-8.0, -8.0), Point2::new(8.0, 8.0)),
            Pose::new(0.0, 0.0, 0.0),
        )
        .unwrap();
        let spec = SensorSpec {
            n_beams: 32,
            lidar_noise_sigma: 0.0,
            ..SensorSpec::default()
        };
        let pose = Pose::new(0.0, 0.0, 0.0);
        let scan = world.simulate_scan(&pose, &spec, 0).unwrap();
        let mut history = ObservationHistory::new(10);
        let out =
            classify_scan_gt(&world, &pose, &scan, &ClassifierParams::default(), &mut history)
                .unwrap();
        assert!(out.fine_labels.iter().all(|f| *f == FineLabel::NoHit));
        assert!(out.labels.iter().all(|&l| l == 1));
    }
}
