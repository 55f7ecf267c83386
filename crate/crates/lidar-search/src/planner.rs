//! Candidate viewpoint generation, utility scoring, selection, and the full
//! search episode loop.
//!
//! Candidates are sampled at frontier centroids of both search maps, four
//! cardinal headings each. Utility is a weighted sum of four terms: path
//! distance (penalty), expected unknown cells discovered, frontier
//! centroids near the path, and uninspected non-map points brought into
//! view. Setting the non-map weight to zero (or disabling labels) reduces
//! the planner to plain multisensor frontier exploration.

use crate::classify_gt::{classify_scan_gt, ClassifierParams, ObservationHistory};
use crate::error::{Error, Result};
use crate::geom::{Point2, Pose, Segment};
use crate::mapping::{extract_frontiers, CellState, Frontier, SearchMap, SensorKind};
use crate::par;
use crate::path::{PlannedPath, ReachField};
use crate::seeding;
use crate::tcn::{HistoryBuffer, TcnModel};
use crate::world::{LineWorld, PathWalker, SensorSpec};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

/// Where per-beam labels come from during an episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelMode {
    /// Map-based classifier on the true pose (oracle labels).
    GroundTruth,
    /// Learned classifier, auto-regressive.
    Learned,
    /// No labels at all; the non-map registry stays empty (MFE baseline).
    None,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct UtilityWeights {
    pub w_dist: f64,
    pub w_unknown: f64,
    pub w_frontier_path: f64,
    pub w_nonmap: f64,
    /// Radius around the path polyline for the frontier-proximity term.
    pub frontier_path_radius: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self {
            w_dist: 1.0,
            w_unknown: 0.5,
            w_frontier_path: 2.0,
            w_nonmap: 5.0,
            frontier_path_radius: 1.5,
        }
    }
}

impl UtilityWeights {
    pub fn validate(&self) -> Result<()> {
        let ws = [
            self.w_dist,
            self.w_unknown,
            self.w_frontier_path,
            self.w_nonmap,
        ];
        if ws.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidConfig("utility weights must be >= 0".into()));
        }
        if ws.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidConfig(
                "at least one utility weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The four utility term values, stored for diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilityTerms {
    pub dist_penalty: f64,
    pub unknown_reward: f64,
    pub frontier_path_reward: f64,
    pub nonmap_reward: f64,
}

/// Candidate pose at a frontier centroid with one of four headings.
#[derive(Clone, Debug)]
pub struct Viewpoint {
    pub pose: Pose,
    pub source_centroid: Point2,
    /// 0..=3 mapping to headings {0, pi/2, pi, -pi/2} in the map frame.
    pub orientation_index: u8,
    pub terms: UtilityTerms,
    pub utility: f64,
}

pub const ORIENTATIONS: [f64; 4] = [0.0, FRAC_PI_2, PI, -FRAC_PI_2];

/// Grid-binned accumulation of world-frame non-map points. One
/// representative per bin; a point stops rewarding once any executed pose
/// has had it inside its visual cone.
#[derive(Clone, Debug)]
pub struct NonMapRegistry {
    bin: f64,
    points: HashMap<(i64, i64), RegistryPoint>,
}

#[derive(Clone, Copy, Debug)]
struct RegistryPoint {
    p: Point2,
    inspected: bool,
}

/// Occlusion slack when deciding whether an executed pose saw a registry
/// point; covers sensor noise around the surface the point sits on.
const INSPECT_TOL: f64 = 0.05;

impl NonMapRegistry {
    pub fn new(bin: f64) -> Self {
        Self {
            bin,
            points: HashMap::new(),
        }
    }

    fn bin_of(&self, p: Point2) -> (i64, i64) {
        (
            (p.x / self.bin).floor() as i64,
            (p.y / self.bin).floor() as i64,
        )
    }

    /// Inserts a non-map point unless its bin already holds one.
    pub fn insert(&mut self, p: Point2) {
        self.points
            .entry(self.bin_of(p))
            .or_insert(RegistryPoint {
                p,
                inspected: false,
            });
    }

    /// Marks every point currently visible from `pose` as inspected.
    pub fn mark_inspected(&mut self, world: &LineWorld, pose: &Pose, spec: &SensorSpec) {
        for rp in self.points.values_mut() {
            if !rp.inspected && world.sees_point(pose, spec, rp.p, INSPECT_TOL) {
                rp.inspected = true;
            }
        }
    }

    /// Number of uninspected points inside the candidate's visual cone with
    /// map-based line of sight (occupied cells occlude, except the cell the
    /// point itself sits in).
    pub fn uninspected_visible(
        &self,
        candidate: &Pose,
        spec: &SensorSpec,
        lidar_map: &SearchMap,
    ) -> usize {
        self.points
            .values()
            .filter(|rp| {
                !rp.inspected
                    && LineWorld::in_cone(candidate, spec, rp.p)
                    && lidar_map.los_not_occluded(candidate.position(), rp.p)
            })
            .count()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn uninspected(&self) -> usize {
        self.points.values().filter(|rp| !rp.inspected).count()
    }

    pub fn iter_points(&self) -> impl Iterator<Item = (Point2, bool)> + '_ {
        self.points.values().map(|rp| (rp.p, rp.inspected))
    }
}

/// Expands frontier centroids from both maps into candidate viewpoints,
/// four cardinal headings each. Candidates standing on occupied cells are
/// dropped; unreachable ones fall out at scoring time.
pub fn generate_candidates(
    lidar_frontiers: &[Frontier],
    visual_frontiers: &[Frontier],
    lidar_map: &SearchMap,
) -> Vec<Viewpoint> {
    let mut out = Vec::new();
    for frontier in lidar_frontiers.iter().chain(visual_frontiers) {
        let c = frontier.centroid;
        match lidar_map.state_at(c) {
            None | Some(CellState::Occupied) => continue,
            _ => {}
        }
        for (i, theta) in ORIENTATIONS.iter().enumerate() {
            out.push(Viewpoint {
                pose: Pose::new(c.x, c.y, *theta),
                source_centroid: c,
                orientation_index: i as u8,
                terms: UtilityTerms::default(),
                utility: 0.0,
            });
        }
    }
    out
}

/// Read-only state needed to score one candidate.
pub struct UtilityContext<'a> {
    pub lidar_map: &'a SearchMap,
    pub visual_map: &'a SearchMap,
    pub registry: &'a NonMapRegistry,
    /// Frontier centroids from both maps, for the path-proximity term.
    pub centroids: &'a [Point2],
    pub weights: &'a UtilityWeights,
    pub spec: &'a SensorSpec,
}

fn dist_point_to_polyline(p: Point2, pts: &[Point2]) -> f64 {
    if pts.is_empty() {
        return f64::INFINITY;
    }
    if pts.len() == 1 {
        return p.distance(pts[0]);
    }
    pts.windows(2)
        .map(|w| Segment::new(w[0], w[1]).distance_to_point(p))
        .fold(f64::INFINITY, f64::min)
}

/// Scores one candidate given the robot's reach field. The scored
/// viewpoint's pose is moved to the path's arrival point (same heading).
/// Unreachable candidates are a domain error; filter them with
/// [`score_candidates`].
pub fn compute_utility(
    candidate: &Viewpoint,
    field: &ReachField,
    ctx: &UtilityContext,
) -> Result<(Viewpoint, PlannedPath)> {
    let path = field
        .path_to(ctx.lidar_map, candidate.pose.position())
        .ok_or(Error::UnreachableCandidate)?;
    let arrival = path
        .poses
        .last()
        .map(|p| Pose::new(p.x, p.y, candidate.pose.theta))
        .unwrap_or(candidate.pose);
    let pts = path.points();
    let terms = UtilityTerms {
        dist_penalty: path.length,
        unknown_reward: ctx.visual_map.count_unknown_visible(&arrival, ctx.spec) as f64,
        frontier_path_reward: ctx
            .centroids
            .iter()
            .filter(|c| dist_point_to_polyline(**c, &pts) <= ctx.weights.frontier_path_radius)
            .count() as f64,
        nonmap_reward: ctx
            .registry
            .uninspected_visible(&arrival, ctx.spec, ctx.lidar_map) as f64,
    };
    let w = ctx.weights;
    let utility = -w.w_dist * terms.dist_penalty
        + w.w_unknown * terms.unknown_reward
        + w.w_frontier_path * terms.frontier_path_reward
        + w.w_nonmap * terms.nonmap_reward;
    let scored = Viewpoint {
        pose: arrival,
        source_centroid: candidate.source_centroid,
        orientation_index: candidate.orientation_index,
        terms,
        utility,
    };
    Ok((scored, path))
}

/// Scores all reachable candidates (read-only, fans out in parallel);
/// unreachable candidates are silently dropped.
pub fn score_candidates(
    candidates: &[Viewpoint],
    field: &ReachField,
    ctx: &UtilityContext,
) -> Vec<(Viewpoint, PlannedPath)> {
    par::map_collect(candidates, |c| compute_utility(c, field, ctx).ok())
        .into_iter()
        .flatten()
        .collect()
}

/// Argmax utility; ties broken by shorter path, then lower orientation
/// index, then input order. Returns `None` on an empty list, which signals
/// exploration complete / target not found.
pub fn select_viewpoint(scored: &[(Viewpoint, PlannedPath)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (vp, _)) in scored.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let (bv, _) = &scored[b];
                vp.utility > bv.utility
                    || (vp.utility == bv.utility
                        && (vp.terms.dist_penalty < bv.terms.dist_penalty
                            || (vp.terms.dist_penalty == bv.terms.dist_penalty
                                && vp.orientation_index < bv.orientation_index)))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Episode loop
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub weights: UtilityWeights,
    pub label_mode: LabelMode,
    /// Simulated-time budget in seconds.
    pub budget_s: f64,
    pub seed: u64,
    pub resolution: f64,
    pub min_frontier_size: usize,
    pub registry_bin: f64,
    pub gt_params: ClassifierParams,
}

impl EpisodeConfig {
    pub fn new(label_mode: LabelMode, budget_s: f64, seed: u64) -> Self {
        Self {
            weights: UtilityWeights::default(),
            label_mode,
            budget_s,
            seed,
            resolution: 0.1,
            min_frontier_size: 5,
            registry_bin: 0.2,
            gt_params: ClassifierParams::default(),
        }
    }
}

/// One planning decision, logged per replan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    pub pose: [f64; 3],
    pub viewpoint: [f64; 3],
    pub orientation_index: u8,
    pub utility: f64,
    pub dist_penalty: f64,
    pub unknown_reward: f64,
    pub frontier_path_reward: f64,
    pub nonmap_reward: f64,
    pub path_length: f64,
    pub candidates: usize,
    pub registry_size: usize,
    pub registry_uninspected: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeOutcome {
    /// Target seen by the visual sensor.
    Found,
    /// No candidate viewpoints remained before the budget ran out.
    Explored,
    /// Simulated-time budget exhausted.
    TimedOut,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub outcome: EpisodeOutcome,
    /// Simulated time of detection, when found.
    pub detection_time: Option<f64>,
    /// Simulated time at termination.
    pub elapsed: f64,
    pub detected_target: Option<usize>,
    pub steps: Vec<StepRecord>,
    /// Pose at every executed scan, planning scans included.
    pub executed: Vec<[f64; 3]>,
    pub scan_count: usize,
    pub registry_size: usize,
}

impl EpisodeResult {
    pub fn found(&self) -> bool {
        self.outcome == EpisodeOutcome::Found
    }

    /// Detection time with the benchmark failure convention: failures count
    /// as the full budget.
    pub fn detection_time_or(&self, budget: f64) -> f64 {
        self.detection_time.unwrap_or(budget)
    }

    /// Canonical bytes of the behavioral trace: executed poses, chosen
    /// viewpoints, times, and outcome. Diagnostics that do not influence
    /// behavior (term values, registry sizes) are excluded, so label-free
    /// runs can be compared byte-for-byte against zero-non-map-weight runs.
    pub fn behavior_trace(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let push_f64 = |buf: &mut Vec<u8>, v: f64| buf.extend_from_slice(&v.to_le_bytes());
        for p in &self.executed {
            for v in p {
                push_f64(&mut out, *v);
            }
        }
        for s in &self.steps {
            push_f64(&mut out, s.time);
            for v in s.viewpoint {
                push_f64(&mut out, v);
            }
            out.push(s.orientation_index);
            push_f64(&mut out, s.path_length);
        }
        push_f64(&mut out, self.elapsed);
        push_f64(&mut out, self.detection_time.unwrap_or(-1.0));
        out.push(match self.outcome {
            EpisodeOutcome::Found => 1,
            EpisodeOutcome::Explored => 2,
            EpisodeOutcome::TimedOut => 3,
        });
        out
    }

    /// JSON-lines dump of the per-step log.
    pub fn steps_jsonl(&self) -> String {
        self.steps
            .iter()
            .map(|s| serde_json::to_string(s).expect("step serializes"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Per-episode mutable state bundled for the observation closure.
struct EpisodeState<'a> {
    world: &'a LineWorld,
    spec: &'a SensorSpec,
    config: &'a EpisodeConfig,
    lidar_map: SearchMap,
    visual_map: SearchMap,
    registry: NonMapRegistry,
    gt_history: ObservationHistory,
    tcn_buffer: Option<HistoryBuffer>,
    model: Option<&'a TcnModel>,
    scan_idx: u64,
    executed: Vec<[f64; 3]>,
}

impl<'a> EpisodeState<'a> {
    /// Scan, classify, update maps and registry, check detection.
    fn observe(&mut self, pose: &Pose) -> Result<Option<usize>> {
        let mut scan = self.world.simulate_scan(
            pose,
            self.spec,
            seeding::mix(self.config.seed, self.scan_idx),
        )?;
        scan.timestamp = self.scan_idx;
        self.scan_idx += 1;

        let labels: Option<Vec<i8>> = match self.config.label_mode {
            LabelMode::GroundTruth => Some(
                classify_scan_gt(
                    self.world,
                    pose,
                    &scan,
                    &self.config.gt_params,
                    &mut self.gt_history,
                )?
                .labels,
            ),
            LabelMode::Learned => {
                let model = self.model.expect("learned mode requires a model");
                let buffer = self.tcn_buffer.as_mut().expect("buffer present");
                Some(model.infer_step(buffer, pose, &scan)?)
            }
            LabelMode::None => None,
        };

        self.lidar_map.update_lidar(pose, &scan);
        self.visual_map.update_visual(pose, &scan, self.spec);

        if let Some(labels) = &labels {
            for (j, &label) in labels.iter().enumerate() {
                if label == -1 {
                    if let Some(p) = scan.hit_point(pose, j) {
                        self.registry.insert(p);
                    }
                }
            }
            self.registry.mark_inspected(self.world, pose, self.spec);
        }

        self.executed.push([pose.x, pose.y, pose.theta]);
        Ok(self.world.check_detection(pose, self.spec).first().copied())
    }
}

/// Episode result plus the final per-run state, for map export and
/// registry inspection.
#[derive(Clone, Debug)]
pub struct EpisodeArtifacts {
    pub result: EpisodeResult,
    pub lidar_map: SearchMap,
    pub visual_map: SearchMap,
    /// Registry contents as (world point, inspected) pairs.
    pub registry_points: Vec<(Point2, bool)>,
}

/// Runs one full search episode. Fully deterministic given the seed.
pub fn search_episode(
    world: &LineWorld,
    spec: &SensorSpec,
    config: &EpisodeConfig,
    model: Option<&TcnModel>,
) -> Result<EpisodeResult> {
    search_episode_full(world, spec, config, model).map(|a| a.result)
}

/// As [`search_episode`], also returning the final maps and registry.
pub fn search_episode_full(
    world: &LineWorld,
    spec: &SensorSpec,
    config: &EpisodeConfig,
    model: Option<&TcnModel>,
) -> Result<EpisodeArtifacts> {
    config.weights.validate()?;
    spec.validate()?;
    if config.label_mode == LabelMode::Learned && model.is_none() {
        return Err(Error::InvalidConfig(
            "learned label mode requires a trained model".into(),
        ));
    }
    let tcn_buffer = match (config.label_mode, model) {
        (LabelMode::Learned, Some(m)) => Some(HistoryBuffer::new(m.meta.n_beams, m.meta.k)),
        _ => None,
    };
    let mut state = EpisodeState {
        world,
        spec,
        config,
        lidar_map: SearchMap::for_world(world, config.resolution, SensorKind::Lidar),
        visual_map: SearchMap::for_world(world, config.resolution, SensorKind::Visual),
        registry: NonMapRegistry::new(config.registry_bin),
        gt_history: ObservationHistory::new(config.gt_params.history_window),
        tcn_buffer,
        model,
        scan_idx: 0,
        executed: Vec::new(),
    };
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut pose = world.start_pose();
    let mut time = 0.0f64;
    let period = 1.0 / spec.scan_rate_hz;
    let budget = config.budget_s;

    let finish = |state: EpisodeState,
                  steps: Vec<StepRecord>,
                  outcome: EpisodeOutcome,
                  elapsed: f64,
                  detection_time: Option<f64>,
                  target: Option<usize>| {
        let result = EpisodeResult {
            outcome,
            detection_time,
            elapsed,
            detected_target: target,
            registry_size: state.registry.len(),
            scan_count: state.scan_idx as usize,
            steps,
            executed: state.executed,
        };
        Ok(EpisodeArtifacts {
            result,
            registry_points: state.registry.iter_points().collect(),
            lidar_map: state.lidar_map,
            visual_map: state.visual_map,
        })
    };

    // initial observation at t = 0
    if let Some(t) = state.observe(&pose)? {
        return finish(state, steps, EpisodeOutcome::Found, 0.0, Some(0.0), Some(t));
    }

    loop {
        let lidar_frontiers = extract_frontiers(&state.lidar_map, config.min_frontier_size);
        let visual_frontiers = extract_frontiers(&state.visual_map, config.min_frontier_size);
        let candidates =
            generate_candidates(&lidar_frontiers, &visual_frontiers, &state.lidar_map);
        if candidates.is_empty() {
            return finish(state, steps, EpisodeOutcome::Explored, time, None, None);
        }
        let centroids: Vec<Point2> = lidar_frontiers
            .iter()
            .chain(&visual_frontiers)
            .map(|f| f.centroid)
            .collect();
        let field = ReachField::compute(&state.lidar_map, pose.position())?;
        let ctx = UtilityContext {
            lidar_map: &state.lidar_map,
            visual_map: &state.visual_map,
            registry: &state.registry,
            centroids: &centroids,
            weights: &config.weights,
            spec,
        };
        let scored = score_candidates(&candidates, &field, &ctx);
        let best = match select_viewpoint(&scored) {
            Some(i) => i,
            None => return finish(state, steps, EpisodeOutcome::Explored, time, None, None),
        };
        let (viewpoint, path) = &scored[best];
        steps.push(StepRecord {
            time,
            pose: [pose.x, pose.y, pose.theta],
            viewpoint: [viewpoint.pose.x, viewpoint.pose.y, viewpoint.pose.theta],
            orientation_index: viewpoint.orientation_index,
            utility: viewpoint.utility,
            dist_penalty: viewpoint.terms.dist_penalty,
            unknown_reward: viewpoint.terms.unknown_reward,
            frontier_path_reward: viewpoint.terms.frontier_path_reward,
            nonmap_reward: viewpoint.terms.nonmap_reward,
            path_length: path.length,
            candidates: candidates.len(),
            registry_size: state.registry.len(),
            registry_uninspected: state.registry.uninspected(),
        });

        if path.length == 0.0 {
            // already at the viewpoint: rotate in place, spend one scan period
            if time + period > budget + 1e-9 {
                return finish(state, steps, EpisodeOutcome::TimedOut, budget, None, None);
            }
            time += period;
            pose = Pose::new(viewpoint.pose.x, viewpoint.pose.y, viewpoint.pose.theta);
            if let Some(t) = state.observe(&pose)? {
                return finish(
                    state,
                    steps,
                    EpisodeOutcome::Found,
                    time,
                    Some(time),
                    Some(t),
                );
            }
            continue;
        }

        // drive the leg, scanning every period and checking detection
        let mut leg_poses = path.poses.clone();
        if let Some(last) = leg_poses.last_mut() {
            last.theta = viewpoint.pose.theta;
        }
        let walker = PathWalker::new(&leg_poses, spec);
        let duration = walker.duration();
        let mut scanned_at_arrival = false;
        for i in 1..=walker.scan_count() {
            let t_i = i as f64 * period;
            if time + t_i > budget + 1e-9 {
                return finish(state, steps, EpisodeOutcome::TimedOut, budget, None, None);
            }
            pose = walker.pose_at(t_i);
            if let Some(t) = state.observe(&pose)? {
                return finish(
                    state,
                    steps,
                    EpisodeOutcome::Found,
                    time + t_i,
                    Some(time + t_i),
                    Some(t),
                );
            }
            scanned_at_arrival = t_i >= duration - 1e-12;
        }
        if time + duration > budget + 1e-9 {
            return finish(state, steps, EpisodeOutcome::TimedOut, budget, None, None);
        }
        time += duration;
        pose = walker.pose_at(duration);
        if !scanned_at_arrival {
            // fresh scan at the viewpoint before replanning
            if let Some(t) = state.observe(&pose)? {
                return finish(
                    state,
                    steps,
                    EpisodeOutcome::Found,
                    time,
                    Some(time),
                    Some(t),
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Bounds, ConvexPolygon, GridFrame};
    use crate::world::Target;

    fn free_map(w: usize, h: usize) -> SearchMap {
        let frame = GridFrame {
            origin: Point2::new(0.0, 0.0),
            resolution: 0.1,
            width: w,
            height: h,
        };
        let mut map = SearchMap::new(frame, SensorKind::Lidar);
        for cy in 0..h {
            for cx in 0..w {
                map.set(cx, cy, CellState::Free);
            }
        }
        map
    }

    fn frontier_at(c: Point2) -> Frontier {
        Frontier {
            cells: vec![],
            centroid: c,
            source: SensorKind::Lidar,
        }
    }

    #[test]
    fn candidate_fanout_is_four_per_centroid() {
        let map = free_map(50, 50);
        let lidar = vec![frontier_at(Point2::new(1.0, 1.0)), frontier_at(Point2::new(2.0, 2.0))];
        let visual = vec![frontier_at(Point2::new(3.0, 3.0))];
        let candidates = generate_candidates(&lidar, &visual, &map);
        assert_eq!(candidates.len(), 12);
        assert!(generate_candidates(&[], &[], &map).is_empty());
        for (i, c) in candidates.iter().enumerate() {
            assert_eq!(c.orientation_index as usize, i % 4);
            assert!(
                (c.pose.theta - crate::geom::normalize_angle(ORIENTATIONS[i % 4])).abs() < 1e-12
            );
        }
    }

    #[test]
    fn occupied_candidate_dropped() {
        let mut map = free_map(50, 50);
        map.set(10, 10, CellState::Occupied);
        let lidar = vec![frontier_at(map.frame.cell_center(10, 10))];
        assert!(generate_candidates(&lidar, &[], &map).is_empty());
    }

    #[test]
    fn nonmap_term_monotonicity_and_scaling_invariance() {
        let map = free_map(60, 60);
        let visual = {
            let frame = map.frame;
            SearchMap::new(frame, SensorKind::Visual)
        };
        let mut registry = NonMapRegistry::new(0.2);
        // cluster of uninspected points around (4, 3)
        for i in 0..10 {
            registry.insert(Point2::new(4.0 + 0.25 * i as f64, 3.0));
        }
        let spec = SensorSpec::default();
        let weights = UtilityWeights::default();
        let field = ReachField::compute(&map, Point2::new(0.55, 0.55)).unwrap();
        // candidate A looks at the cluster, candidate B looks away
        let a = Viewpoint {
            pose: Pose::new(3.05, 3.05, 0.0),
            source_centroid: Point2::new(3.05, 3.05),
            orientation_index: 0,
            terms: UtilityTerms::default(),
            utility: 0.0,
        };
        let b = Viewpoint {
            pose: Pose::new(3.05, 3.05, PI),
            source_centroid: Point2::new(3.05, 3.05),
            orientation_index: 2,
            terms: UtilityTerms::default(),
            utility: 0.0,
        };
        let centroids: Vec<Point2> = vec![];
        let ctx = UtilityContext {
            lidar_map: &map,
            visual_map: &visual,
            registry: &registry,
            centroids: &centroids,
            weights: &weights,
            spec: &spec,
        };
        let (sa, _) = compute_utility(&a, &field, &ctx).unwrap();
        let (sb, _) = compute_utility(&b, &field, &ctx).unwrap();
        assert!(sa.terms.nonmap_reward > sb.terms.nonmap_reward);
        assert!(sa.utility > sb.utility, "seeing candidate must win");

        // scaling all weights preserves the argmax
        let scaled = UtilityWeights {
            w_dist: weights.w_dist * 3.0,
            w_unknown: weights.w_unknown * 3.0,
            w_frontier_path: weights.w_frontier_path * 3.0,
            w_nonmap: weights.w_nonmap * 3.0,
            frontier_path_radius: weights.frontier_path_radius,
        };
        let ctx3 = UtilityContext {
            weights: &scaled,
            ..ctx
        };
        let (sa3, pa3) = compute_utility(&a, &field, &ctx3).unwrap();
        let (sb3, pb3) = compute_utility(&b, &field, &ctx3).unwrap();
        let pick = select_viewpoint(&[(sa.clone(), pa3.clone()), (sb.clone(), pb3.clone())]);
        let pick3 = select_viewpoint(&[(sa3, pa3), (sb3, pb3)]);
        assert_eq!(pick, pick3);
        assert_eq!(pick, Some(0));
    }

    #[test]
    fn select_tie_breaks_on_path_then_orientation() {
        let mk = |utility: f64, dist: f64, orient: u8| {
            (
                Viewpoint {
                    pose: Pose::new(0.0, 0.0, 0.0),
                    source_centroid: Point2::new(0.0, 0.0),
                    orientation_index: orient,
                    terms: UtilityTerms {
                        dist_penalty: dist,
                        ..UtilityTerms::default()
                    },
                    utility,
                },
                PlannedPath {
                    poses: vec![],
                    length: dist,
                },
            )
        };
        let scored = vec![mk(5.0, 2.0, 1), mk(5.0, 1.0, 3), mk(5.0, 1.0, 2), mk(4.0, 0.1, 0)];
        // equal utility: shorter path wins; equal path: lower orientation
        assert_eq!(select_viewpoint(&scored), Some(2));
        assert_eq!(select_viewpoint(&[]), None);
        // dominated candidate never selected
        let dominated = vec![mk(1.0, 5.0, 0), mk(2.0, 1.0, 1)];
        assert_eq!(select_viewpoint(&dominated), Some(1));
    }

    fn sealed_room_world(targets: Vec<Target>) -> LineWorld {
        let m = 3.0;
        let corners = [
            Point2::new(-m, -m),
            Point2::new(m, -m),
            Point2::new(m, m),
            Point2::new(-m, m),
        ];
        let segments = (0..4)
            .map(|i| Segment::new(corners[i], corners[(i + 1) % 4]))
            .collect();
        LineWorld::new(
            segments,
            vec![],
            targets,
            Bounds::new(Point2::new(-m, -m), Point2::new(m, m)),
            Pose::new(0.0, 0.0, 0.0),
        )
        .unwrap()
    }

    fn fast_spec() -> SensorSpec {
        SensorSpec {
            n_beams: 180,
            lidar_noise_sigma: 0.0,
            ..SensorSpec::default()
        }
    }

    #[test]
    fn target_in_initial_cone_found_at_time_zero() {
        let world = sealed_room_world(vec![Target {
            center: Point2::new(1.0, 0.0),
            radius: 0.2,
        }]);
        let spec = fast_spec();
        let config = EpisodeConfig::new(LabelMode::GroundTruth, 60.0, 0);
        let result = search_episode(&world, &spec, &config, None).unwrap();
        assert_eq!(result.outcome, EpisodeOutcome::Found);
        assert_eq!(result.detection_time, Some(0.0));
        assert_eq!(result.detected_target, Some(0));
    }

    #[test]
    fn sealed_empty_room_terminates_explored() {
        let world = sealed_room_world(vec![]);
        let spec = fast_spec();
        let config = EpisodeConfig::new(LabelMode::None, 120.0, 0);
        let result = search_episode(&world, &spec, &config, None).unwrap();
        assert_eq!(result.outcome, EpisodeOutcome::Explored);
        assert!(result.elapsed < 120.0);
    }

    #[test]
    fn hidden_target_found_behind_occluder() {
        // target behind a box, visible only from the far side
        let m = 4.0;
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
                Point2::new(1.0, -0.8),
                Point2::new(1.6, 0.8),
            )],
            vec![Target {
                center: Point2::new(2.4, 0.0),
                radius: 0.2,
            }],
            Bounds::new(Point2::new(-m, -m), Point2::new(m, m)),
            Pose::new(-2.0, 0.0, PI),
        )
        .unwrap();
        let spec = fast_spec();
        let config = EpisodeConfig::new(LabelMode::GroundTruth, 120.0, 3);
        let result = search_episode(&world, &spec, &config, None).unwrap();
        assert_eq!(result.outcome, EpisodeOutcome::Found, "{result:?}");
        assert!(result.detection_time.unwrap() > 0.0);
        assert!(!result.steps.is_empty());
        // registry collected non-map evidence from the box
        assert!(result.registry_size > 0);
    }

    #[test]
    fn none_mode_matches_zero_nonmap_weight() {
        let world = sealed_room_world(vec![Target {
            center: Point2::new(-2.0, -2.0),
            radius: 0.15,
        }]);
        let spec = fast_spec();
        let mut cfg_none = EpisodeConfig::new(LabelMode::None, 90.0, 11);
        cfg_none.weights.w_nonmap = 0.0;
        let mut cfg_gt = EpisodeConfig::new(LabelMode::GroundTruth, 90.0, 11);
        cfg_gt.weights.w_nonmap = 0.0;
        let a = search_episode(&world, &spec, &cfg_none, None).unwrap();
        let b = search_episode(&world, &spec, &cfg_gt, None).unwrap();
        assert_eq!(a.behavior_trace(), b.behavior_trace());
        assert_eq!(a.outcome, b.outcome);
    }
}
