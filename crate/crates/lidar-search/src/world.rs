//! Ground-truth environment, robot kinematics, and both sensors.
//!
//! The world is a vector line-segment map (the permanent structure) plus
//! convex polygon objects (non-permanent obstacles) and visual search
//! targets. Rays are cast analytically against segments and object edges
//! through a uniform-grid spatial index; the 360° LiDAR and the cone-FoV
//! visual sensor are both derived from that cast.

use crate::error::{Error, Result};
use crate::geom::{angle_diff, normalize_angle, Bounds, ConvexPolygon, Point2, Pose, Segment};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;

/// Sensor and motion parameters shared by the simulator and the planner.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SensorSpec {
    /// Number of LiDAR beams per 360° scan.
    pub n_beams: usize,
    pub lidar_max_range: f64,
    /// Range-additive Gaussian noise sigma in meters (0 disables noise).
    pub lidar_noise_sigma: f64,
    /// Full opening angle of the visual cone, radians.
    pub visual_fov_angle: f64,
    pub visual_max_range: f64,
    /// Scans per second of simulated time.
    pub scan_rate_hz: f64,
    /// Robot translation speed for the motion model, m/s.
    pub v_robot: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            n_beams: 897,
            lidar_max_range: 10.0,
            lidar_noise_sigma: 0.01,
            visual_fov_angle: 60f64.to_radians(),
            visual_max_range: 4.0,
            scan_rate_hz: 5.0,
            v_robot: 0.5,
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_beams > 0
            && self.lidar_max_range > 0.0
            && self.lidar_noise_sigma >= 0.0
            && self.visual_fov_angle > 0.0
            && self.visual_fov_angle < std::f64::consts::PI
            && self.visual_max_range > 0.0
            && self.scan_rate_hz > 0.0
            && self.v_robot > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "sensor spec fields out of range".into(),
            ))
        }
    }
}

/// One 360° LiDAR scan. Beam `j` points at `theta + 2*pi*j/n_beams`,
/// counter-clockwise, beam 0 along the robot heading.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scan {
    pub ranges: Vec<f64>,
    /// `false` where the beam reached max range without a hit.
    pub hits: Vec<bool>,
    pub max_range: f64,
    /// Step index assigned by the caller.
    pub timestamp: u64,
}

impl Scan {
    pub fn n_beams(&self) -> usize {
        self.ranges.len()
    }

    pub fn beam_angle(&self, pose: &Pose, beam: usize) -> f64 {
        normalize_angle(pose.theta + TAU * beam as f64 / self.n_beams() as f64)
    }

    /// World-frame hit point of a beam, `None` for no-hit beams.
    pub fn hit_point(&self, pose: &Pose, beam: usize) -> Option<Point2> {
        if !self.hits[beam] {
            return None;
        }
        let a = self.beam_angle(pose, beam);
        Some(pose.position() + Point2::from_angle(a) * self.ranges[beam])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub center: Point2,
    pub radius: f64,
}

/// Which primitive set produced a ray hit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HitSource {
    /// Index into the world's segment list.
    Segment(usize),
    /// Index into the world's object list.
    Object(usize),
}

/// Result of an analytic ray cast, range capped at the query's max range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayCast {
    pub range: f64,
    /// `None` when no primitive was hit within max range.
    pub source: Option<HitSource>,
}

/// One primitive in the spatial index: a segment plus its provenance.
#[derive(Clone, Copy, Debug)]
struct Prim {
    seg: Segment,
    source: HitSource,
}

/// Uniform-grid index over all segments and object edges. Insertion is
/// AABB-conservative, so every cell a primitive touches lists it and the
/// DDA walk below can stop as soon as the best hit precedes the cell exit.
#[derive(Clone, Debug)]
struct SpatialIndex {
    cell: f64,
    origin: Point2,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl SpatialIndex {
    fn build(bounds: &Bounds, prims: &[Prim]) -> Self {
        let cell = 1.0;
        let nx = (bounds.width() / cell).ceil().max(1.0) as usize;
        let ny = (bounds.height() / cell).ceil().max(1.0) as usize;
        let mut cells = vec![Vec::new(); nx * ny];
        for (id, prim) in prims.iter().enumerate() {
            let (lo, hi) = (
                Point2::new(
                    prim.seg.a.x.min(prim.seg.b.x),
                    prim.seg.a.y.min(prim.seg.b.y),
                ),
                Point2::new(
                    prim.seg.a.x.max(prim.seg.b.x),
                    prim.seg.a.y.max(prim.seg.b.y),
                ),
            );
            let ix0 = (((lo.x - bounds.min.x) / cell).floor() as i64).clamp(0, nx as i64 - 1);
            let ix1 = (((hi.x - bounds.min.x) / cell).floor() as i64).clamp(0, nx as i64 - 1);
            let iy0 = (((lo.y - bounds.min.y) / cell).floor() as i64).clamp(0, ny as i64 - 1);
            let iy1 = (((hi.y - bounds.min.y) / cell).floor() as i64).clamp(0, ny as i64 - 1);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    cells[iy as usize * nx + ix as usize].push(id as u32);
                }
            }
        }
        Self {
            cell,
            origin: bounds.min,
            nx,
            ny,
            cells,
        }
    }
}

/// Immutable ground-truth world: permanent line map, non-permanent convex
/// objects, search targets, bounds, and the canonical start pose.
#[derive(Clone, Debug)]
pub struct LineWorld {
    segments: Vec<Segment>,
    objects: Vec<ConvexPolygon>,
    targets: Vec<Target>,
    bounds: Bounds,
    start_pose: Pose,
    prims: Vec<Prim>,
    index: SpatialIndex,
}

impl LineWorld {
    pub fn new(
        segments: Vec<Segment>,
        objects: Vec<ConvexPolygon>,
        targets: Vec<Target>,
        bounds: Bounds,
        start_pose: Pose,
    ) -> Result<Self> {
        for seg in &segments {
            if !bounds.contains(seg.a) || !bounds.contains(seg.b) {
                return Err(Error::InvalidWorld("segment endpoint outside bounds".into()));
            }
        }
        for poly in &objects {
            for v in poly.vertices() {
                if !bounds.contains_strict(*v) {
                    return Err(Error::InvalidWorld(
                        "object vertex not strictly inside bounds".into(),
                    ));
                }
            }
        }
        for t in &targets {
            if t.radius <= 0.0 {
                return Err(Error::InvalidWorld("target radius must be positive".into()));
            }
            let r = Point2::new(t.radius, t.radius);
            if !bounds.contains_strict(t.center - r) || !bounds.contains_strict(t.center + r) {
                return Err(Error::InvalidWorld(
                    "target not strictly inside bounds".into(),
                ));
            }
        }
        if !bounds.contains(start_pose.position()) {
            return Err(Error::InvalidWorld("start pose outside bounds".into()));
        }
        let mut prims = Vec::new();
        for (i, seg) in segments.iter().enumerate() {
            prims.push(Prim {
                seg: *seg,
                source: HitSource::Segment(i),
            });
        }
        for (i, poly) in objects.iter().enumerate() {
            for edge in poly.edges() {
                prims.push(Prim {
                    seg: edge,
                    source: HitSource::Object(i),
                });
            }
        }
        let index = SpatialIndex::build(&bounds, &prims);
        Ok(Self {
            segments,
            objects,
            targets,
            bounds,
            start_pose,
            prims,
            index,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn objects(&self) -> &[ConvexPolygon] {
        &self.objects
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn start_pose(&self) -> Pose {
        self.start_pose
    }

    /// Index of the object containing `p`, if any (boundary inclusive).
    pub fn object_containing(&self, p: Point2) -> Option<usize> {
        self.objects.iter().position(|o| o.contains(p))
    }

    /// Minimum positive intersection distance of the world-frame ray from
    /// `origin` at `angle` with all segments (and object edges when
    /// `include_objects`), capped at `max_range`.
    pub fn ray_cast(
        &self,
        origin: &Pose,
        angle: f64,
        max_range: f64,
        include_objects: bool,
    ) -> Result<RayCast> {
        let o = origin.position();
        if !self.bounds.contains(o) {
            return Err(Error::OutOfBounds { x: o.x, y: o.y });
        }
        Ok(self.ray_cast_unchecked(o, angle, max_range, include_objects))
    }

    fn ray_cast_unchecked(
        &self,
        o: Point2,
        angle: f64,
        max_range: f64,
        include_objects: bool,
    ) -> RayCast {
        let dir = Point2::from_angle(angle);
        let idx = &self.index;
        let cell = idx.cell;

        let mut ix = (((o.x - idx.origin.x) / cell).floor() as i64).clamp(0, idx.nx as i64 - 1);
        let mut iy = (((o.y - idx.origin.y) / cell).floor() as i64).clamp(0, idx.ny as i64 - 1);
        let step_x: i64 = if dir.x > 0.0 { 1 } else { -1 };
        let step_y: i64 = if dir.y > 0.0 { 1 } else { -1 };
        let next_bound = |i: i64, step: i64, org: f64| -> f64 {
            let edge = if step > 0 { i + 1 } else { i };
            org + edge as f64 * cell
        };
        let mut t_max_x = if dir.x != 0.0 {
            (next_bound(ix, step_x, idx.origin.x) - o.x) / dir.x
        } else {
            f64::INFINITY
        };
        let mut t_max_y = if dir.y != 0.0 {
            (next_bound(iy, step_y, idx.origin.y) - o.y) / dir.y
        } else {
            f64::INFINITY
        };
        let t_delta_x = if dir.x != 0.0 {
            cell / dir.x.abs()
        } else {
            f64::INFINITY
        };
        let t_delta_y = if dir.y != 0.0 {
            cell / dir.y.abs()
        } else {
            f64::INFINITY
        };

        let mut best_t = f64::INFINITY;
        let mut best_src = None;
        loop {
            for &pid in &idx.cells[iy as usize * idx.nx + ix as usize] {
                let prim = &self.prims[pid as usize];
                if !include_objects && matches!(prim.source, HitSource::Object(_)) {
                    continue;
                }
                if let Some(t) = prim.seg.ray_intersection(o, dir) {
                    if t < best_t {
                        best_t = t;
                        best_src = Some(prim.source);
                    }
                }
            }
            let t_exit = t_max_x.min(t_max_y);
            if best_t <= t_exit || t_exit > max_range {
                break;
            }
            if t_max_x < t_max_y {
                t_max_x += t_delta_x;
                ix += step_x;
                if ix < 0 || ix >= idx.nx as i64 {
                    break;
                }
            } else {
                t_max_y += t_delta_y;
                iy += step_y;
                if iy < 0 || iy >= idx.ny as i64 {
                    break;
                }
            }
        }

        if best_t <= max_range {
            RayCast {
                range: best_t,
                source: best_src,
            }
        } else {
            RayCast {
                range: max_range,
                source: None,
            }
        }
    }

    /// Linear scan over every primitive; cross-checks the indexed cast.
    #[cfg(test)]
    fn ray_cast_brute(
        &self,
        o: Point2,
        angle: f64,
        max_range: f64,
        include_objects: bool,
    ) -> RayCast {
        let dir = Point2::from_angle(angle);
        let mut best_t = f64::INFINITY;
        let mut best_src = None;
        for prim in &self.prims {
            if !include_objects && matches!(prim.source, HitSource::Object(_)) {
                continue;
            }
            if let Some(t) = prim.seg.ray_intersection(o, dir) {
                if t < best_t {
                    best_t = t;
                    best_src = Some(prim.source);
                }
            }
        }
        if best_t <= max_range {
            RayCast {
                range: best_t,
                source: best_src,
            }
        } else {
            RayCast {
                range: max_range,
                source: None,
            }
        }
    }

    /// Simulates one full LiDAR scan from `pose`. Deterministic given
    /// `seed`; with `lidar_noise_sigma == 0` every beam equals the exact
    /// ray cast.
    pub fn simulate_scan(&self, pose: &Pose, spec: &SensorSpec, seed: u64) -> Result<Scan> {
        let p = pose.position();
        if !self.bounds.contains(p) {
            return Err(Error::OutOfBounds { x: p.x, y: p.y });
        }
        if let Some(i) = self.object_containing(p) {
            return Err(Error::InsideObject {
                x: p.x,
                y: p.y,
                object: i,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = if spec.lidar_noise_sigma > 0.0 {
            Some(Normal::new(0.0, spec.lidar_noise_sigma).expect("valid sigma"))
        } else {
            None
        };
        let n = spec.n_beams;
        let mut ranges = Vec::with_capacity(n);
        let mut hits = Vec::with_capacity(n);
        for j in 0..n {
            let angle = pose.theta + TAU * j as f64 / n as f64;
            let cast = self.ray_cast_unchecked(p, angle, spec.lidar_max_range, true);
            match cast.source {
                Some(_) => {
                    let mut r = cast.range;
                    if let Some(dist) = &noise {
                        r += dist.sample(&mut rng);
                    }
                    ranges.push(r.clamp(1e-6, spec.lidar_max_range));
                    hits.push(true);
                }
                None => {
                    if noise.is_some() {
                        // keep the rng stream aligned across beams
                        let _ = noise.as_ref().unwrap().sample(&mut rng);
                    }
                    ranges.push(spec.lidar_max_range);
                    hits.push(false);
                }
            }
        }
        Ok(Scan {
            ranges,
            hits,
            max_range: spec.lidar_max_range,
            timestamp: 0,
        })
    }

    /// First intersection distance from `a` toward `b` (objects included),
    /// or `None` when nothing blocks within `|b - a|`.
    pub fn first_hit_toward(&self, a: Point2, b: Point2) -> Option<f64> {
        let d = b - a;
        let len = d.norm();
        if len == 0.0 {
            return None;
        }
        let cast = self.ray_cast_unchecked(a, d.angle(), len, true);
        cast.source.map(|_| cast.range)
    }

    /// True when no segment or object edge lies strictly between `a` and
    /// `b` (a hit within `tol` of `b` does not block).
    pub fn line_of_sight(&self, a: Point2, b: Point2, tol: f64) -> bool {
        match self.first_hit_toward(a, b) {
            None => true,
            Some(t) => t >= a.distance(b) - tol,
        }
    }

    /// Whether `p` is inside the visual cone of `pose` (boundary inclusive).
    pub fn in_cone(pose: &Pose, spec: &SensorSpec, p: Point2) -> bool {
        let d = p - pose.position();
        let dist = d.norm();
        if dist > spec.visual_max_range {
            return false;
        }
        if dist == 0.0 {
            return true;
        }
        angle_diff(d.angle(), pose.theta).abs() <= spec.visual_fov_angle / 2.0
    }

    /// Visual visibility of a point: inside the cone with line of sight.
    /// `tol` relaxes the occlusion test near the point itself.
    pub fn sees_point(&self, pose: &Pose, spec: &SensorSpec, p: Point2, tol: f64) -> bool {
        Self::in_cone(pose, spec, p) && self.line_of_sight(pose.position(), p, tol)
    }

    /// Indices of targets currently detected by the visual sensor.
    pub fn check_detection(&self, pose: &Pose, spec: &SensorSpec) -> Vec<usize> {
        self.targets
            .iter()
            .enumerate()
            .filter(|(_, t)| self.sees_point(pose, spec, t.center, 1e-9))
            .map(|(i, _)| i)
            .collect()
    }

    /// Grid cells of `frame` whose centers are inside the visual cone with
    /// unobstructed line of sight against the true geometry.
    pub fn visible_cells(
        &self,
        pose: &Pose,
        spec: &SensorSpec,
        frame: &crate::geom::GridFrame,
    ) -> Vec<(usize, usize)> {
        let pos = pose.position();
        let r = spec.visual_max_range;
        let lo = frame.cell_of(Point2::new(pos.x - r, pos.y - r));
        let hi = frame.cell_of(Point2::new(pos.x + r, pos.y + r));
        let (x0, y0) = lo.unwrap_or((0, 0));
        let (x1, y1) = hi.unwrap_or((frame.width - 1, frame.height - 1));
        let mut out = Vec::new();
        for cy in y0..=y1.min(frame.height - 1) {
            for cx in x0..=x1.min(frame.width - 1) {
                let c = frame.cell_center(cx, cy);
                if Self::in_cone(pose, spec, c) && self.line_of_sight(pos, c, 1e-9) {
                    out.push((cx, cy));
                }
            }
        }
        out
    }

    /// Whether the polyline crosses any segment or object edge, or starts
    /// inside an object.
    pub fn path_collides(&self, path: &[Point2]) -> Option<Point2> {
        if let Some(first) = path.first() {
            if self.object_containing(*first).is_some() {
                return Some(*first);
            }
        }
        for pair in path.windows(2) {
            let leg = Segment::new(pair[0], pair[1]);
            let len = leg.length();
            if len == 0.0 {
                continue;
            }
            if let Some(t) = self.first_hit_toward(pair[0], pair[1]) {
                if t < len - 1e-9 {
                    let p = pair[0] + (pair[1] - pair[0]) * (t / len);
                    return Some(p);
                }
            }
        }
        None
    }

    /// Drives the robot along `path` at constant speed, emitting one scan
    /// every `1/scan_rate_hz` seconds of simulated time.
    pub fn move_robot(
        &self,
        path: &[Pose],
        spec: &SensorSpec,
        seed: u64,
    ) -> Result<Trajectory> {
        let pts: Vec<Point2> = path.iter().map(|p| p.position()).collect();
        if let Some(p) = self.path_collides(&pts) {
            return Err(Error::PathCollision { x: p.x, y: p.y });
        }
        let walker = PathWalker::new(path, spec);
        let mut samples = Vec::new();
        for (i, pose) in walker.scan_poses().into_iter().enumerate() {
            let mut scan = self.simulate_scan(&pose, spec, seed.wrapping_add(i as u64))?;
            scan.timestamp = i as u64 + 1;
            let time = (i as f64 + 1.0) / spec.scan_rate_hz;
            samples.push(TrajectorySample { time, pose, scan });
        }
        Ok(Trajectory {
            samples,
            elapsed: walker.duration(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrajectorySample {
    pub time: f64,
    pub pose: Pose,
    pub scan: Scan,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// Exact traversal time, path length / v_robot.
    pub elapsed: f64,
}

/// Constant-speed interpolation along a pose polyline. Heading follows the
/// direction of travel; the final sample takes the last pose's heading.
pub struct PathWalker {
    points: Vec<Point2>,
    cumlen: Vec<f64>,
    final_theta: f64,
    speed: f64,
    period: f64,
}

impl PathWalker {
    pub fn new(path: &[Pose], spec: &SensorSpec) -> Self {
        let points: Vec<Point2> = path.iter().map(|p| p.position()).collect();
        let mut cumlen = vec![0.0];
        for pair in points.windows(2) {
            let last = *cumlen.last().unwrap();
            cumlen.push(last + pair[0].distance(pair[1]));
        }
        Self {
            points,
            cumlen,
            final_theta: path.last().map(|p| p.theta).unwrap_or(0.0),
            speed: spec.v_robot,
            period: 1.0 / spec.scan_rate_hz,
        }
    }

    pub fn length(&self) -> f64 {
        *self.cumlen.last().unwrap_or(&0.0)
    }

    pub fn duration(&self) -> f64 {
        self.length() / self.speed
    }

    /// Pose after traveling for `t` seconds (clamped to the path end).
    pub fn pose_at(&self, t: f64) -> Pose {
        let s = (t * self.speed).clamp(0.0, self.length());
        if self.points.len() < 2 || self.length() == 0.0 {
            let p = self.points.first().copied().unwrap_or_default();
            return Pose::new(p.x, p.y, self.final_theta);
        }
        // segment containing arc length s
        let mut i = match self
            .cumlen
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        i = i.min(self.points.len() - 2);
        let seg_len = self.cumlen[i + 1] - self.cumlen[i];
        let a = self.points[i];
        let b = self.points[i + 1];
        let frac = if seg_len > 0.0 {
            (s - self.cumlen[i]) / seg_len
        } else {
            0.0
        };
        let p = a + (b - a) * frac;
        let theta = if s >= self.length() - 1e-12 {
            self.final_theta
        } else {
            (b - a).angle()
        };
        Pose::new(p.x, p.y, theta)
    }

    /// Number of scan instants emitted over the traversal.
    pub fn scan_count(&self) -> usize {
        (self.duration() / self.period + 1e-9).floor() as usize
    }

    /// Poses at each scan instant `i / scan_rate`, i = 1..=scan_count.
    pub fn scan_poses(&self) -> Vec<Pose> {
        (1..=self.scan_count())
            .map(|i| self.pose_at(i as f64 * self.period))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// World file format (versioned JSON, exact field names normative)
// ---------------------------------------------------------------------------

pub const WORLD_FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldFile {
    version: u32,
    bounds: [f64; 4],
    segments: Vec<[f64; 4]>,
    objects: Vec<Vec<[f64; 2]>>,
    targets: Vec<[f64; 3]>,
    start_pose: [f64; 3],
}

impl LineWorld {
    pub fn to_json(&self) -> String {
        let file = WorldFile {
            version: WORLD_FILE_VERSION,
            bounds: [
                self.bounds.min.x,
                self.bounds.min.y,
                self.bounds.max.x,
                self.bounds.max.y,
            ],
            segments: self
                .segments
                .iter()
                .map(|s| [s.a.x, s.a.y, s.b.x, s.b.y])
                .collect(),
            objects: self
                .objects
                .iter()
                .map(|o| o.vertices().iter().map(|v| [v.x, v.y]).collect())
                .collect(),
            targets: self
                .targets
                .iter()
                .map(|t| [t.center.x, t.center.y, t.radius])
                .collect(),
            start_pose: [self.start_pose.x, self.start_pose.y, self.start_pose.theta],
        };
        serde_json::to_string_pretty(&file).expect("world file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WorldFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidWorld(e.to_string()))?;
        if file.version != WORLD_FILE_VERSION {
            return Err(Error::VersionMismatch {
                expected: WORLD_FILE_VERSION,
                got: file.version,
            });
        }
        let [x0, y0, x1, y1] = file.bounds;
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::InvalidWorld("bounds must have positive extent".into()));
        }
        let bounds = Bounds::new(Point2::new(x0, y0), Point2::new(x1, y1));
        let segments = file
            .segments
            .iter()
            .map(|[ax, ay, bx, by]| Segment::new(Point2::new(*ax, *ay), Point2::new(*bx, *by)))
            .collect();
        let objects = file
            .objects
            .iter()
            .map(|verts| {
                ConvexPolygon::new(verts.iter().map(|[x, y]| Point2::new(*x, *y)).collect())
                    .ok_or_else(|| {
                        Error::InvalidWorld("object polygon must be convex and CCW".into())
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let targets = file
            .targets
            .iter()
            .map(|[x, y, r]| Target {
                center: Point2::new(*x, *y),
                radius: *r,
            })
            .collect();
        let [sx, sy, st] = file.start_pose;
        LineWorld::new(segments, objects, targets, bounds, Pose::new(sx, sy, st))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// A 10x10 m square room centered on the origin; handy in tests.
#[cfg(test)]
pub(crate) fn square_room(half: f64) -> LineWorld {
    let m = half;
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
        vec![],
        Bounds::new(Point2::new(-m, -m), Point2::new(m, m)),
        Pose::new(0.0, 0.0, 0.0),
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn empty_world() -> LineWorld {
        LineWorld::new(
            vec![],
            vec![],
            vec![],
            Bounds::new(Point2::new(-10.0, -10.0), Point2::new(10.0, 10.0)),
            Pose::new(0.0, 0.0, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn ray_cast_axis_aligned_wall() {
        let world = LineWorld::new(
            vec![Segment::new(Point2::new(5.0, -1.0), Point2::new(5.0, 1.0))],
            vec![],
            vec![],
            Bounds::new(Point2::new(-1.0, -2.0), Point2::new(6.0, 2.0)),
            Pose::new(0.0, 0.0, 0.0),
        )
        .unwrap();
        let cast = world
            .ray_cast(&Pose::new(0.0, 0.0, 0.0), 0.0, 20.0, true)
            .unwrap();
        assert!((cast.range - 5.0).abs() < 1e-12);
        assert_eq!(cast.source, Some(HitSource::Segment(0)));
    }

    #[test]
    fn nearer_object_wins() {
        let world = LineWorld::new(
            vec![Segment::new(Point2::new(5.0, -1.0), Point2::new(5.0, 1.0))],
            vec![ConvexPolygon::rect(
                Point2::new(2.0, -0.5),
                Point2::new(3.0, 0.5),
            )],
            vec![],
            Bounds::new(Point2::new(-1.0, -2.0), Point2::new(6.0, 2.0)),
            Pose::new(0.0, 0.0, 0.0),
        )
        .unwrap();
        let cast = world
            .ray_cast(&Pose::new(0.0, 0.0, 0.0), 0.0, 20.0, true)
            .unwrap();
        assert!((cast.range - 2.0).abs() < 1e-12);
        assert_eq!(cast.source, Some(HitSource::Object(0)));
        // without objects the wall is hit instead
        let cast = world
            .ray_cast(&Pose::new(0.0, 0.0, 0.0), 0.0, 20.0, false)
            .unwrap();
        assert!((cast.range - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ray_cast_origin_outside_bounds_errors() {
        let world = empty_world();
        assert!(world
            .ray_cast(&Pose::new(50.0, 0.0, 0.0), 0.0, 5.0, true)
            .is_err());
    }

    #[test]
    fn indexed_cast_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bounds = Bounds::new(Point2::new(-12.0, -12.0), Point2::new(12.0, 12.0));
        let mut segments = Vec::new();
        for _ in 0..25 {
            let a = Point2::new(rng.gen_range(-11.0..11.0), rng.gen_range(-11.0..11.0));
            let d = Point2::from_angle(rng.gen_range(0.0..TAU)) * rng.gen_range(0.5..5.0);
            let mut b = a + d;
            b.x = b.x.clamp(-11.9, 11.9);
            b.y = b.y.clamp(-11.9, 11.9);
            segments.push(Segment::new(a, b));
        }
        let mut objects = Vec::new();
        for _ in 0..6 {
            let c = Point2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            objects.push(ConvexPolygon::regular(c, rng.gen_range(0.2..0.8), 6));
        }
        let world =
            LineWorld::new(segments, objects, vec![], bounds, Pose::new(0.0, 0.0, 0.0)).unwrap();
        for _ in 0..2000 {
            let o = Point2::new(rng.gen_range(-11.0..11.0), rng.gen_range(-11.0..11.0));
            let angle = rng.gen_range(0.0..TAU);
            let a = world.ray_cast_unchecked(o, angle, 15.0, true);
            let b = world.ray_cast_brute(o, angle, 15.0, true);
            assert!(
                (a.range - b.range).abs() < 1e-9,
                "indexed {a:?} vs brute {b:?} at o={o:?} angle={angle}"
            );
            assert_eq!(a.source, b.source);
        }
    }

    #[test]
    fn empty_world_scan_all_no_hit() {
        let world = empty_world();
        let spec = SensorSpec {
            lidar_noise_sigma: 0.0,
            n_beams: 64,
            ..SensorSpec::default()
        };
        let scan = world
            .simulate_scan(&Pose::new(0.0, 0.0, 0.3), &spec, 1)
            .unwrap();
        assert!(scan.hits.iter().all(|h| !h));
        assert!(scan.ranges.iter().all(|&r| r == spec.lidar_max_range));
    }

    #[test]
    fn square_room_midwall_reads_five() {
        let world = square_room(5.0);
        let spec = SensorSpec {
            lidar_noise_sigma: 0.0,
            n_beams: 4,
            ..SensorSpec::default()
        };
        // beams at 0, 90, 180, 270 degrees all hit wall midpoints at 5 m
        let scan = world
            .simulate_scan(&Pose::new(0.0, 0.0, 0.0), &spec, 0)
            .unwrap();
        for j in 0..4 {
            assert!(scan.hits[j]);
            assert!((scan.ranges[j] - 5.0).abs() < 1e-9, "beam {j}");
        }
    }

    #[test]
    fn fixed_seed_scans_identical() {
        let world = square_room(5.0);
        let spec = SensorSpec {
            n_beams: 128,
            ..SensorSpec::default()
        };
        let pose = Pose::new(1.0, -0.5, 0.7);
        let a = world.simulate_scan(&pose, &spec, 42).unwrap();
        let b = world.simulate_scan(&pose, &spec, 42).unwrap();
        assert_eq!(a.ranges, b.ranges);
        assert_eq!(a.hits, b.hits);
    }

    #[test]
    fn scan_inside_object_errors() {
        let world = LineWorld::new(
            vec![],
            vec![ConvexPolygon::rect(
                Point2::new(-1.0, -1.0),
                Point2::new(1.0, 1.0),
            )],
            vec![],
            Bounds::new(Point2::new(-5.0, -5.0), Point2::new(5.0, 5.0)),
            Pose::new(3.0, 3.0, 0.0),
        )
        .unwrap();
        let spec = SensorSpec::default();
        assert!(matches!(
            world.simulate_scan(&Pose::new(0.0, 0.0, 0.0), &spec, 0),
            Err(Error::InsideObject { .. })
        ));
    }

    #[test]
    fn detection_trivial_cases() {
        let world = LineWorld::new(
            vec![Segment::new(Point2::new(2.0, -2.0), Point2::new(2.0, 2.0))],
            vec![],
            vec![
                Target {
                    center: Point2::new(1.0, 0.0),
                    radius: 0.2,
                },
                Target {
                    center: Point2::new(3.0, 0.0),
                    radius: 0.2,
                },
            ],
            Bounds::new(Point2::new(-5.0, -5.0), Point2::new(5.0, 5.0)),
            Pose::new(0.0, 0.0, 0.0),
        )
        .unwrap();
        let spec = SensorSpec::default();
        let pose = Pose::new(0.0, 0.0, 0.0);
        // target 0 is 1 m ahead with no occluder; target 1 is behind the wall
        assert_eq!(world.check_detection(&pose, &spec), vec![0]);
    }

    #[test]
    fn detection_cone_boundary_inclusive() {
        let fov = 60f64.to_radians();
        let spec = SensorSpec {
            visual_fov_angle: fov,
            ..SensorSpec::default()
        };
        let half = fov / 2.0;
        let target = Target {
            center: Point2::new(2.0 * half.cos(), 2.0 * half.sin()),
            radius: 0.1,
        };
        let world = LineWorld::new(
            vec![],
            vec![],
            vec![target],
            Bounds::new(Point2::new(-5.0, -5.0), Point2::new(5.0, 5.0)),
            Pose::new(0.0, 0.0, 0.0),
        )
        .unwrap();
        assert_eq!(world.check_detection(&Pose::new(0.0, 0.0, 0.0), &spec), vec![0]);
    }

    #[test]
    fn move_robot_scan_count_and_time() {
        let world = square_room(5.0);
        let spec = SensorSpec {
            v_robot: 1.0,
            scan_rate_hz: 5.0,
            lidar_noise_sigma: 0.0,
            n_beams: 16,
            ..SensorSpec::default()
        };
        let path = [Pose::new(-1.0, 0.0, 0.0), Pose::new(1.0, 0.0, 0.0)];
        let traj = world.move_robot(&path, &spec, 0).unwrap();
        assert_eq!(traj.samples.len(), 10);
        assert!((traj.elapsed - 2.0).abs() < 1e-12);
        // last sample is at the endpoint with the commanded heading
        let last = traj.samples.last().unwrap();
        assert!(last.pose.position().distance(Point2::new(1.0, 0.0)) < 1e-9);
    }

    #[test]
    fn move_robot_empty_path() {
        let world = square_room(5.0);
        let spec = SensorSpec::default();
        let traj = world.move_robot(&[], &spec, 0).unwrap();
        assert!(traj.samples.is_empty());
        assert_eq!(traj.elapsed, 0.0);
    }

    #[test]
    fn move_robot_through_wall_errors() {
        let world = square_room(5.0);
        let spec = SensorSpec::default();
        let path = [Pose::new(0.0, 0.0, 0.0), Pose::new(8.0, 0.0, 0.0)];
        assert!(matches!(
            world.move_robot(&path, &spec, 0),
            Err(Error::PathCollision { .. })
        ));
    }

    #[test]
    fn world_file_round_trip_and_rejects_extra_fields() {
        let world = LineWorld::new(
            vec![Segment::new(Point2::new(0.0, 0.0), Point2::new(4.0, 0.0))],
            vec![ConvexPolygon::rect(
                Point2::new(1.0, 1.0),
                Point2::new(2.0, 2.0),
            )],
            vec![Target {
                center: Point2::new(3.0, 3.0),
                radius: 0.2,
            }],
            Bounds::new(Point2::new(-1.0, -1.0), Point2::new(5.0, 5.0)),
            Pose::new(0.5, 0.5, 0.25),
        )
        .unwrap();
        let json = world.to_json();
        let back = LineWorld::from_json(&json).unwrap();
        assert_eq!(back.segments(), world.segments());
        assert_eq!(back.targets(), world.targets());
        assert_eq!(back.start_pose(), world.start_pose());

        let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();
        value["surprise"] = serde_json::json!(1);
        assert!(LineWorld::from_json(&value.to_string()).is_err());

        value = serde_json::from_str(&json).unwrap();
        value["version"] = serde_json::json!(99);
        assert!(matches!(
            LineWorld::from_json(&value.to_string()),
            Err(Error::VersionMismatch { .. })
        ));
    }
}
