//! Procedural indoor worlds: axis-aligned rooms and corridors with
//! doorways, convex furniture, and difficulty-controlled target placement.
//!
//! Every generated world passes a reachability oracle on the true map
//! before being returned: the start must reach a pose that can see each
//! target. Generation retries with fresh sub-seeds and fails loudly after
//! a bounded number of attempts.

use crate::error::{Error, Result};
use crate::geom::{Bounds, ConvexPolygon, GridFrame, Point2, Pose, Segment};
use crate::mapping::{trace_cells, CellState, SearchMap, SensorKind};
use crate::path::ReachField;
use crate::seeding;
use crate::world::{LineWorld, SensorSpec, Target};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Archetype {
    Apartment,
    Office,
    Hallway,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    /// Target in the same half of the major axis as the start.
    Easy,
    /// Target in the opposite half.
    Hard,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WorldGenConfig {
    pub archetype: Archetype,
    pub width: f64,
    pub height: f64,
    /// Furniture objects per 10 m^2 of room area.
    pub object_density: f64,
    pub difficulty: Difficulty,
    pub n_targets: usize,
    pub target_radius: f64,
    pub seed: u64,
}

impl WorldGenConfig {
    pub fn new(archetype: Archetype, difficulty: Difficulty, seed: u64) -> Self {
        let (width, height) = match archetype {
            Archetype::Apartment => (20.0, 30.0),
            Archetype::Office => (25.0, 45.0),
            Archetype::Hallway => (15.0, 38.0),
        };
        Self {
            archetype,
            width,
            height,
            object_density: 0.35,
            difficulty,
            n_targets: 1,
            target_radius: 0.2,
            seed,
        }
    }
}

const MIN_ROOM: f64 = 3.5;
const DOOR_WIDTH: f64 = 1.1;
const WALL_CLEARANCE: f64 = 0.5;
const DOOR_CLEARANCE: f64 = 1.1;
const START_CLEARANCE: f64 = 1.5;
const GEN_ATTEMPTS: usize = 60;

#[derive(Clone, Copy, Debug)]
struct Rect {
    min: Point2,
    max: Point2,
}

impl Rect {
    fn width(&self) -> f64 {
        self.max.x - self.min.x
    }
    fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
    fn area(&self) -> f64 {
        self.width() * self.height()
    }
    fn center(&self) -> Point2 {
        Point2::new(
            (self.min.x + self.max.x) / 2.0,
            (self.min.y + self.max.y) / 2.0,
        )
    }
    fn shrunk(&self, by: f64) -> Rect {
        Rect {
            min: self.min + Point2::new(by, by),
            max: self.max - Point2::new(by, by),
        }
    }
}

struct Layout {
    walls: Vec<Segment>,
    rooms: Vec<Rect>,
    doors: Vec<Point2>,
}

/// Axis-aligned wall from `a` to `b` with a door gap centered at parameter
/// `t` along it. Emits 0-2 segments plus the door center point.
fn wall_with_door(a: Point2, b: Point2, t: f64, doors: &mut Vec<Point2>) -> Vec<Segment> {
    let len = a.distance(b);
    let dir = (b - a) * (1.0 / len);
    let t = t.clamp(
        (DOOR_WIDTH / 2.0 + 0.3) / len,
        1.0 - (DOOR_WIDTH / 2.0 + 0.3) / len,
    );
    let door_center = a + dir * (t * len);
    doors.push(door_center);
    let gap0 = a + dir * (t * len - DOOR_WIDTH / 2.0);
    let gap1 = a + dir * (t * len + DOOR_WIDTH / 2.0);
    let mut out = Vec::new();
    if a.distance(gap0) > 0.05 {
        out.push(Segment::new(a, gap0));
    }
    if gap1.distance(b) > 0.05 {
        out.push(Segment::new(gap1, b));
    }
    out
}

fn bsp_split(rng: &mut ChaCha8Rng, rect: Rect, layout: &mut Layout, depth: usize) {
    let w = rect.width();
    let h = rect.height();
    if (w < 2.0 * MIN_ROOM && h < 2.0 * MIN_ROOM) || depth >= 5 {
        layout.rooms.push(rect);
        return;
    }
    let split_x = if w >= h { w >= 2.0 * MIN_ROOM } else { h < 2.0 * MIN_ROOM };
    if split_x {
        let x = rect.min.x + w * rng.gen_range(0.4..0.6);
        let wall = (
            Point2::new(x, rect.min.y),
            Point2::new(x, rect.max.y),
        );
        layout
            .walls
            .extend(wall_with_door(wall.0, wall.1, rng.gen_range(0.2..0.8), &mut layout.doors));
        bsp_split(
            rng,
            Rect {
                min: rect.min,
                max: Point2::new(x, rect.max.y),
            },
            layout,
            depth + 1,
        );
        bsp_split(
            rng,
            Rect {
                min: Point2::new(x, rect.min.y),
                max: rect.max,
            },
            layout,
            depth + 1,
        );
    } else {
        let y = rect.min.y + h * rng.gen_range(0.4..0.6);
        let wall = (
            Point2::new(rect.min.x, y),
            Point2::new(rect.max.x, y),
        );
        layout
            .walls
            .extend(wall_with_door(wall.0, wall.1, rng.gen_range(0.2..0.8), &mut layout.doors));
        bsp_split(
            rng,
            Rect {
                min: rect.min,
                max: Point2::new(rect.max.x, y),
            },
            layout,
            depth + 1,
        );
        bsp_split(
            rng,
            Rect {
                min: Point2::new(rect.min.x, y),
                max: rect.max,
            },
            layout,
            depth + 1,
        );
    }
}

fn apartment_layout(rng: &mut ChaCha8Rng, bounds: Rect) -> Layout {
    let mut layout = Layout {
        walls: Vec::new(),
        rooms: Vec::new(),
        doors: Vec::new(),
    };
    bsp_split(rng, bounds, &mut layout, 0);
    layout
}

/// Rooms on both sides of a central corridor along the major (y) axis,
/// each with a door onto the corridor. `open_fraction` of side rooms lose
/// their corridor wall entirely (hallway alcoves).
fn corridor_layout(
    rng: &mut ChaCha8Rng,
    bounds: Rect,
    corridor_half: f64,
    open_fraction: f64,
) -> Layout {
    let mut layout = Layout {
        walls: Vec::new(),
        rooms: Vec::new(),
        doors: Vec::new(),
    };
    let cx = (bounds.min.x + bounds.max.x) / 2.0;
    let strips = [
        Rect {
            min: bounds.min,
            max: Point2::new(cx - corridor_half, bounds.max.y),
        },
        Rect {
            min: Point2::new(cx + corridor_half, bounds.min.y),
            max: bounds.max,
        },
    ];
    layout.rooms.push(Rect {
        min: Point2::new(cx - corridor_half, bounds.min.y),
        max: Point2::new(cx + corridor_half, bounds.max.y),
    });
    for (side, strip) in strips.iter().enumerate() {
        let wall_x = if side == 0 {
            cx - corridor_half
        } else {
            cx + corridor_half
        };
        // split the strip into rooms along y
        let mut y = strip.min.y;
        let mut cuts = vec![y];
        while strip.max.y - y > 2.0 * MIN_ROOM {
            y += rng.gen_range(MIN_ROOM..MIN_ROOM * 2.0);
            if strip.max.y - y < MIN_ROOM {
                break;
            }
            cuts.push(y);
            layout.walls.push(Segment::new(
                Point2::new(strip.min.x, y),
                Point2::new(strip.max.x, y),
            ));
        }
        cuts.push(strip.max.y);
        // corridor-side wall with a door (or fully open) per room
        for win in cuts.windows(2) {
            let (y0, y1) = (win[0], win[1]);
            layout.rooms.push(Rect {
                min: Point2::new(strip.min.x, y0),
                max: Point2::new(strip.max.x, y1),
            });
            let a = Point2::new(wall_x, y0);
            let b = Point2::new(wall_x, y1);
            if rng.gen_bool(open_fraction) {
                layout.doors.push(Point2::new(wall_x, (y0 + y1) / 2.0));
                continue;
            }
            layout
                .walls
                .extend(wall_with_door(a, b, rng.gen_range(0.25..0.75), &mut layout.doors));
        }
    }
    layout
}

fn sample_object(rng: &mut ChaCha8Rng, center: Point2) -> ConvexPolygon {
    if rng.gen_bool(0.5) {
        let hw = rng.gen_range(0.15..0.55);
        let hh = rng.gen_range(0.15..0.55);
        ConvexPolygon::rect(
            Point2::new(center.x - hw, center.y - hh),
            Point2::new(center.x + hw, center.y + hh),
        )
    } else {
        let sides = rng.gen_range(5..8);
        let radius = rng.gen_range(0.2..0.5);
        ConvexPolygon::regular(center, radius, sides)
    }
}

fn poly_clear_of(
    poly: &ConvexPolygon,
    walls: &[Segment],
    doors: &[Point2],
    others: &[ConvexPolygon],
    start: Point2,
) -> bool {
    let (lo, hi) = poly.aabb();
    let c = Point2::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);
    let radius = c.distance(hi);
    for w in walls {
        if w.distance_to_point(c) < radius + WALL_CLEARANCE {
            return false;
        }
    }
    for d in doors {
        if c.distance(*d) < radius + DOOR_CLEARANCE {
            return false;
        }
    }
    for o in others {
        let (olo, ohi) = o.aabb();
        let oc = Point2::new((olo.x + ohi.x) / 2.0, (olo.y + ohi.y) / 2.0);
        if c.distance(oc) < radius + oc.distance(ohi) + 0.5 {
            return false;
        }
    }
    c.distance(start) >= radius + START_CLEARANCE
}

/// Generates one world, retrying whole layouts until the reachability
/// oracle passes.
pub fn generate_world(config: &WorldGenConfig) -> Result<LineWorld> {
    if !(10.0..=50.0).contains(&config.width) || !(10.0..=50.0).contains(&config.height) {
        return Err(Error::InvalidConfig(
            "world size must be within [10x10, 50x50] m".into(),
        ));
    }
    let spec = SensorSpec::default();
    let mut last_reason = String::from("no attempts made");
    for attempt in 0..GEN_ATTEMPTS {
        match try_generate(config, seeding::mix(config.seed, attempt as u64)) {
            Ok(world) => {
                if oracle_reachable(&world, &spec, 0.1) {
                    return Ok(world);
                }
                last_reason = "reachability oracle rejected the layout".into();
            }
            Err(e) => last_reason = e.to_string(),
        }
    }
    Err(Error::GenerationFailed {
        attempts: GEN_ATTEMPTS,
        reason: last_reason,
    })
}

fn try_generate(config: &WorldGenConfig, seed: u64) -> Result<LineWorld> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds_rect = Rect {
        min: Point2::new(0.0, 0.0),
        max: Point2::new(config.width, config.height),
    };
    let mut layout = match config.archetype {
        Archetype::Apartment => apartment_layout(&mut rng, bounds_rect),
        Archetype::Office => corridor_layout(&mut rng, bounds_rect, 1.2, 0.0),
        Archetype::Hallway => corridor_layout(&mut rng, bounds_rect, 1.4, 0.35),
    };
    // outer boundary
    let c0 = bounds_rect.min;
    let c1 = Point2::new(bounds_rect.max.x, bounds_rect.min.y);
    let c2 = bounds_rect.max;
    let c3 = Point2::new(bounds_rect.min.x, bounds_rect.max.y);
    layout
        .walls
        .extend([Segment::new(c0, c1), Segment::new(c1, c2), Segment::new(c2, c3), Segment::new(c3, c0)]);

    // start pose: inside the room nearest the low end of the major axis
    let major_y = config.height >= config.width;
    let probe = if major_y {
        Point2::new(config.width / 2.0, 2.0)
    } else {
        Point2::new(2.0, config.height / 2.0)
    };
    let start_room = layout
        .rooms
        .iter()
        .min_by(|a, b| {
            let da = a.center().distance(probe);
            let db = b.center().distance(probe);
            da.partial_cmp(&db).unwrap()
        })
        .copied()
        .ok_or_else(|| Error::GenerationFailed {
            attempts: 1,
            reason: "layout produced no rooms".into(),
        })?;
    let sr = start_room.shrunk(1.0);
    let start = Point2::new(
        rng.gen_range(sr.min.x..sr.max.x.max(sr.min.x + 1e-6)),
        rng.gen_range(sr.min.y..sr.max.y.max(sr.min.y + 1e-6)),
    );
    let start_pose = Pose::new(start.x, start.y, rng.gen_range(-3.1..3.1));

    // furniture
    let mut objects: Vec<ConvexPolygon> = Vec::new();
    let room_area: f64 = layout.rooms.iter().map(|r| r.area()).sum();
    let want = (config.object_density * room_area / 10.0).round() as usize;
    let mut tries = 0;
    while objects.len() < want && tries < want * 30 {
        tries += 1;
        let room = layout.rooms[rng.gen_range(0..layout.rooms.len())];
        let inner = room.shrunk(0.8);
        if inner.width() <= 0.0 || inner.height() <= 0.0 {
            continue;
        }
        let c = Point2::new(
            rng.gen_range(inner.min.x..inner.max.x),
            rng.gen_range(inner.min.y..inner.max.y),
        );
        let poly = sample_object(&mut rng, c);
        if poly_clear_of(&poly, &layout.walls, &layout.doors, &objects, start) {
            objects.push(poly);
        }
    }

    // targets: half selection along the major axis, placed adjacent to a
    // furniture object so non-map evidence correlates with the target
    let mid = if major_y {
        config.height / 2.0
    } else {
        config.width / 2.0
    };
    let start_low = if major_y { start.y < mid } else { start.x < mid };
    let want_low = match config.difficulty {
        Difficulty::Easy => start_low,
        Difficulty::Hard => !start_low,
    };
    let in_half = |p: Point2| {
        let v = if major_y { p.y } else { p.x };
        (v < mid) == want_low
    };
    let mut targets: Vec<Target> = Vec::new();
    let mut anchor_objects: Vec<usize> = objects
        .iter()
        .enumerate()
        .filter(|(_, o)| in_half(o.centroid()))
        .map(|(i, _)| i)
        .collect();
    // ensure at least one anchor object in the target half
    if anchor_objects.is_empty() {
        let half_rooms: Vec<&Rect> = layout.rooms.iter().filter(|r| in_half(r.center())).collect();
        for _ in 0..60 {
            if half_rooms.is_empty() {
                break;
            }
            let room = half_rooms[rng.gen_range(0..half_rooms.len())];
            let inner = room.shrunk(0.8);
            if inner.width() <= 0.0 || inner.height() <= 0.0 {
                continue;
            }
            let c = Point2::new(
                rng.gen_range(inner.min.x..inner.max.x),
                rng.gen_range(inner.min.y..inner.max.y),
            );
            let poly = sample_object(&mut rng, c);
            if in_half(c) && poly_clear_of(&poly, &layout.walls, &layout.doors, &objects, start) {
                anchor_objects.push(objects.len());
                objects.push(poly);
                break;
            }
        }
    }
    let mut target_tries = 0;
    while targets.len() < config.n_targets && target_tries < 200 {
        target_tries += 1;
        let pos = if !anchor_objects.is_empty() && target_tries <= 150 {
            let obj = &objects[anchor_objects[rng.gen_range(0..anchor_objects.len())]];
            let (lo, hi) = obj.aabb();
            let c = Point2::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);
            let r = c.distance(hi);
            c + Point2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU))
                * (r + config.target_radius + rng.gen_range(0.15..0.6))
        } else {
            let room = layout.rooms[rng.gen_range(0..layout.rooms.len())];
            let inner = room.shrunk(0.8);
            if inner.width() <= 0.0 || inner.height() <= 0.0 {
                continue;
            }
            Point2::new(
                rng.gen_range(inner.min.x..inner.max.x),
                rng.gen_range(inner.min.y..inner.max.y),
            )
        };
        if !in_half(pos) {
            continue;
        }
        let margin = config.target_radius + 0.05;
        let inside = pos.x > margin
            && pos.y > margin
            && pos.x < config.width - margin
            && pos.y < config.height - margin;
        if !inside {
            continue;
        }
        if objects.iter().any(|o| o.contains(pos)) {
            continue;
        }
        if layout
            .walls
            .iter()
            .any(|w| w.distance_to_point(pos) < config.target_radius + 0.15)
        {
            continue;
        }
        if targets.iter().any(|t| t.center.distance(pos) < 2.0) {
            continue;
        }
        targets.push(Target {
            center: pos,
            radius: config.target_radius,
        });
    }
    if targets.len() < config.n_targets {
        return Err(Error::GenerationFailed {
            attempts: 1,
            reason: "could not place targets".into(),
        });
    }

    LineWorld::new(
        layout.walls,
        objects,
        targets,
        Bounds::new(bounds_rect.min, bounds_rect.max),
        start_pose,
    )
}

/// Rasterizes the true world: cells touched by a wall or object edge (or
/// inside an object) are occupied, everything else free.
pub fn rasterize(world: &LineWorld, resolution: f64) -> SearchMap {
    let frame = GridFrame::from_bounds(&world.bounds(), resolution);
    let mut map = SearchMap::new(frame, SensorKind::Lidar);
    for cy in 0..frame.height {
        for cx in 0..frame.width {
            map.set(cx, cy, CellState::Free);
        }
    }
    let mut mark = |seg: &Segment| {
        for (cx, cy) in trace_cells(&frame, seg.a, seg.b) {
            map.set(cx, cy, CellState::Occupied);
        }
    };
    for seg in world.segments() {
        mark(seg);
    }
    for obj in world.objects() {
        for edge in obj.edges() {
            mark(&edge);
        }
    }
    // object interiors
    for obj in world.objects() {
        let (lo, hi) = obj.aabb();
        if let (Some((x0, y0)), Some((x1, y1))) = (
            frame.cell_of(Point2::new(lo.x, lo.y)),
            frame.cell_of(Point2::new(hi.x.min(world.bounds().max.x - 1e-9), hi.y.min(world.bounds().max.y - 1e-9))),
        ) {
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    if obj.contains(frame.cell_center(cx, cy)) {
                        map.set(cx, cy, CellState::Occupied);
                    }
                }
            }
        }
    }
    map
}

/// Occupied cells dilated by `cells` (Chebyshev); used to keep generated
/// trajectories away from walls.
pub fn inflate(map: &SearchMap, cells: i64) -> SearchMap {
    let frame = map.frame;
    let mut out = map.clone();
    for cy in 0..frame.height as i64 {
        for cx in 0..frame.width as i64 {
            if map.get(cx as usize, cy as usize) != CellState::Occupied {
                continue;
            }
            for dy in -cells..=cells {
                for dx in -cells..=cells {
                    let nx = cx + dx;
                    let ny = cy + dy;
                    if nx >= 0 && ny >= 0 && nx < frame.width as i64 && ny < frame.height as i64 {
                        out.set(nx as usize, ny as usize, CellState::Occupied);
                    }
                }
            }
        }
    }
    out
}

/// True when the start pose can reach, through the true free space, a pose
/// from which every target is inside visual range with clear line of sight.
pub fn oracle_reachable(world: &LineWorld, spec: &SensorSpec, resolution: f64) -> bool {
    let raster = rasterize(world, resolution);
    let start = world.start_pose().position();
    if raster.state_at(start) != Some(CellState::Free) {
        return false;
    }
    let field = match ReachField::compute(&raster, start) {
        Ok(f) => f,
        Err(_) => return false,
    };
    let frame = raster.frame;
    'targets: for target in world.targets() {
        let r = spec.visual_max_range * 0.95;
        let lo = Point2::new(target.center.x - r, target.center.y - r);
        let hi = Point2::new(target.center.x + r, target.center.y + r);
        let (x0, y0) = frame.cell_of(lo).unwrap_or((0, 0));
        let (x1, y1) = frame
            .cell_of(hi)
            .unwrap_or((frame.width - 1, frame.height - 1));
        for cy in y0..=y1.min(frame.height - 1) {
            for cx in x0..=x1.min(frame.width - 1) {
                if raster.get(cx, cy) != CellState::Free {
                    continue;
                }
                if field.dist_to_cell(cx, cy).is_none() {
                    continue;
                }
                let c = frame.cell_center(cx, cy);
                if c.distance(target.center) <= r && world.line_of_sight(c, target.center, 1e-9) {
                    continue 'targets;
                }
            }
        }
        return false;
    }
    true
}

/// Random waypoint wandering over the true map (inflated by one cell),
/// long enough to cover `duration_s` of driving at the spec speed.
pub fn wander_path(
    world: &LineWorld,
    spec: &SensorSpec,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<Pose>> {
    let raster = inflate(&rasterize(world, 0.1), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = world.start_pose().position();
    let mut here = match raster.state_at(start) {
        Some(CellState::Free) => start,
        // inflated start cell: nudge to the nearest free cell
        _ => {
            let frame = raster.frame;
            let mut best: Option<(Point2, f64)> = None;
            for cy in 0..frame.height {
                for cx in 0..frame.width {
                    if raster.get(cx, cy) == CellState::Free {
                        let c = frame.cell_center(cx, cy);
                        let d = c.distance(start);
                        if best.map_or(true, |(_, bd)| d < bd) {
                            best = Some((c, d));
                        }
                    }
                }
            }
            best.ok_or(Error::StartNotFree)?.0
        }
    };
    let needed = duration_s * spec.v_robot;
    let mut total = 0.0;
    let mut poses: Vec<Pose> = vec![Pose::new(here.x, here.y, 0.0)];
    let frame = raster.frame;
    let mut stall = 0;
    while total < needed && stall < 50 {
        let field = ReachField::compute(&raster, here)?;
        // random reachable goal at least 3 m away
        let mut goal = None;
        for _ in 0..200 {
            let cx = rng.gen_range(0..frame.width);
            let cy = rng.gen_range(0..frame.height);
            if let Some(d) = field.dist_to_cell(cx, cy) {
                if d >= 3.0 {
                    goal = Some(frame.cell_center(cx, cy));
                    break;
                }
            }
        }
        let goal = match goal {
            Some(g) => g,
            None => {
                stall += 1;
                continue;
            }
        };
        match field.path_to(&raster, goal) {
            Some(path) if path.length > 0.0 => {
                total += path.length;
                poses.extend(path.poses.into_iter().skip(1));
                here = goal;
                stall = 0;
            }
            _ => stall += 1,
        }
    }
    if poses.len() < 2 {
        return Err(Error::EmptyTrajectory);
    }
    Ok(poses)
}
