//! Planar geometry primitives: points, poses, segments, convex polygons.
//!
//! Everything is f64 and exact closed-form; there is no tolerance hidden in
//! the intersection math beyond a parallelism epsilon.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

/// Denominator threshold below which a ray and a segment count as parallel.
const PARALLEL_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn normalized(self) -> Point2 {
        let n = self.norm();
        if n == 0.0 {
            Point2::new(0.0, 0.0)
        } else {
            Point2::new(self.x / n, self.y / n)
        }
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn from_angle(theta: f64) -> Point2 {
        Point2::new(theta.cos(), theta.sin())
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Normalize an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t > PI {
        t - TAU
    } else {
        t
    }
}

/// Smallest signed difference a - b in (-pi, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

/// Planar robot pose; heading is kept normalized to (-pi, pi].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Rigid transform of a point from the robot frame to the world frame.
    pub fn to_world(&self, local: Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        Point2::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
}

impl Segment {
    pub const fn new(a: Point2, b: Point2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Distance from a point to the segment (perpendicular where the
    /// projection falls inside, endpoint distance otherwise).
    pub fn distance_to_point(&self, p: Point2) -> f64 {
        let d = self.b - self.a;
        let len_sq = d.norm_sq();
        if len_sq == 0.0 {
            return p.distance(self.a);
        }
        let t = ((p - self.a).dot(d) / len_sq).clamp(0.0, 1.0);
        p.distance(self.a + d * t)
    }

    /// Intersection of the ray `origin + t * dir` (t >= 0, dir unit) with
    /// this segment. Returns the ray parameter t of the hit. Parallel and
    /// collinear rays never hit.
    pub fn ray_intersection(&self, origin: Point2, dir: Point2) -> Option<f64> {
        let e = self.b - self.a;
        let denom = dir.cross(e);
        if denom.abs() < PARALLEL_EPS {
            return None;
        }
        let ao = self.a - origin;
        let t = ao.cross(e) / denom;
        let s = ao.cross(dir) / denom;
        if t >= 0.0 && (0.0..=1.0).contains(&s) {
            Some(t)
        } else {
            None
        }
    }

    /// Proper or touching intersection between two segments.
    pub fn intersects(&self, other: &Segment) -> bool {
        let d1 = self.b - self.a;
        let d2 = other.b - other.a;
        let denom = d1.cross(d2);
        let ao = other.a - self.a;
        if denom.abs() < PARALLEL_EPS {
            // Collinear overlap counts, parallel non-collinear does not.
            if ao.cross(d1).abs() > PARALLEL_EPS {
                return false;
            }
            let len_sq = d1.norm_sq();
            if len_sq == 0.0 {
                return self.a.distance(other.a) < PARALLEL_EPS
                    || self.a.distance(other.b) < PARALLEL_EPS;
            }
            let t0 = ao.dot(d1) / len_sq;
            let t1 = (other.b - self.a).dot(d1) / len_sq;
            let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            return hi >= 0.0 && lo <= 1.0;
        }
        let t = ao.cross(d2) / denom;
        let s = ao.cross(d1) / denom;
        (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&s)
    }
}

/// Closed convex polygon, vertices in counter-clockwise order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl ConvexPolygon {
    /// Builds a polygon, checking CCW winding and convexity.
    pub fn new(vertices: Vec<Point2>) -> Option<Self> {
        if vertices.len() < 3 {
            return None;
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).cross(c - b) <= 0.0 {
                return None;
            }
        }
        Some(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Point containment, boundary inclusive.
    pub fn contains(&self, p: Point2) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (b - a).cross(p - a) < 0.0 {
                return false;
            }
        }
        true
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.vertices.len() as f64;
        let mut c = Point2::default();
        for v in &self.vertices {
            c = c + *v;
        }
        c * (1.0 / n)
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn aabb(&self) -> (Point2, Point2) {
        let mut min = self.vertices[0];
        let mut max = self.vertices[0];
        for v in &self.vertices {
            min.x = min.x.min(v.x);
            min.y = min.y.min(v.y);
            max.x = max.x.max(v.x);
            max.y = max.y.max(v.y);
        }
        (min, max)
    }

    /// Regular n-gon approximating a disc, CCW.
    pub fn regular(center: Point2, radius: f64, sides: usize) -> Self {
        let vertices = (0..sides)
            .map(|i| {
                let a = TAU * i as f64 / sides as f64;
                center + Point2::from_angle(a) * radius
            })
            .collect();
        Self { vertices }
    }

    /// Axis-aligned rectangle, CCW.
    pub fn rect(min: Point2, max: Point2) -> Self {
        Self {
            vertices: vec![
                min,
                Point2::new(max.x, min.y),
                max,
                Point2::new(min.x, max.y),
            ],
        }
    }
}

/// Discretization of a rectangular region into square cells. Cell (0, 0)
/// has its minimum corner at `origin`; centers sit at half-cell offsets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub origin: Point2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridFrame {
    pub fn from_bounds(bounds: &Bounds, resolution: f64) -> Self {
        Self {
            origin: bounds.min,
            resolution,
            width: (bounds.width() / resolution).ceil().max(1.0) as usize,
            height: (bounds.height() / resolution).ceil().max(1.0) as usize,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let cx = ((p.x - self.origin.x) / self.resolution).floor();
        let cy = ((p.y - self.origin.y) / self.resolution).floor();
        if cx < 0.0 || cy < 0.0 || cx >= self.width as f64 || cy >= self.height as f64 {
            None
        } else {
            Some((cx as usize, cy as usize))
        }
    }

    pub fn cell_center(&self, cx: usize, cy: usize) -> Point2 {
        Point2::new(
            self.origin.x + (cx as f64 + 0.5) * self.resolution,
            self.origin.y + (cy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn index(&self, cx: usize, cy: usize) -> usize {
        cy * self.width + cx
    }
}

/// Axis-aligned rectangle used for world bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Point2,
    pub max: Point2,
}

impl Bounds {
    pub fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_strict(&self, p: Point2) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_normalization_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        for i in -20..20 {
            let t = normalize_angle(i as f64 * 0.7);
            assert!(t > -PI && t <= PI, "angle {t} out of range");
        }
    }

    #[test]
    fn ray_hits_axis_aligned_wall() {
        let seg = Segment::new(Point2::new(5.0, -1.0), Point2::new(5.0, 1.0));
        let t = seg
            .ray_intersection(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0))
            .unwrap();
        assert!((t - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ray_misses_behind() {
        let seg = Segment::new(Point2::new(-5.0, -1.0), Point2::new(-5.0, 1.0));
        assert!(seg
            .ray_intersection(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0))
            .is_none());
    }

    #[test]
    fn point_segment_distance() {
        let seg = Segment::new(Point2::new(0.0, 0.0), Point2::new(2.0, 0.0));
        assert!((seg.distance_to_point(Point2::new(1.0, 1.5)) - 1.5).abs() < 1e-12);
        assert!((seg.distance_to_point(Point2::new(3.0, 0.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convex_polygon_rejects_cw_and_degenerate() {
        let cw = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
        ];
        assert!(ConvexPolygon::new(cw).is_none());
        let line = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
        ];
        assert!(ConvexPolygon::new(line).is_none());
    }

    #[test]
    fn polygon_contains_boundary_inclusive() {
        let sq = ConvexPolygon::rect(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0));
        assert!(sq.contains(Point2::new(0.5, 0.5)));
        assert!(sq.contains(Point2::new(0.0, 0.5)));
        assert!(!sq.contains(Point2::new(-0.001, 0.5)));
    }

    #[test]
    fn pose_transform_round_trip() {
        let pose = Pose::new(1.0, 2.0, PI / 3.0);
        let w = pose.to_world(Point2::new(2.0, 0.0));
        assert!((w.distance(pose.position()) - 2.0).abs() < 1e-12);
        let expected = Point2::new(1.0 + 2.0 * (PI / 3.0).cos(), 2.0 + 2.0 * (PI / 3.0).sin());
        assert!(w.distance(expected) < 1e-12);
    }
}
