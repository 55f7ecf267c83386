//! Global search maps and frontier extraction.
//!
//! Two occupancy grids are maintained per run: one fed by the full 360°
//! LiDAR, one by the cone-FoV visual sensor. Cells start unknown and are
//! carved free along traversed rays / marked occupied at hits, latest
//! evidence winning. Frontiers are connected groups of free cells adjacent
//! to unknown space; their centroids seed candidate viewpoints.

use crate::geom::{GridFrame, Point2, Pose};
use crate::world::{LineWorld, Scan, SensorSpec};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[repr(i8)]
pub enum CellState {
    Unknown = -1,
    Free = 0,
    Occupied = 1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensorKind {
    Lidar,
    Visual,
}

/// Occupancy grid with cells in {unknown, free, occupied}.
#[derive(Clone, Debug)]
pub struct SearchMap {
    pub frame: GridFrame,
    pub sensor_kind: SensorKind,
    cells: Vec<CellState>,
}

impl SearchMap {
    pub fn new(frame: GridFrame, sensor_kind: SensorKind) -> Self {
        Self {
            cells: vec![CellState::Unknown; frame.len()],
            frame,
            sensor_kind,
        }
    }

    pub fn for_world(world: &LineWorld, resolution: f64, sensor_kind: SensorKind) -> Self {
        Self::new(GridFrame::from_bounds(&world.bounds(), resolution), sensor_kind)
    }

    pub fn get(&self, cx: usize, cy: usize) -> CellState {
        self.cells[self.frame.index(cx, cy)]
    }

    pub fn set(&mut self, cx: usize, cy: usize, state: CellState) {
        let i = self.frame.index(cx, cy);
        self.cells[i] = state;
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn state_at(&self, p: Point2) -> Option<CellState> {
        self.frame.cell_of(p).map(|(cx, cy)| self.get(cx, cy))
    }

    fn cell_of_clamped(&self, p: Point2) -> (usize, usize) {
        let f = &self.frame;
        let cx = ((p.x - f.origin.x) / f.resolution).floor();
        let cy = ((p.y - f.origin.y) / f.resolution).floor();
        (
            (cx.max(0.0) as usize).min(f.width - 1),
            (cy.max(0.0) as usize).min(f.height - 1),
        )
    }

    /// Integrates one LiDAR scan: cells along each ray before the hit become
    /// free, hit cells become occupied, no-hit rays carve free to max range.
    /// Occupied evidence from this scan wins over free from the same scan.
    pub fn update_lidar(&mut self, pose: &Pose, scan: &Scan) {
        debug_assert_eq!(self.sensor_kind, SensorKind::Lidar);
        let origin = pose.position();
        let mut hit_cells = Vec::new();
        for j in 0..scan.n_beams() {
            let angle = scan.beam_angle(pose, j);
            let end = origin + Point2::from_angle(angle) * scan.ranges[j];
            let cells = trace_cells(&self.frame, origin, end);
            let n = cells.len();
            for (i, &(cx, cy)) in cells.iter().enumerate() {
                if scan.hits[j] && i + 1 == n {
                    hit_cells.push((cx, cy));
                } else {
                    self.set(cx, cy, CellState::Free);
                }
            }
        }
        for (cx, cy) in hit_cells {
            self.set(cx, cy, CellState::Occupied);
        }
    }

    /// Integrates the same scan restricted to the visual cone: only cells
    /// whose centers lie inside the cone are ever touched, and ranges are
    /// clipped to the visual max range.
    pub fn update_visual(&mut self, pose: &Pose, scan: &Scan, spec: &SensorSpec) {
        debug_assert_eq!(self.sensor_kind, SensorKind::Visual);
        let origin = pose.position();
        let half = spec.visual_fov_angle / 2.0;
        let mut hit_cells = Vec::new();
        for j in 0..scan.n_beams() {
            let angle = scan.beam_angle(pose, j);
            if crate::geom::angle_diff(angle, pose.theta).abs() > half {
                continue;
            }
            let r = scan.ranges[j].min(spec.visual_max_range);
            let sees_hit = scan.hits[j] && scan.ranges[j] <= spec.visual_max_range;
            let end = origin + Point2::from_angle(angle) * r;
            let cells = trace_cells(&self.frame, origin, end);
            let n = cells.len();
            for (i, &(cx, cy)) in cells.iter().enumerate() {
                if !LineWorld::in_cone(pose, spec, self.frame.cell_center(cx, cy)) {
                    continue;
                }
                if sees_hit && i + 1 == n {
                    hit_cells.push((cx, cy));
                } else {
                    self.set(cx, cy, CellState::Free);
                }
            }
        }
        for (cx, cy) in hit_cells {
            self.set(cx, cy, CellState::Occupied);
        }
    }

    /// True when no occupied cell lies strictly before the cell containing
    /// `to` on the grid line from `from`. Unknown cells are transparent.
    pub fn los_not_occluded(&self, from: Point2, to: Point2) -> bool {
        let cells = trace_cells(&self.frame, from, to);
        let n = cells.len();
        for (i, &(cx, cy)) in cells.iter().enumerate() {
            if i + 1 == n {
                break;
            }
            if i == 0 {
                continue; // the observer's own cell never occludes
            }
            if self.get(cx, cy) == CellState::Occupied {
                return false;
            }
        }
        true
    }

    /// True when every traversed cell (both endpoints included) is free.
    pub fn los_free(&self, from: Point2, to: Point2) -> bool {
        trace_cells(&self.frame, from, to)
            .iter()
            .all(|&(cx, cy)| self.get(cx, cy) == CellState::Free)
    }

    /// Number of currently unknown cells inside the visual cone of
    /// `candidate`, with occupied cells acting as occluders and unknown
    /// cells transparent.
    pub fn count_unknown_visible(&self, candidate: &Pose, spec: &SensorSpec) -> usize {
        let pos = candidate.position();
        let r = spec.visual_max_range;
        let (x0, y0) = self.cell_of_clamped(Point2::new(pos.x - r, pos.y - r));
        let (x1, y1) = self.cell_of_clamped(Point2::new(pos.x + r, pos.y + r));
        let mut count = 0;
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                if self.get(cx, cy) != CellState::Unknown {
                    continue;
                }
                let center = self.frame.cell_center(cx, cy);
                if !LineWorld::in_cone(candidate, spec, center) {
                    continue;
                }
                if self.los_not_occluded(pos, center) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Writes a portable grey-map (PGM P5) plus a JSON sidecar carrying
    /// resolution and origin.
    pub fn save_pgm(&self, prefix: &Path) -> crate::error::Result<()> {
        let pgm_path = prefix.with_extension("pgm");
        let mut out = Vec::with_capacity(self.cells.len() + 64);
        write!(
            &mut out,
            "P5\n{} {}\n255\n",
            self.frame.width, self.frame.height
        )?;
        // top row first so the image reads north-up
        for cy in (0..self.frame.height).rev() {
            for cx in 0..self.frame.width {
                let v = match self.get(cx, cy) {
                    CellState::Unknown => 205u8,
                    CellState::Free => 254,
                    CellState::Occupied => 0,
                };
                out.push(v);
            }
        }
        std::fs::write(&pgm_path, out)?;
        let meta = serde_json::json!({
            "resolution": self.frame.resolution,
            "origin": [self.frame.origin.x, self.frame.origin.y],
            "width": self.frame.width,
            "height": self.frame.height,
            "sensor": match self.sensor_kind { SensorKind::Lidar => "lidar", SensorKind::Visual => "visual" },
        });
        std::fs::write(
            prefix.with_extension("json"),
            serde_json::to_string_pretty(&meta)?,
        )?;
        Ok(())
    }
}

/// Connected group of frontier-edge cells with its centroid.
#[derive(Clone, Debug)]
pub struct Frontier {
    pub cells: Vec<(usize, usize)>,
    pub centroid: Point2,
    pub source: SensorKind,
}

/// Frontier edges are free cells 4-adjacent to at least one unknown cell,
/// grouped into 8-connected components; components smaller than
/// `min_frontier_size` are discarded. Output order is deterministic
/// (components by their smallest row-major cell index).
pub fn extract_frontiers(map: &SearchMap, min_frontier_size: usize) -> Vec<Frontier> {
    let f = &map.frame;
    let w = f.width;
    let h = f.height;
    let mut edge = vec![false; f.len()];
    for cy in 0..h {
        for cx in 0..w {
            if map.get(cx, cy) != CellState::Free {
                continue;
            }
            let mut adjacent_unknown = false;
            if cx > 0 && map.get(cx - 1, cy) == CellState::Unknown {
                adjacent_unknown = true;
            }
            if cx + 1 < w && map.get(cx + 1, cy) == CellState::Unknown {
                adjacent_unknown = true;
            }
            if cy > 0 && map.get(cx, cy - 1) == CellState::Unknown {
                adjacent_unknown = true;
            }
            if cy + 1 < h && map.get(cx, cy + 1) == CellState::Unknown {
                adjacent_unknown = true;
            }
            if adjacent_unknown {
                edge[f.index(cx, cy)] = true;
            }
        }
    }

    let mut seen = vec![false; f.len()];
    let mut frontiers = Vec::new();
    for start in 0..f.len() {
        if !edge[start] || seen[start] {
            continue;
        }
        let mut cells = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let (cx, cy) = (i % w, i / w);
            cells.push((cx, cy));
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = cx as i64 + dx;
                    let ny = cy as i64 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let ni = ny as usize * w + nx as usize;
                    if edge[ni] && !seen[ni] {
                        seen[ni] = true;
                        stack.push(ni);
                    }
                }
            }
        }
        if cells.len() < min_frontier_size {
            continue;
        }
        cells.sort_unstable_by_key(|&(cx, cy)| f.index(cx, cy));
        let mut sum = Point2::default();
        for &(cx, cy) in &cells {
            sum = sum + f.cell_center(cx, cy);
        }
        let centroid = sum * (1.0 / cells.len() as f64);
        frontiers.push(Frontier {
            cells,
            centroid,
            source: map.sensor_kind,
        });
    }
    frontiers
}

/// Ordered cells traversed by the segment from `a` to `b` (both endpoint
/// cells included), clipped to the frame. Amanatides–Woo traversal.
pub fn trace_cells(frame: &GridFrame, a: Point2, b: Point2) -> Vec<(usize, usize)> {
    let res = frame.resolution;
    let clamp_cell = |p: Point2| -> (i64, i64) {
        let cx = ((p.x - frame.origin.x) / res).floor() as i64;
        let cy = ((p.y - frame.origin.y) / res).floor() as i64;
        (
            cx.clamp(0, frame.width as i64 - 1),
            cy.clamp(0, frame.height as i64 - 1),
        )
    };
    let (mut cx, mut cy) = clamp_cell(a);
    let (ex, ey) = clamp_cell(b);
    let d = b - a;
    let len = d.norm();
    let mut out = Vec::with_capacity(((len / res) as usize).saturating_add(2));
    out.push((cx as usize, cy as usize));
    if len == 0.0 {
        return out;
    }
    let dir = d * (1.0 / len);
    let step_x: i64 = if dir.x > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dir.y > 0.0 { 1 } else { -1 };
    let next_bound = |i: i64, step: i64, org: f64| -> f64 {
        let edge = if step > 0 { i + 1 } else { i };
        org + edge as f64 * res
    };
    let mut t_max_x = if dir.x != 0.0 {
        (next_bound(cx, step_x, frame.origin.x) - a.x) / dir.x
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dir.y != 0.0 {
        (next_bound(cy, step_y, frame.origin.y) - a.y) / dir.y
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dir.x != 0.0 {
        res / dir.x.abs()
    } else {
        f64::INFINITY
    };
    let t_delta_y = if dir.y != 0.0 {
        res / dir.y.abs()
    } else {
        f64::INFINITY
    };
    loop {
        if (cx, cy) == (ex, ey) || t_max_x.min(t_max_y) > len {
            break;
        }
        if t_max_x < t_max_y {
            t_max_x += t_delta_x;
            cx += step_x;
        } else {
            t_max_y += t_delta_y;
            cy += step_y;
        }
        if cx < 0 || cy < 0 || cx >= frame.width as i64 || cy >= frame.height as i64 {
            break;
        }
        out.push((cx as usize, cy as usize));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Bounds;

    fn frame_10m() -> GridFrame {
        GridFrame::from_bounds(
            &Bounds::new(Point2::new(0.0, 0.0), Point2::new(10.0, 10.0)),
            0.1,
        )
    }

    fn synthetic_scan(ranges: Vec<f64>, hits: Vec<bool>, max_range: f64) -> Scan {
        Scan {
            ranges,
            hits,
            max_range,
            timestamp: 0,
        }
    }

    #[test]
    fn single_beam_free_run_then_occupied() {
        let mut map = SearchMap::new(frame_10m(), SensorKind::Lidar);
        let pose = Pose::new(1.05, 5.05, 0.0);
        let scan = synthetic_scan(vec![2.0], vec![true], 10.0);
        map.update_lidar(&pose, &scan);
        // hit point at x = 3.05 -> cell 30; robot cell 10; 19 cells strictly between
        let row = 50;
        assert_eq!(map.get(30, row), CellState::Occupied);
        let between: Vec<usize> = (11..30).collect();
        assert_eq!(between.len(), 19);
        for cx in between {
            assert_eq!(map.get(cx, row), CellState::Free, "cell {cx}");
        }
        assert_eq!(map.get(10, row), CellState::Free);
        // cells beyond the hit stay unknown
        assert_eq!(map.get(31, row), CellState::Unknown);
    }

    #[test]
    fn no_hit_beam_marks_free_to_max_range() {
        let mut map = SearchMap::new(frame_10m(), SensorKind::Lidar);
        let pose = Pose::new(1.05, 5.05, 0.0);
        let scan = synthetic_scan(vec![3.0], vec![false], 3.0);
        map.update_lidar(&pose, &scan);
        for cx in 10..=40 {
            assert_eq!(map.get(cx, 50), CellState::Free, "cell {cx}");
        }
        assert_eq!(map.get(41, 50), CellState::Unknown);
    }

    #[test]
    fn repeated_scans_idempotent() {
        let mut map = SearchMap::new(frame_10m(), SensorKind::Lidar);
        let pose = Pose::new(5.05, 5.05, 0.3);
        let scan = synthetic_scan(vec![2.0, 3.0, 1.5, 2.5], vec![true, true, false, true], 10.0);
        map.update_lidar(&pose, &scan);
        let snapshot = map.cells().to_vec();
        map.update_lidar(&pose, &scan);
        assert_eq!(map.cells(), &snapshot[..]);
    }

    #[test]
    fn visual_update_stays_inside_cone() {
        let spec = SensorSpec {
            n_beams: 64,
            visual_max_range: 3.0,
            visual_fov_angle: 60f64.to_radians(),
            ..SensorSpec::default()
        };
        let mut map = SearchMap::new(frame_10m(), SensorKind::Visual);
        let pose = Pose::new(5.05, 5.05, 0.7);
        let scan = synthetic_scan(vec![5.0; 64], vec![true; 64], 10.0);
        map.update_visual(&pose, &scan, &spec);
        let mut touched = 0;
        for cy in 0..map.frame.height {
            for cx in 0..map.frame.width {
                if map.get(cx, cy) != CellState::Unknown {
                    touched += 1;
                    let c = map.frame.cell_center(cx, cy);
                    assert!(
                        LineWorld::in_cone(&pose, &spec, c),
                        "cell ({cx},{cy}) outside cone was modified"
                    );
                    // hits were at 5 m, beyond visual range: no occupied cells
                    assert_eq!(map.get(cx, cy), CellState::Free);
                }
            }
        }
        assert!(touched > 10);
    }

    #[test]
    fn fully_known_map_has_no_frontiers() {
        let mut map = SearchMap::new(frame_10m(), SensorKind::Lidar);
        for cy in 0..map.frame.height {
            for cx in 0..map.frame.width {
                map.set(cx, cy, CellState::Free);
            }
        }
        assert!(extract_frontiers(&map, 1).is_empty());
    }

    #[test]
    fn straight_boundary_single_frontier_with_midpoint_centroid() {
        // free strip 10 cells wide at row 5, unknown above, occupied below
        let frame = GridFrame {
            origin: Point2::new(0.0, 0.0),
            resolution: 0.1,
            width: 10,
            height: 12,
        };
        let mut map = SearchMap::new(frame, SensorKind::Lidar);
        for cy in 0..6 {
            for cx in 0..10 {
                map.set(cx, cy, CellState::Free);
            }
        }
        // rows 6.. stay unknown; frontier row is cy == 5
        let frontiers = extract_frontiers(&map, 5);
        assert_eq!(frontiers.len(), 1);
        assert_eq!(frontiers[0].cells.len(), 10);
        let c = frontiers[0].centroid;
        assert!((c.x - 0.5).abs() < 1e-12);
        assert!((c.y - 0.55).abs() < 1e-12);
    }

    #[test]
    fn min_frontier_size_filters_small_groups() {
        let frame = GridFrame {
            origin: Point2::new(0.0, 0.0),
            resolution: 0.1,
            width: 10,
            height: 10,
        };
        let mut map = SearchMap::new(frame, SensorKind::Lidar);
        // a 3-cell free island adjacent to unknown
        for cx in 0..3 {
            map.set(cx, 0, CellState::Free);
        }
        assert!(extract_frontiers(&map, 5).is_empty());
        assert_eq!(extract_frontiers(&map, 3).len(), 1);
    }

    #[test]
    fn count_unknown_empty_when_surroundings_known() {
        let mut map = SearchMap::new(frame_10m(), SensorKind::Visual);
        for cy in 0..map.frame.height {
            for cx in 0..map.frame.width {
                map.set(cx, cy, CellState::Free);
            }
        }
        let spec = SensorSpec::default();
        assert_eq!(
            map.count_unknown_visible(&Pose::new(5.0, 5.0, 0.0), &spec),
            0
        );
    }

    #[test]
    fn count_unknown_full_cone_when_all_unknown() {
        let map = SearchMap::new(frame_10m(), SensorKind::Visual);
        let spec = SensorSpec {
            visual_max_range: 2.0,
            ..SensorSpec::default()
        };
        let pose = Pose::new(5.05, 5.05, 0.0);
        let got = map.count_unknown_visible(&pose, &spec);
        // oracle: every cell center inside cone counts (nothing occludes)
        let mut expect = 0;
        for cy in 0..map.frame.height {
            for cx in 0..map.frame.width {
                if LineWorld::in_cone(&pose, &spec, map.frame.cell_center(cx, cy)) {
                    expect += 1;
                }
            }
        }
        assert_eq!(got, expect);
        assert!(got > 50);
    }

    #[test]
    fn trace_cells_straight_and_diagonal() {
        let frame = frame_10m();
        let cells = trace_cells(&frame, Point2::new(0.05, 0.05), Point2::new(0.95, 0.05));
        assert_eq!(cells.len(), 10);
        assert_eq!(cells[0], (0, 0));
        assert_eq!(*cells.last().unwrap(), (9, 0));
        let diag = trace_cells(&frame, Point2::new(0.05, 0.05), Point2::new(0.95, 0.95));
        assert_eq!(diag[0], (0, 0));
        assert_eq!(*diag.last().unwrap(), (9, 9));
        // diagonal supercover visits at least one cell per row and column
        assert!(diag.len() >= 10);
    }
}
