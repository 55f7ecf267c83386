//! Grid path planning over the known-free cells of a search map.
//!
//! A single Dijkstra field from the robot cell prices every reachable cell
//! (8-connected, diagonal cost sqrt(2), no cutting corners past non-free
//! cells); individual candidate paths are extracted by parent walking and
//! then shortened by greedy line-of-sight shortcutting through free cells.

use crate::error::{Error, Result};
use crate::geom::{GridFrame, Point2, Pose};
use crate::mapping::{CellState, SearchMap};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// How far (in cells, Chebyshev) a goal point may be snapped to the nearest
/// free cell. Frontier centroids can sit a hair inside unknown space.
const GOAL_SNAP_CELLS: i64 = 3;

#[derive(Clone, Debug)]
pub struct PlannedPath {
    /// Waypoints with travel headings; the last pose keeps the arrival
    /// direction until the caller overrides it.
    pub poses: Vec<Pose>,
    /// Polyline length in meters (after smoothing).
    pub length: f64,
}

impl PlannedPath {
    pub fn points(&self) -> Vec<Point2> {
        self.poses.iter().map(|p| p.position()).collect()
    }
}

struct HeapEntry {
    cost: f64,
    cell: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (cost, cell); costs are non-negative so bit order works
        other
            .cost
            .to_bits()
            .cmp(&self.cost.to_bits())
            .then(other.cell.cmp(&self.cell))
    }
}

/// Shortest-path distances from one start cell to every known-free cell.
#[derive(Clone, Debug)]
pub struct ReachField {
    frame: GridFrame,
    dist: Vec<f64>,
    parent: Vec<u32>,
    start: (usize, usize),
}

const NO_PARENT: u32 = u32::MAX;

impl ReachField {
    /// Runs Dijkstra from the cell containing `from`. The start must lie in
    /// known-free space.
    pub fn compute(map: &SearchMap, from: Point2) -> Result<ReachField> {
        let frame = map.frame;
        let start = match frame.cell_of(from) {
            Some(c) if map.get(c.0, c.1) == CellState::Free => c,
            _ => return Err(Error::StartNotFree),
        };
        let res = frame.resolution;
        let diag = res * std::f64::consts::SQRT_2;
        let w = frame.width as i64;
        let h = frame.height as i64;
        let mut dist = vec![f64::INFINITY; frame.len()];
        let mut parent = vec![NO_PARENT; frame.len()];
        let start_idx = frame.index(start.0, start.1);
        dist[start_idx] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry {
            cost: 0.0,
            cell: start_idx as u32,
        });
        let free = |cx: i64, cy: i64| -> bool {
            cx >= 0
                && cy >= 0
                && cx < w
                && cy < h
                && map.get(cx as usize, cy as usize) == CellState::Free
        };
        while let Some(HeapEntry { cost, cell }) = heap.pop() {
            let idx = cell as usize;
            if cost > dist[idx] {
                continue;
            }
            let cx = (idx % frame.width) as i64;
            let cy = (idx / frame.width) as i64;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = cx + dx;
                    let ny = cy + dy;
                    if !free(nx, ny) {
                        continue;
                    }
                    let step = if dx != 0 && dy != 0 {
                        // no corner cutting past blocked orthogonal cells
                        if !free(cx + dx, cy) || !free(cx, cy + dy) {
                            continue;
                        }
                        diag
                    } else {
                        res
                    };
                    let nidx = ny as usize * frame.width + nx as usize;
                    let ncost = cost + step;
                    if ncost < dist[nidx] {
                        dist[nidx] = ncost;
                        parent[nidx] = idx as u32;
                        heap.push(HeapEntry {
                            cost: ncost,
                            cell: nidx as u32,
                        });
                    }
                }
            }
        }
        Ok(ReachField {
            frame,
            dist,
            parent,
            start,
        })
    }

    pub fn start_cell(&self) -> (usize, usize) {
        self.start
    }

    /// Grid shortest-path distance to a cell, before smoothing.
    pub fn dist_to_cell(&self, cx: usize, cy: usize) -> Option<f64> {
        let d = self.dist[self.frame.index(cx, cy)];
        d.is_finite().then_some(d)
    }

    /// Snaps `to` to its own cell when free, otherwise to the nearest free
    /// cell within the snap radius (deterministic tie-break by index).
    fn snap_goal(&self, map: &SearchMap, to: Point2) -> Option<(usize, usize)> {
        let f = &self.frame;
        let (gx, gy) = match f.cell_of(to) {
            Some(c) => c,
            None => return None,
        };
        if map.get(gx, gy) == CellState::Free {
            return Some((gx, gy));
        }
        let mut best: Option<((usize, usize), f64)> = None;
        for dy in -GOAL_SNAP_CELLS..=GOAL_SNAP_CELLS {
            for dx in -GOAL_SNAP_CELLS..=GOAL_SNAP_CELLS {
                let nx = gx as i64 + dx;
                let ny = gy as i64 + dy;
                if nx < 0 || ny < 0 || nx >= f.width as i64 || ny >= f.height as i64 {
                    continue;
                }
                let c = (nx as usize, ny as usize);
                if map.get(c.0, c.1) != CellState::Free {
                    continue;
                }
                let d = f.cell_center(c.0, c.1).distance(to);
                let better = match best {
                    None => true,
                    Some((bc, bd)) => {
                        d < bd - 1e-12
                            || ((d - bd).abs() <= 1e-12 && f.index(c.0, c.1) < f.index(bc.0, bc.1))
                    }
                };
                if better {
                    best = Some((c, d));
                }
            }
        }
        best.map(|(c, _)| c)
    }

    /// Raw parent-walk cell path to a goal cell, start first.
    pub fn cell_path(&self, goal: (usize, usize)) -> Option<Vec<(usize, usize)>> {
        let mut idx = self.frame.index(goal.0, goal.1);
        if !self.dist[idx].is_finite() {
            return None;
        }
        let mut cells = vec![goal];
        while self.parent[idx] != NO_PARENT {
            idx = self.parent[idx] as usize;
            cells.push((idx % self.frame.width, idx / self.frame.width));
        }
        cells.reverse();
        Some(cells)
    }

    /// Smoothed path to `to`: parent walk, then greedy line-of-sight
    /// shortcutting through known-free cells. `None` when unreachable.
    pub fn path_to(&self, map: &SearchMap, to: Point2) -> Option<PlannedPath> {
        let goal = self.snap_goal(map, to)?;
        let cells = self.cell_path(goal)?;
        let pts: Vec<Point2> = cells
            .iter()
            .map(|&(cx, cy)| self.frame.cell_center(cx, cy))
            .collect();
        let mut keep = vec![0usize];
        let mut i = 0;
        while i + 1 < pts.len() {
            let mut j = pts.len() - 1;
            while j > i + 1 {
                if map.los_free(pts[i], pts[j]) {
                    break;
                }
                j -= 1;
            }
            keep.push(j);
            i = j;
        }
        let mut poses = Vec::with_capacity(keep.len());
        let mut length = 0.0;
        for (n, &ki) in keep.iter().enumerate() {
            let p = pts[ki];
            let theta = if n + 1 < keep.len() {
                (pts[keep[n + 1]] - p).angle()
            } else if n > 0 {
                (p - pts[keep[n - 1]]).angle()
            } else {
                0.0
            };
            if n > 0 {
                length += p.distance(pts[keep[n - 1]]);
            }
            poses.push(Pose::new(p.x, p.y, theta));
        }
        Some(PlannedPath { poses, length })
    }
}

/// Shortest 8-connected grid path through known-free cells from `from` to
/// `to`, smoothed by line-of-sight shortcutting. `Ok(None)` when the goal
/// is unreachable.
pub fn plan_path(map: &SearchMap, from: &Pose, to: Point2) -> Result<Option<PlannedPath>> {
    let field = ReachField::compute(map, from.position())?;
    Ok(field.path_to(map, to))
}
