//! 8-connected A* over an occupancy grid with the octile heuristic.
//!
//! Diagonal moves may not cut a corner: both orthogonal neighbours must be
//! traversable.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::world::{CellIndex, OccupancyGrid, Point2, FREE, UNKNOWN};

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub cells: Vec<CellIndex>,
    /// Length in meters along cell centers.
    pub length: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PlanOptions {
    pub through_unknown: bool,
}

impl PlanOptions {
    #[inline]
    fn traversable(&self, v: i8) -> bool {
        v == FREE || (self.through_unknown && v == UNKNOWN)
    }
}

/// Octile distance in cells.
#[inline]
pub fn octile(a: CellIndex, b: CellIndex) -> f64 {
    let dx = a.x.abs_diff(b.x) as f64;
    let dy = a.y.abs_diff(b.y) as f64;
    dx.max(dy) + (SQRT_2 - 1.0) * dx.min(dy)
}

#[derive(Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    index: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, then prefer deeper nodes, then lower index
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Plans from the cell containing `start` to the cell containing `goal`.
/// `Ok(None)` means unreachable (including a goal outside the map or on a
/// blocked cell).
pub fn plan_path(map: &OccupancyGrid, start: Point2, goal: Point2, opts: PlanOptions) -> Result<Option<Path>> {
    let start_cell = map
        .world_to_grid_pt(start)
        .filter(|c| opts.traversable(map.get(*c)))
        .ok_or(Error::BlockedPose {
            x: start.x,
            y: start.y,
        })?;
    let Some(goal_cell) = map.world_to_grid_pt(goal) else {
        return Ok(None);
    };
    if !opts.traversable(map.get(goal_cell)) {
        return Ok(None);
    }
    Ok(astar(map, start_cell, goal_cell, opts))
}

pub fn astar(map: &OccupancyGrid, start: CellIndex, goal: CellIndex, opts: PlanOptions) -> Option<Path> {
    let n = map.len();
    let s = map.index(start);
    let t = map.index(goal);
    let mut g_score = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g_score[s] = 0.0;
    open.push(Open {
        f: octile(start, goal),
        g: 0.0,
        index: s,
    });

    while let Some(Open { g, index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        if index == t {
            return Some(reconstruct(map, &parent, s, t, g));
        }
        closed[index] = true;
        let c = map.cell_at(index);
        for (dx, dy) in [
            (1isize, 0isize),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ] {
            let nx = c.x as isize + dx;
            let ny = c.y as isize + dy;
            let Some(v) = map.get_signed(nx, ny) else {
                continue;
            };
            if !opts.traversable(v) {
                continue;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal {
                let side_a = map.get_signed(c.x as isize + dx, c.y as isize);
                let side_b = map.get_signed(c.x as isize, c.y as isize + dy);
                if !side_a.is_some_and(|v| opts.traversable(v)) || !side_b.is_some_and(|v| opts.traversable(v)) {
                    continue;
                }
            }
            let nc = CellIndex::new(nx as usize, ny as usize);
            let j = map.index(nc);
            if closed[j] {
                continue;
            }
            let step = if diagonal { SQRT_2 } else { 1.0 };
            let tentative = g + step;
            if tentative < g_score[j] {
                g_score[j] = tentative;
                parent[j] = index;
                open.push(Open {
                    f: tentative + octile(nc, goal),
                    g: tentative,
                    index: j,
                });
            }
        }
    }
    None
}

fn reconstruct(map: &OccupancyGrid, parent: &[usize], s: usize, t: usize, g: f64) -> Path {
    let mut cells = vec![map.cell_at(t)];
    let mut cur = t;
    while cur != s {
        cur = parent[cur];
        cells.push(map.cell_at(cur));
    }
    cells.reverse();
    Path {
        cells,
        length: g * map.resolution(),
    }
}
