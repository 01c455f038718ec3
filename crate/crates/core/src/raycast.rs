//! Grid line traversal (Amanatides & Woo) over an occupancy lattice.
//!
//! Consecutive cells always share an edge, so a ray never slips between two
//! diagonally touching obstacle cells.

use crate::world::{CellIndex, Point2};

/// Lattice description needed for traversal.
#[derive(Clone, Copy, Debug)]
pub struct Lattice {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Point2,
}

impl Lattice {
    pub fn of(grid: &crate::world::OccupancyGrid) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            resolution: grid.resolution(),
            origin: grid.origin(),
        }
    }
}

/// A visited cell and the distance along the ray at which it was entered.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayCell {
    pub cell: CellIndex,
    pub entry: f64,
}

/// Cells crossed by the segment `from -> to`, starting with the cell that
/// contains `from`. Traversal stops when the segment leaves the lattice.
/// Returns nothing when `from` lies outside.
pub fn traverse(lattice: &Lattice, from: Point2, to: Point2) -> Vec<RayCell> {
    let mut out = Vec::new();
    walk(lattice, from, to, |rc| {
        out.push(rc);
        true
    });
    out
}

/// Visits cells along `from -> to` until `visit` returns `false`.
pub fn walk(lattice: &Lattice, from: Point2, to: Point2, mut visit: impl FnMut(RayCell) -> bool) {
    let res = lattice.resolution;
    let gx = (from.x - lattice.origin.x) / res;
    let gy = (from.y - lattice.origin.y) / res;
    if !(gx >= 0.0 && gy >= 0.0) || gx >= lattice.width as f64 || gy >= lattice.height as f64 {
        return;
    }
    let mut ix = gx.floor() as isize;
    let mut iy = gy.floor() as isize;
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let length = dx.hypot(dy);
    if !visit(RayCell {
        cell: CellIndex::new(ix as usize, iy as usize),
        entry: 0.0,
    }) {
        return;
    }
    if length == 0.0 {
        return;
    }
    let (ux, uy) = (dx / length, dy / length);
    let step_x: isize = if ux > 0.0 { 1 } else { -1 };
    let step_y: isize = if uy > 0.0 { 1 } else { -1 };
    // distance along the ray to the next vertical / horizontal grid line
    let mut t_max_x = if ux == 0.0 {
        f64::INFINITY
    } else {
        let bound = if ux > 0.0 { ix as f64 + 1.0 } else { ix as f64 };
        (bound - gx) * res / ux
    };
    let mut t_max_y = if uy == 0.0 {
        f64::INFINITY
    } else {
        let bound = if uy > 0.0 { iy as f64 + 1.0 } else { iy as f64 };
        (bound - gy) * res / uy
    };
    let t_delta_x = if ux == 0.0 { f64::INFINITY } else { res / ux.abs() };
    let t_delta_y = if uy == 0.0 { f64::INFINITY } else { res / uy.abs() };

    loop {
        let entry;
        if t_max_x < t_max_y {
            entry = t_max_x;
            ix += step_x;
            t_max_x += t_delta_x;
        } else {
            entry = t_max_y;
            iy += step_y;
            t_max_y += t_delta_y;
        }
        if entry > length {
            return;
        }
        if ix < 0 || iy < 0 || ix as usize >= lattice.width || iy as usize >= lattice.height {
            return;
        }
        if !visit(RayCell {
            cell: CellIndex::new(ix as usize, iy as usize),
            entry,
        }) {
            return;
        }
    }
}
