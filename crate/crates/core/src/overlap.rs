//! Overlap ("IoU") map between two robots' occupancy grids.
//!
//! The overlap region is the intersection of the two maps' known-cell
//! bounding boxes. Inside it a cell is known only where both inputs know it:
//! free when both are free, occupied when either is occupied.

use crate::error::{Error, Result};
use crate::world::{CellIndex, OccupancyGrid, FREE, OCCUPIED, UNKNOWN};

#[derive(Clone, Debug, PartialEq)]
pub struct IoUMap {
    map: OccupancyGrid,
}

impl IoUMap {
    pub fn map(&self) -> &OccupancyGrid {
        &self.map
    }

    pub fn into_map(self) -> OccupancyGrid {
        self.map
    }

    /// Region width in cells.
    pub fn width(&self) -> usize {
        self.map.width()
    }

    /// Region height in cells.
    pub fn height(&self) -> usize {
        self.map.height()
    }

    /// Known area in square meters.
    pub fn area(&self) -> f64 {
        iou_area(self)
    }
}

/// Per-cell rule: both free -> free; both known and either occupied ->
/// occupied; otherwise unknown.
#[inline]
pub fn overlap_cell(a: i8, b: i8) -> i8 {
    if a != UNKNOWN && b != UNKNOWN {
        if a == FREE && b == FREE {
            return FREE;
        } else if a == OCCUPIED || b == OCCUPIED {
            return OCCUPIED;
        }
    }
    UNKNOWN
}

pub fn compute_iou(m1: &OccupancyGrid, m2: &OccupancyGrid) -> Result<IoUMap> {
    let res = m1.resolution();
    if m2.resolution() != res {
        return Err(Error::ResolutionMismatch(res, m2.resolution()));
    }
    let empty = || -> Result<IoUMap> {
        Ok(IoUMap {
            map: OccupancyGrid::new(0, 0, res, m1.origin())?,
        })
    };
    let (Some((lo1, hi1)), Some((lo2, hi2))) = (m1.known_bbox(), m2.known_bbox()) else {
        return empty();
    };

    // M2's bounding box expressed on M1's lattice
    let off_x = ((m2.origin().x - m1.origin().x) / res).round() as i64;
    let off_y = ((m2.origin().y - m1.origin().y) / res).round() as i64;
    let x0 = (lo1.x as i64).max(lo2.x as i64 + off_x);
    let y0 = (lo1.y as i64).max(lo2.y as i64 + off_y);
    let x1 = (hi1.x as i64).min(hi2.x as i64 + off_x);
    let y1 = (hi1.y as i64).min(hi2.y as i64 + off_y);
    if x1 < x0 || y1 < y0 {
        return empty();
    }
    let (w, h) = ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
    let origin = m1.cell_center(CellIndex::new(x0 as usize, y0 as usize));
    let origin = crate::world::Point2::new(origin.x - res / 2.0, origin.y - res / 2.0);
    let mut result = OccupancyGrid::new(w, h, res, origin)?;

    for iy in 0..h {
        for ix in 0..w {
            let p = result.cell_center(CellIndex::new(ix, iy));
            let (Some(idx1), Some(idx2)) = (m1.world_to_grid_pt(p), m2.world_to_grid_pt(p)) else {
                continue;
            };
            let v = overlap_cell(m1.get(idx1), m2.get(idx2));
            if v != UNKNOWN {
                result.set(CellIndex::new(ix, iy), v);
            }
        }
    }
    Ok(IoUMap { map: result })
}

pub fn iou_area(m: &IoUMap) -> f64 {
    let res = m.map.resolution();
    m.map.known_count() as f64 * res * res
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Point2;

    fn g(w: usize, h: usize, cells: Vec<i8>) -> OccupancyGrid {
        OccupancyGrid::from_cells(w, h, 1.0, Point2::default(), cells).unwrap()
    }

    #[test]
    fn self_overlap_is_identity() {
        let m = g(3, 2, vec![0, 100, 0, 0, 0, 100]);
        let iou = compute_iou(&m, &m).unwrap();
        assert_eq!(iou.map(), &m);
    }

    #[test]
    fn disjoint_halves_have_no_known_cells() {
        let a = g(4, 2, vec![0, 0, -1, -1, 0, 100, -1, -1]);
        let b = g(4, 2, vec![-1, -1, 0, 0, -1, -1, 100, 0]);
        let iou = compute_iou(&a, &b).unwrap();
        assert_eq!(iou.map().known_count(), 0);
        assert_eq!(iou.area(), 0.0);
    }

    #[test]
    fn two_by_two_branch_table() {
        // rows listed top-down in the example, stored bottom-up here
        let m1 = g(2, 2, vec![0, -1, 0, 100]);
        let m2 = g(2, 2, vec![100, 0, 0, 0]);
        let iou = compute_iou(&m1, &m2).unwrap();
        assert_eq!(iou.map().cells(), &[100, -1, 0, 100]);
    }

    #[test]
    fn branch_ladder_matches_enumeration() {
        for a in [UNKNOWN, FREE, OCCUPIED] {
            for b in [UNKNOWN, FREE, OCCUPIED] {
                let expect = match (a, b) {
                    (UNKNOWN, _) | (_, UNKNOWN) => UNKNOWN,
                    (FREE, FREE) => FREE,
                    _ => OCCUPIED,
                };
                assert_eq!(overlap_cell(a, b), expect, "{a} {b}");
            }
        }
    }

    #[test]
    fn area_counts_known_cells() {
        let mut cells = vec![-1i8; 25];
        for c in cells.iter_mut().take(10) {
            *c = 0;
        }
        let m = OccupancyGrid::from_cells(5, 5, 0.1, Point2::default(), cells).unwrap();
        let iou = compute_iou(&m, &m).unwrap();
        assert!((iou.area() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn region_is_bbox_intersection() {
        let mut a = g(6, 6, vec![-1; 36]);
        let mut b = g(6, 6, vec![-1; 36]);
        for y in 0..4 {
            for x in 0..4 {
                a.set(CellIndex::new(x, y), FREE);
                b.set(CellIndex::new(x + 2, y + 2), FREE);
            }
        }
        let iou = compute_iou(&a, &b).unwrap();
        assert_eq!((iou.width(), iou.height()), (2, 2));
        assert_eq!(iou.map().origin(), Point2::new(2.0, 2.0));
        assert_eq!(iou.map().known_count(), 4);
    }

    #[test]
    fn resolution_mismatch_is_error() {
        let a = g(1, 1, vec![0]);
        let b = OccupancyGrid::from_cells(1, 1, 0.5, Point2::default(), vec![0]).unwrap();
        assert!(compute_iou(&a, &b).is_err());
    }

    #[test]
    fn all_unknown_input_gives_empty_region() {
        let a = g(2, 2, vec![-1; 4]);
        let b = g(2, 2, vec![0; 4]);
        let iou = compute_iou(&a, &b).unwrap();
        assert_eq!(iou.width() * iou.height(), 0);
        assert_eq!(iou_area(&iou), 0.0);
    }
}
