#![allow(dead_code)]

use coexplore::world::{CellIndex, OccupancyGrid, Point2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues<const N: usize>(mut a: [[f64; N]; N]) -> [f64; N] {
    for _sweep in 0..100 {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut out = [0.0; N];
    for (i, v) in out.iter_mut().enumerate() {
        *v = a[i][i];
    }
    out
}

/// Geometric mean of the eigenvalues, from the Jacobi oracle.
pub fn d_opt_oracle(a: [[f64; 6]; 6]) -> f64 {
    let eig = jacobi_eigenvalues(a);
    (eig.iter().map(|l| l.ln()).sum::<f64>() / 6.0).exp()
}

/// Per-cell overlap table, written as an explicit lookup.
pub fn overlap_table(a: i8, b: i8) -> i8 {
    match (a, b) {
        (0, 0) => 0,
        (100, 100) => 100,
        (100, 0) | (0, 100) => 100,
        _ => -1,
    }
}

fn bbox(g: &OccupancyGrid) -> Option<(usize, usize, usize, usize)> {
    let mut b: Option<(usize, usize, usize, usize)> = None;
    for y in 0..g.height() {
        for x in 0..g.width() {
            if g.get(CellIndex::new(x, y)) != -1 {
                b = Some(match b {
                    None => (x, y, x, y),
                    Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                });
            }
        }
    }
    b
}

/// Brute force overlap of two maps on the same lattice: returns the region
/// (x0, y0, w, h) and its cells, row-major.
pub fn brute_iou(m1: &OccupancyGrid, m2: &OccupancyGrid) -> Option<(usize, usize, usize, usize, Vec<i8>)> {
    let (a, b) = (bbox(m1)?, bbox(m2)?);
    let x0 = a.0.max(b.0);
    let y0 = a.1.max(b.1);
    let x1 = a.2.min(b.2);
    let y1 = a.3.min(b.3);
    if x1 < x0 || y1 < y0 {
        return None;
    }
    let mut cells = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let c = CellIndex::new(x, y);
            cells.push(overlap_table(m1.get(c), m2.get(c)));
        }
    }
    Some((x0, y0, x1 - x0 + 1, y1 - y0 + 1, cells))
}

/// Random grid whose known cells all fall inside a random rectangle, so
/// the known bounding boxes of two grids may or may not intersect.
pub fn random_grid(rng: &mut impl Rng, w: usize, h: usize, res: f64) -> OccupancyGrid {
    let (xa, xb) = ordered(rng.random_range(0..w), rng.random_range(0..w));
    let (ya, yb) = ordered(rng.random_range(0..h), rng.random_range(0..h));
    let mut cells = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let inside = (xa..=xb).contains(&x) && (ya..=yb).contains(&y);
            cells.push(if inside {
                [-1i8, 0, 100][rng.random_range(0..3)]
            } else {
                -1
            });
        }
    }
    OccupancyGrid::from_cells(w, h, res, Point2::new(0.0, 0.0), cells).unwrap()
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}
