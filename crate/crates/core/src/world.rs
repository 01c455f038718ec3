//! Ground-truth worlds, the occupancy grid type shared by every other module,
//! and map merging.
//!
//! All maps live in one world frame (the first robot's frame), so merging and
//! overlap never need registration. Cell `(ix, iy)` covers the square
//! `[origin + i * res, origin + (i + 1) * res)` on each axis; `iy` grows
//! upward in world coordinates.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNKNOWN: i8 = -1;
pub const FREE: i8 = 0;
pub const OCCUPIED: i8 = 100;

/// Obstacle height written for `#` in world files.
pub const TALL_OBSTACLE_M: f64 = 2.0;
/// Obstacle height written for `x` in world files.
pub const LOW_OBSTACLE_M: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex {
    pub x: usize,
    pub y: usize,
}

impl CellIndex {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Planar robot pose. `theta` is kept in `(-pi, pi]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
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
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// 2D occupancy lattice with values in `{-1, 0, 100}`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Point2,
    cells: Vec<i8>,
}

impl OccupancyGrid {
    /// An all-unknown grid.
    pub fn new(width: usize, height: usize, resolution: f64, origin: Point2) -> Result<Self> {
        Self::from_cells(width, height, resolution, origin, vec![UNKNOWN; width * height])
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Point2,
        cells: Vec<i8>,
    ) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidGrid(format!("resolution must be > 0, got {resolution}")));
        }
        if cells.len() != width * height {
            return Err(Error::InvalidGrid(format!(
                "{} cells for a {width}x{height} grid",
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().find(|v| !matches!(**v, UNKNOWN | FREE | OCCUPIED)) {
            return Err(Error::InvalidGrid(format!("cell value {bad} not in {{-1, 0, 100}}")));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn cells(&self) -> &[i8] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn index(&self, c: CellIndex) -> usize {
        c.y * self.width + c.x
    }

    #[inline]
    pub fn cell_at(&self, i: usize) -> CellIndex {
        CellIndex::new(i % self.width, i / self.width)
    }

    #[inline]
    pub fn get(&self, c: CellIndex) -> i8 {
        self.cells[self.index(c)]
    }

    /// Value at a signed index; `None` outside the grid.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> Option<i8> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            None
        } else {
            Some(self.cells[y as usize * self.width + x as usize])
        }
    }

    /// Panics on a value outside the occupancy alphabet.
    #[inline]
    pub fn set(&mut self, c: CellIndex, value: i8) {
        assert!(matches!(value, UNKNOWN | FREE | OCCUPIED), "bad occupancy value {value}");
        let i = self.index(c);
        self.cells[i] = value;
    }

    pub fn known_count(&self) -> usize {
        self.cells.iter().filter(|v| **v != UNKNOWN).count()
    }

    pub fn same_lattice(&self, other: &OccupancyGrid) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.resolution == other.resolution
            && self.origin == other.origin
    }

    /// Center of cell `(ix, iy)` in world coordinates.
    pub fn grid_to_world(&self, ix: usize, iy: usize) -> Result<Point2> {
        if ix >= self.width || iy >= self.height {
            return Err(Error::OutOfBounds {
                ix,
                iy,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.cell_center(CellIndex::new(ix, iy)))
    }

    #[inline]
    pub fn cell_center(&self, c: CellIndex) -> Point2 {
        Point2::new(
            self.origin.x + (c.x as f64 + 0.5) * self.resolution,
            self.origin.y + (c.y as f64 + 0.5) * self.resolution,
        )
    }

    /// Floor-rule lookup; `None` when the point is outside the grid.
    pub fn world_to_grid(&self, wx: f64, wy: f64) -> Option<CellIndex> {
        let fx = ((wx - self.origin.x) / self.resolution).floor();
        let fy = ((wy - self.origin.y) / self.resolution).floor();
        if !(fx >= 0.0 && fy >= 0.0) || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some(CellIndex::new(fx as usize, fy as usize))
    }

    pub fn world_to_grid_pt(&self, p: Point2) -> Option<CellIndex> {
        self.world_to_grid(p.x, p.y)
    }

    /// In-bounds 8-neighbours of `c`.
    pub fn neighbors8(&self, c: CellIndex) -> impl Iterator<Item = CellIndex> + '_ {
        const OFFS: [(isize, isize); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        OFFS.iter().filter_map(move |(dx, dy)| {
            let x = c.x as isize + dx;
            let y = c.y as isize + dy;
            (x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height)
                .then(|| CellIndex::new(x as usize, y as usize))
        })
    }

    /// Inclusive cell bounding box `(min, max)` of the known cells.
    pub fn known_bbox(&self) -> Option<(CellIndex, CellIndex)> {
        let mut bbox: Option<(CellIndex, CellIndex)> = None;
        for (i, v) in self.cells.iter().enumerate() {
            if *v == UNKNOWN {
                continue;
            }
            let c = self.cell_at(i);
            bbox = Some(match bbox {
                None => (c, c),
                Some((lo, hi)) => (
                    CellIndex::new(lo.x.min(c.x), lo.y.min(c.y)),
                    CellIndex::new(hi.x.max(c.x), hi.y.max(c.y)),
                ),
            });
        }
        bbox
    }

    /// Grayscale rendering used for export and map-quality metrics.
    pub fn intensities(&self) -> Vec<u8> {
        self.cells.iter().map(|v| intensity(*v)).collect()
    }
}

/// free = 255, occupied = 0, unknown = 127.
pub fn intensity(value: i8) -> u8 {
    match value {
        FREE => 255,
        OCCUPIED => 0,
        _ => 127,
    }
}

/// Binary PGM (P5). The top image row is the highest `iy`, so the picture
/// reads like a map with world +y up.
pub fn to_pgm(grid: &OccupancyGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    for iy in (0..grid.height()).rev() {
        for ix in 0..grid.width() {
            out.push(intensity(grid.get(CellIndex::new(ix, iy))));
        }
    }
    out
}

/// Sidecar text header for a PGM export.
pub fn pgm_header(grid: &OccupancyGrid) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "width {}", grid.width());
    let _ = writeln!(s, "height {}", grid.height());
    let _ = writeln!(s, "resolution {}", grid.resolution());
    let _ = writeln!(s, "origin_x {}", grid.origin().x);
    let _ = writeln!(s, "origin_y {}", grid.origin().y);
    let _ = writeln!(s, "encoding free=255 occupied=0 unknown=127");
    s
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Terrain {
    Free,
    Obstacle { height: f64 },
}

/// Ground-truth world. Origin is always the world-frame origin.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldModel {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<Terrain>,
}

impl WorldModel {
    pub fn new(width: usize, height: usize, resolution: f64, cells: Vec<Terrain>) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidGrid(format!("resolution must be > 0, got {resolution}")));
        }
        if cells.len() != width * height {
            return Err(Error::InvalidGrid(format!(
                "{} cells for a {width}x{height} world",
                cells.len()
            )));
        }
        if cells
            .iter()
            .any(|t| matches!(t, Terrain::Obstacle { height } if !(*height > 0.0)))
        {
            return Err(Error::InvalidGrid("obstacle heights must be > 0".into()));
        }
        if !cells.contains(&Terrain::Free) {
            return Err(Error::InvalidGrid("world has no free cell".into()));
        }
        Ok(Self {
            width,
            height,
            resolution,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn terrain(&self, c: CellIndex) -> Terrain {
        self.cells[c.y * self.width + c.x]
    }

    pub fn set_terrain(&mut self, c: CellIndex, t: Terrain) {
        self.cells[c.y * self.width + c.x] = t;
    }

    pub fn is_free(&self, c: CellIndex) -> bool {
        self.terrain(c) == Terrain::Free
    }

    /// Whether a sensor sweeping at `plane` meters hits this cell.
    pub fn blocks_at(&self, c: CellIndex, plane: f64) -> bool {
        matches!(self.terrain(c), Terrain::Obstacle { height } if height >= plane)
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|t| **t == Terrain::Free).count()
    }

    /// An all-unknown grid on this world's lattice.
    pub fn blank_grid(&self) -> OccupancyGrid {
        OccupancyGrid::new(self.width, self.height, self.resolution, Point2::default())
            .expect("world dimensions are valid")
    }

    /// Fully known rendering: every obstacle is occupied, everything else free.
    pub fn truth_grid(&self) -> OccupancyGrid {
        let cells = self
            .cells
            .iter()
            .map(|t| match t {
                Terrain::Free => FREE,
                Terrain::Obstacle { .. } => OCCUPIED,
            })
            .collect();
        OccupancyGrid::from_cells(self.width, self.height, self.resolution, Point2::default(), cells)
            .expect("world dimensions are valid")
    }

    /// Cells of the largest 4-connected free component plus the obstacles
    /// 4-adjacent to it, i.e. everything a ground robot can eventually sense.
    pub fn reachable_region(&self) -> Vec<bool> {
        let n = self.cells.len();
        let mut label = vec![usize::MAX; n];
        let mut best: (usize, usize) = (0, usize::MAX);
        let mut next = 0;
        for start in 0..n {
            if label[start] != usize::MAX || self.cells[start] != Terrain::Free {
                continue;
            }
            let mut stack = vec![start];
            label[start] = next;
            let mut size = 0;
            while let Some(i) = stack.pop() {
                size += 1;
                for j in self.neighbors4(i) {
                    if label[j] == usize::MAX && self.cells[j] == Terrain::Free {
                        label[j] = next;
                        stack.push(j);
                    }
                }
            }
            if size > best.0 {
                best = (size, next);
            }
            next += 1;
        }
        let mut region: Vec<bool> = label.iter().map(|l| *l == best.1).collect();
        for i in 0..n {
            if matches!(self.cells[i], Terrain::Obstacle { .. })
                && self.neighbors4(i).any(|j| label[j] == best.1)
            {
                region[i] = true;
            }
        }
        region
    }

    fn neighbors4(&self, i: usize) -> impl Iterator<Item = usize> {
        let (w, h) = (self.width, self.height);
        let (x, y) = (i % w, i / w);
        [
            (x > 0).then(|| i - 1),
            (x + 1 < w).then(|| i + 1),
            (y > 0).then(|| i - w),
            (y + 1 < h).then(|| i + w),
        ]
        .into_iter()
        .flatten()
    }
}

/// Parses a world file: a `resolution <float>` header followed by
/// equal-length rows of `.` (free), `#` (2.0 m obstacle) and `x` (0.4 m
/// obstacle). The first row is the top of the map.
pub fn load_world(text: &str) -> Result<WorldModel> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        column: 1,
        message: "empty world file".into(),
    })?;
    let resolution = parse_header(header)?;

    let mut rows: Vec<Vec<Terrain>> = Vec::new();
    let mut width = None;
    for (i, raw) in lines {
        let line_no = i + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        let mut parsed = Vec::with_capacity(row.len());
        for (col, ch) in row.chars().enumerate() {
            parsed.push(match ch {
                '.' => Terrain::Free,
                '#' => Terrain::Obstacle {
                    height: TALL_OBSTACLE_M,
                },
                'x' => Terrain::Obstacle {
                    height: LOW_OBSTACLE_M,
                },
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        column: col + 1,
                        message: format!("unknown character {other:?}"),
                    })
                }
            });
        }
        match width {
            None => width = Some(parsed.len()),
            Some(w) if w != parsed.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    column: parsed.len().min(w) + 1,
                    message: format!("row has {} cells, expected {w}", parsed.len()),
                })
            }
            _ => {}
        }
        rows.push(parsed);
    }
    let width = width.ok_or_else(|| Error::Parse {
        line: 2,
        column: 1,
        message: "world has no rows".into(),
    })?;
    let height = rows.len();
    // text rows run top-down, grid rows bottom-up
    let cells = rows.into_iter().rev().flatten().collect();
    WorldModel::new(width, height, resolution, cells).map_err(|e| Error::Parse {
        line: 1,
        column: 1,
        message: e.to_string(),
    })
}

fn parse_header(header: &str) -> Result<f64> {
    let bad = |message: String| Error::Parse {
        line: 1,
        column: 1,
        message,
    };
    let mut parts = header.split_whitespace();
    if parts.next() != Some("resolution") {
        return Err(bad(format!("expected `resolution <float>`, got {header:?}")));
    }
    let value = parts
        .next()
        .ok_or_else(|| bad("missing resolution value".into()))?;
    let res: f64 = value
        .parse()
        .map_err(|_| bad(format!("invalid resolution {value:?}")))?;
    if parts.next().is_some() || !(res > 0.0 && res.is_finite()) {
        return Err(bad(format!("invalid resolution header {header:?}")));
    }
    Ok(res)
}

/// Occupied dominates free dominates unknown.
#[inline]
pub fn merge_value(a: i8, b: i8) -> i8 {
    if a == OCCUPIED || b == OCCUPIED {
        OCCUPIED
    } else if a == FREE || b == FREE {
        FREE
    } else {
        UNKNOWN
    }
}

/// Merges maps into one grid spanning the bounding box of all inputs, on the
/// lattice of `maps[frame]`.
pub fn merge_maps(maps: &[&OccupancyGrid], frame: usize) -> Result<OccupancyGrid> {
    let reference = maps
        .get(frame)
        .ok_or_else(|| Error::DimensionMismatch(format!("frame {frame} out of {} maps", maps.len())))?;
    let res = reference.resolution();
    for m in maps {
        if m.resolution() != res {
            return Err(Error::ResolutionMismatch(res, m.resolution()));
        }
    }
    if maps.iter().all(|m| m.same_lattice(reference)) {
        let mut cells = reference.cells().to_vec();
        for m in maps {
            for (c, v) in cells.iter_mut().zip(m.cells()) {
                *c = merge_value(*c, *v);
            }
        }
        return OccupancyGrid::from_cells(reference.width(), reference.height(), res, reference.origin(), cells);
    }

    // lattice offsets of every map relative to the reference
    let offsets: Vec<(i64, i64)> = maps
        .iter()
        .map(|m| {
            (
                ((m.origin().x - reference.origin().x) / res).round() as i64,
                ((m.origin().y - reference.origin().y) / res).round() as i64,
            )
        })
        .collect();
    let min_x = offsets.iter().map(|o| o.0).min().unwrap_or(0);
    let min_y = offsets.iter().map(|o| o.1).min().unwrap_or(0);
    let max_x = maps
        .iter()
        .zip(&offsets)
        .map(|(m, o)| o.0 + m.width() as i64)
        .max()
        .unwrap_or(0);
    let max_y = maps
        .iter()
        .zip(&offsets)
        .map(|(m, o)| o.1 + m.height() as i64)
        .max()
        .unwrap_or(0);
    let (w, h) = ((max_x - min_x) as usize, (max_y - min_y) as usize);
    let origin = Point2::new(
        reference.origin().x + min_x as f64 * res,
        reference.origin().y + min_y as f64 * res,
    );
    let mut out = vec![UNKNOWN; w * h];
    for (m, (ox, oy)) in maps.iter().zip(&offsets) {
        let dx = (ox - min_x) as usize;
        let dy = (oy - min_y) as usize;
        for iy in 0..m.height() {
            for ix in 0..m.width() {
                let o = (iy + dy) * w + ix + dx;
                out[o] = merge_value(out[o], m.get(CellIndex::new(ix, iy)));
            }
        }
    }
    OccupancyGrid::from_cells(w, h, res, origin, out)
}

/// Lawn-mower sweep by an aerial robot. Legs run along +x at
/// `y = (k + 0.5) * swath`; each leg reveals cells whose centers lie within
/// `swath / 2` of it. Only obstacles at least `min_height` tall are visible.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UavSweep {
    pub min_height: f64,
    pub swath: f64,
    /// Stop after this many legs; `None` flies until the world is covered.
    pub legs: Option<usize>,
}

impl UavSweep {
    pub fn prior_map(&self, world: &WorldModel) -> OccupancyGrid {
        let mut grid = world.blank_grid();
        let height_m = world.height() as f64 * world.resolution();
        let half = self.swath / 2.0;
        let mut k = 0usize;
        loop {
            let leg_y = (k as f64 + 0.5) * self.swath;
            if leg_y - half >= height_m || self.legs.is_some_and(|n| k >= n) {
                break;
            }
            for iy in 0..world.height() {
                let cy = (iy as f64 + 0.5) * world.resolution();
                if (cy - leg_y).abs() > half {
                    continue;
                }
                for ix in 0..world.width() {
                    let c = CellIndex::new(ix, iy);
                    let v = if world.blocks_at(c, self.min_height) {
                        OCCUPIED
                    } else {
                        FREE
                    };
                    grid.set(c, v);
                }
            }
            k += 1;
        }
        grid
    }
}

/// Full-coverage aerial prior map.
pub fn uav_prior_map(world: &WorldModel, min_height: f64, swath: f64) -> OccupancyGrid {
    UavSweep {
        min_height,
        swath,
        legs: None,
    }
    .prior_map(world)
}
