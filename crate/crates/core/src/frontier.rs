//! Frontier detection on occupancy grids and distance-based filtering of a
//! robot's local frontiers against the frontiers of its overlap maps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::world::{CellIndex, OccupancyGrid, Point2, FREE, UNKNOWN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrontierSource {
    Local(usize),
    Iou,
}

impl fmt::Display for FrontierSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrontierSource::Local(_) => f.write_str("local"),
            FrontierSource::Iou => f.write_str("iou"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontierPoint {
    pub position: Point2,
    pub source: FrontierSource,
    /// Unknown fraction around the point; filled in by the server.
    pub info_gain: f64,
}

impl FrontierPoint {
    pub fn local(robot: usize, x: f64, y: f64) -> Self {
        Self {
            position: Point2::new(x, y),
            source: FrontierSource::Local(robot),
            info_gain: 0.0,
        }
    }

    pub fn iou(x: f64, y: f64) -> Self {
        Self {
            position: Point2::new(x, y),
            source: FrontierSource::Iou,
            info_gain: 0.0,
        }
    }
}

/// Whether `c` is a free cell with at least one unknown 8-neighbour.
/// Cells beyond the grid edge do not count as unknown.
pub fn is_frontier_cell(map: &OccupancyGrid, c: CellIndex) -> bool {
    map.get(c) == FREE && map.neighbors8(c).any(|n| map.get(n) == UNKNOWN)
}

/// One representative point per 8-connected frontier component of at least
/// `min_cluster` cells. The representative is the member cell closest to the
/// component centroid (first in row-major order on ties).
pub fn detect_frontiers(
    map: &OccupancyGrid,
    min_cluster: usize,
    source: FrontierSource,
) -> Vec<FrontierPoint> {
    let min_cluster = min_cluster.max(1);
    let n = map.len();
    let mut is_frontier = vec![false; n];
    for (i, flag) in is_frontier.iter_mut().enumerate() {
        *flag = is_frontier_cell(map, map.cell_at(i));
    }

    let mut seen = vec![false; n];
    let mut points = Vec::new();
    let mut component = Vec::new();
    for start in 0..n {
        if !is_frontier[start] || seen[start] {
            continue;
        }
        component.clear();
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            component.push(i);
            for nb in map.neighbors8(map.cell_at(i)) {
                let j = map.index(nb);
                if is_frontier[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if component.len() < min_cluster {
            continue;
        }
        component.sort_unstable();
        let count = component.len() as f64;
        let (sx, sy) = component.iter().fold((0.0, 0.0), |(sx, sy), &i| {
            let c = map.cell_at(i);
            (sx + c.x as f64, sy + c.y as f64)
        });
        let (cx, cy) = (sx / count, sy / count);
        let best = component
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = sq_dist(map.cell_at(a), cx, cy);
                let db = sq_dist(map.cell_at(b), cx, cy);
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("component is non-empty");
        let p = map.cell_center(map.cell_at(best));
        points.push(FrontierPoint {
            position: p,
            source,
            info_gain: 0.0,
        });
    }
    points
}

fn sq_dist(c: CellIndex, x: f64, y: f64) -> f64 {
    let dx = c.x as f64 - x;
    let dy = c.y as f64 - y;
    dx * dx + dy * dy
}

/// Order in which the greedy filter visits points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterOrder {
    /// Overlap-map points first, so they suppress nearby local points.
    #[default]
    IouFirst,
    /// Local points first, then overlap-map points.
    Literal,
}

impl FromStr for FilterOrder {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iou-first" => Ok(Self::IouFirst),
            "literal" => Ok(Self::Literal),
            _ => Err(format!("unknown filter order {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FilterOptions {
    pub order: FilterOrder,
    /// Keep surviving overlap-map points in the output.
    pub keep_iou: bool,
}

/// Greedy thinning: a point survives iff it lies at least `dist_thresh` from
/// every point kept before it. Points exactly `dist_thresh` apart both survive.
///
/// With `IouFirst` every overlap-map point suppresses nearby local points,
/// even one that a closer overlap-map point would have thinned away.
pub fn filter_frontiers(
    local: &[FrontierPoint],
    iou: &[FrontierPoint],
    dist_thresh: f64,
    options: FilterOptions,
) -> Vec<FrontierPoint> {
    let near = |p: &FrontierPoint, kept: &[FrontierPoint]| kept.iter().any(|k| p.position.dist(&k.position) < dist_thresh);
    let thin = |points: &[FrontierPoint], mut kept: Vec<FrontierPoint>, start: usize| {
        for p in points {
            if !near(p, &kept) {
                kept.push(*p);
            }
        }
        kept.split_off(start)
    };
    match options.order {
        FilterOrder::IouFirst => {
            let kept_local = thin(local, iou.to_vec(), iou.len());
            if options.keep_iou {
                let mut out = thin(iou, Vec::new(), 0);
                out.extend(kept_local);
                out
            } else {
                kept_local
            }
        }
        FilterOrder::Literal => {
            let kept_local = thin(local, Vec::new(), 0);
            let n = kept_local.len();
            let mut all = thin(iou, kept_local, 0);
            if !options.keep_iou {
                all.truncate(n);
            }
            all
        }
    }
}

/// `robot_id,x,y,source` rows for logging.
pub fn csv_rows(robot_id: usize, points: &[FrontierPoint]) -> Vec<String> {
    points
        .iter()
        .map(|p| format!("{robot_id},{:.3},{:.3},{}", p.position.x, p.position.y, p.source))
        .collect()
}
