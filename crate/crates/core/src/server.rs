//! Central frontier manager: keeps a bounded, de-duplicated global frontier
//! list, scores points per robot and hands out spaced goals.
//!
//! The server is a request/response state machine. Requests are processed
//! one at a time, so replies depend only on server state and request order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::path_entropy;
use crate::error::{Error, Result};
use crate::frontier::FrontierPoint;
use crate::planner::{plan_path, PlanOptions};
use crate::world::{OccupancyGrid, Point2, Pose2D, UNKNOWN};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct ServerParams {
    pub max_pts: usize,
    pub min_pts: usize,
    /// Information-gain disk radius (m).
    pub rad: f64,
    /// Minimum unknown fraction for a point to be admitted.
    pub prc_unk: f64,
    /// Goal spacing (m).
    pub dist_thres: f64,
}

impl Default for ServerParams {
    fn default() -> Self {
        Self {
            max_pts: 5,
            min_pts: 0,
            rad: 1.0,
            prc_unk: 0.6,
            dist_thres: 1.0,
        }
    }
}

impl ServerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.max_pts < self.min_pts {
            return bad(format!("max_pts {} < min_pts {}", self.max_pts, self.min_pts));
        }
        if !(self.rad > 0.0) {
            return bad(format!("rad must be > 0, got {}", self.rad));
        }
        if !(0.0..=1.0).contains(&self.prc_unk) {
            return bad(format!("prc_unk must be in [0, 1], got {}", self.prc_unk));
        }
        if !(self.dist_thres >= 0.0) {
            return bad(format!("dist_thres must be >= 0, got {}", self.dist_thres));
        }
        Ok(())
    }
}

/// How `prc_unk` admits points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainThreshold {
    /// Gain must be at least `prc_unk` times the best candidate gain (and
    /// strictly positive).
    #[default]
    Relative,
    /// Gain must be at least `prc_unk`.
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct RewardParams {
    /// Distance decay length (m).
    pub lambda_d: f64,
    /// Path-entropy weight.
    pub w_h: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self { lambda_d: 5.0, w_h: 0.5 }
    }
}

/// `Managed` thins, truncates and spaces goals away from visited and active
/// ones. `Plain` forwards every informative point and only keeps robots off
/// each other's exact goals. In both modes a robot is never handed back a
/// goal it released.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ServerMode {
    #[default]
    Managed,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ServerConfig {
    pub params: ServerParams,
    pub gain_threshold: GainThreshold,
    /// Only goals reached in the last this-many ticks constrain spacing.
    pub history_window: Option<u64>,
    pub reward: RewardParams,
    pub mode: ServerMode,
    pub plan: PlanOptions,
}

/// Fraction of unknown cells among those whose centers lie within `rad` of
/// `p`. Cells beyond the map edge count as unknown.
pub fn info_gain(map: &OccupancyGrid, p: Point2, rad: f64) -> f64 {
    let res = map.resolution();
    let o = map.origin();
    let x0 = ((p.x - rad - o.x) / res).floor() as isize - 1;
    let x1 = ((p.x + rad - o.x) / res).ceil() as isize + 1;
    let y0 = ((p.y - rad - o.y) / res).floor() as isize - 1;
    let y1 = ((p.y + rad - o.y) / res).ceil() as isize + 1;
    let r2 = rad * rad * (1.0 + 1e-12);
    let (mut total, mut unknown) = (0usize, 0usize);
    for iy in y0..=y1 {
        let cy = o.y + (iy as f64 + 0.5) * res - p.y;
        for ix in x0..=x1 {
            let cx = o.x + (ix as f64 + 0.5) * res - p.x;
            if cx * cx + cy * cy > r2 {
                continue;
            }
            total += 1;
            if map.get_signed(ix, iy).is_none_or(|v| v == UNKNOWN) {
                unknown += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        unknown as f64 / total as f64
    }
}

fn gain_then_coords(a: &FrontierPoint, b: &FrontierPoint) -> std::cmp::Ordering {
    b.info_gain
        .total_cmp(&a.info_gain)
        .then(a.position.x.total_cmp(&b.position.x))
        .then(a.position.y.total_cmp(&b.position.y))
}

/// Builds the global list from all robots' candidates: gains on `map`,
/// admission, then (managed mode) greedy thinning by `dist_thres` in
/// descending gain and truncation to `max_pts`. Sorted by gain descending,
/// ties by `x` then `y` ascending. If fewer than `min_pts` are admitted the
/// best rejected candidates top the list up.
pub fn merge_points(candidates: &[FrontierPoint], map: &OccupancyGrid, cfg: &ServerConfig) -> Vec<FrontierPoint> {
    let p = &cfg.params;
    let mut scored: Vec<FrontierPoint> = candidates
        .iter()
        .map(|c| FrontierPoint {
            info_gain: info_gain(map, c.position, p.rad),
            ..*c
        })
        .collect();
    scored.sort_by(gain_then_coords);
    scored.dedup_by(|a, b| a.position == b.position);

    let best = scored.first().map_or(0.0, |c| c.info_gain);
    let admitted = |g: f64| match (cfg.mode, cfg.gain_threshold) {
        (ServerMode::Plain, _) => g > 0.0,
        (_, GainThreshold::Absolute) => g >= p.prc_unk,
        (_, GainThreshold::Relative) => g > 0.0 && g >= p.prc_unk * best,
    };
    let (mut pool, rejected): (Vec<_>, Vec<_>) = scored.into_iter().partition(|c| admitted(c.info_gain));
    if pool.len() < p.min_pts {
        let short = p.min_pts - pool.len();
        pool.extend(rejected.into_iter().take(short));
    }
    if cfg.mode == ServerMode::Plain {
        return pool;
    }

    let mut kept: Vec<FrontierPoint> = Vec::new();
    for c in pool {
        if kept.iter().all(|k| k.position.dist(&c.position) >= p.dist_thres) {
            kept.push(c);
        }
    }
    kept.truncate(p.max_pts);
    kept
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardEval {
    pub reward: f64,
    pub d_path: f64,
    /// A* found no path; `d_path` is the straight-line distance.
    pub fallback: bool,
}

/// `gain · exp(−d_path/λ_d) · (1 + w_H · path_entropy)`, with the A* length
/// on `merged` and path entropy on the robot's own map.
pub fn compute_reward(
    position: Point2,
    robot_map: &OccupancyGrid,
    p: &FrontierPoint,
    merged: &OccupancyGrid,
    reward: &RewardParams,
    plan: PlanOptions,
) -> RewardEval {
    let (d_path, fallback) = match plan_path(merged, position, p.position, plan) {
        Ok(Some(path)) => (path.length, false),
        _ => (position.dist(&p.position), true),
    };
    let ent = path_entropy(robot_map, position, p.position);
    RewardEval {
        reward: p.info_gain * (-d_path / reward.lambda_d).exp() * (1.0 + reward.w_h * ent),
        d_path,
        fallback,
    }
}

/// Index of the highest-reward point that is at least `dist_thres` from
/// every point in `spaced_from` and not equal to any point in `taken`.
/// Lowest index wins ties.
pub fn select_goal(
    points: &[FrontierPoint],
    rewards: &[f64],
    spaced_from: &[Point2],
    taken: &[Point2],
    dist_thres: f64,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (p, &r)) in points.iter().zip(rewards).enumerate() {
        if taken.contains(&p.position) || spaced_from.iter().any(|g| g.dist(&p.position) < dist_thres) {
            continue;
        }
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((i, r));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assignment {
    pub tick: u64,
    pub robot: usize,
    pub goal: Point2,
    pub reward: f64,
}

impl Assignment {
    pub const CSV_HEADER: &'static str = "tick,robot_id,goal_x,goal_y,reward";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.3},{:.3},{:.6}",
            self.tick, self.robot, self.goal.x, self.goal.y, self.reward
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Request {
    SubmitPoints { robot: usize, points: Vec<Point2> },
    RequestGoal { robot: usize, pose: Pose2D },
    ReportReached { robot: usize, at: Point2 },
    /// Robot could not reach its goal; it will not be offered to it again.
    Release { robot: usize },
    /// Robot was pulled off its goal; the goal returns to the pool.
    Cancel { robot: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Response {
    Ack { robot: usize },
    Goal { robot: usize, goal: Point2, reward: f64 },
    None { robot: usize },
}

fn field<T: FromStr>(parts: &[&str], i: usize, line: &str) -> Result<T> {
    parts
        .get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse {
            line: 1,
            column: i + 1,
            message: format!("bad field {} in {line:?}", i + 1),
        })
}

fn check_len(parts: &[&str], n: usize, line: &str) -> Result<()> {
    if parts.len() == n {
        Ok(())
    } else {
        Err(Error::Parse {
            line: 1,
            column: n.min(parts.len()) + 1,
            message: format!("expected {n} fields in {line:?}"),
        })
    }
}

impl fmt::Display for Request {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Request::SubmitPoints { robot, points } => {
                write!(f, "submit_points {robot} {}", points.len())?;
                for p in points {
                    write!(f, " {} {}", p.x, p.y)?;
                }
                Ok(())
            }
            Request::RequestGoal { robot, pose } => {
                write!(f, "request_goal {robot} {} {} {}", pose.x, pose.y, pose.theta)
            }
            Request::ReportReached { robot, at } => write!(f, "report_reached {robot} {} {}", at.x, at.y),
            Request::Release { robot } => write!(f, "release {robot}"),
            Request::Cancel { robot } => write!(f, "cancel {robot}"),
        }
    }
}

impl FromStr for Request {
    type Err = Error;
    fn from_str(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let robot = || field::<usize>(&parts, 1, line);
        match parts.first().copied() {
            Some("submit_points") => {
                let n: usize = field(&parts, 2, line)?;
                check_len(&parts, 3 + 2 * n, line)?;
                let points = (0..n)
                    .map(|k| Ok(Point2::new(field(&parts, 3 + 2 * k, line)?, field(&parts, 4 + 2 * k, line)?)))
                    .collect::<Result<_>>()?;
                Ok(Request::SubmitPoints { robot: robot()?, points })
            }
            Some("request_goal") => {
                check_len(&parts, 5, line)?;
                Ok(Request::RequestGoal {
                    robot: robot()?,
                    pose: Pose2D::new(field(&parts, 2, line)?, field(&parts, 3, line)?, field(&parts, 4, line)?),
                })
            }
            Some("report_reached") => {
                check_len(&parts, 4, line)?;
                Ok(Request::ReportReached {
                    robot: robot()?,
                    at: Point2::new(field(&parts, 2, line)?, field(&parts, 3, line)?),
                })
            }
            Some("release") => {
                check_len(&parts, 2, line)?;
                Ok(Request::Release { robot: robot()? })
            }
            Some("cancel") => {
                check_len(&parts, 2, line)?;
                Ok(Request::Cancel { robot: robot()? })
            }
            _ => Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("unknown request {line:?}"),
            }),
        }
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Response::Ack { robot } => write!(f, "ack {robot}"),
            Response::Goal { robot, goal, reward } => write!(f, "goal {robot} {} {} {reward}", goal.x, goal.y),
            Response::None { robot } => write!(f, "none {robot}"),
        }
    }
}

impl FromStr for Response {
    type Err = Error;
    fn from_str(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.first().copied() {
            Some("ack") => {
                check_len(&parts, 2, line)?;
                Ok(Response::Ack { robot: field(&parts, 1, line)? })
            }
            Some("goal") => {
                check_len(&parts, 5, line)?;
                Ok(Response::Goal {
                    robot: field(&parts, 1, line)?,
                    goal: Point2::new(field(&parts, 2, line)?, field(&parts, 3, line)?),
                    reward: field(&parts, 4, line)?,
                })
            }
            Some("none") => {
                check_len(&parts, 2, line)?;
                Ok(Response::None { robot: field(&parts, 1, line)? })
            }
            _ => Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("unknown response {line:?}"),
            }),
        }
    }
}

/// Maps the server reads while handling a request.
#[derive(Clone, Copy, Debug)]
pub struct ServerContext<'a> {
    pub tick: u64,
    pub merged: &'a OccupancyGrid,
    /// Each robot's own map, indexed by robot id.
    pub local_maps: &'a [&'a OccupancyGrid],
}

#[derive(Clone, Debug)]
pub struct ServerState {
    cfg: ServerConfig,
    candidates: Vec<Vec<FrontierPoint>>,
    global_points: Vec<FrontierPoint>,
    assigned: Vec<Assignment>,
    active: Vec<Option<Point2>>,
    /// Goals reached so far, with the tick of arrival.
    visited: Vec<(u64, Point2)>,
    /// Goals each robot gave up on.
    released: Vec<Vec<Point2>>,
    reward_matrix: Vec<Vec<f64>>,
}

impl ServerState {
    pub fn new(cfg: ServerConfig, robots: usize) -> Self {
        Self {
            cfg,
            candidates: vec![Vec::new(); robots],
            global_points: Vec::new(),
            assigned: Vec::new(),
            active: vec![None; robots],
            visited: Vec::new(),
            released: vec![Vec::new(); robots],
            reward_matrix: vec![Vec::new(); robots],
        }
    }

    pub fn config(&self) -> &ServerConfig {
        &self.cfg
    }

    pub fn global_points(&self) -> &[FrontierPoint] {
        &self.global_points
    }

    /// Every assignment made, oldest first.
    pub fn assigned(&self) -> &[Assignment] {
        &self.assigned
    }

    pub fn active_goal(&self, robot: usize) -> Option<Point2> {
        self.active.get(robot).copied().flatten()
    }

    /// Rewards from `robot`'s latest goal request, one per global point.
    pub fn rewards(&self, robot: usize) -> &[f64] {
        &self.reward_matrix[robot]
    }

    fn check_robot(&self, robot: usize) -> Result<()> {
        if robot < self.active.len() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown robot {robot}")))
        }
    }

    pub fn handle(&mut self, req: &Request, ctx: &ServerContext<'_>) -> Result<Response> {
        match req {
            Request::SubmitPoints { robot, points } => {
                self.check_robot(*robot)?;
                self.candidates[*robot] = points
                    .iter()
                    .map(|p| FrontierPoint::local(*robot, p.x, p.y))
                    .collect();
                let all: Vec<FrontierPoint> = self.candidates.iter().flatten().copied().collect();
                self.global_points = merge_points(&all, ctx.merged, &self.cfg);
                Ok(Response::Ack { robot: *robot })
            }
            Request::RequestGoal { robot, pose } => {
                self.check_robot(*robot)?;
                Ok(self.choose_goal(*robot, pose.position(), ctx))
            }
            Request::ReportReached { robot, .. } => {
                self.check_robot(*robot)?;
                if let Some(g) = self.active[*robot].take() {
                    self.visited.push((ctx.tick, g));
                }
                Ok(Response::Ack { robot: *robot })
            }
            Request::Release { robot } => {
                self.check_robot(*robot)?;
                if let Some(g) = self.active[*robot].take() {
                    self.released[*robot].push(g);
                }
                Ok(Response::Ack { robot: *robot })
            }
            Request::Cancel { robot } => {
                self.check_robot(*robot)?;
                self.active[*robot] = None;
                Ok(Response::Ack { robot: *robot })
            }
        }
    }

    fn choose_goal(&mut self, robot: usize, position: Point2, ctx: &ServerContext<'_>) -> Response {
        let robot_map = ctx.local_maps.get(robot).copied().unwrap_or(ctx.merged);
        let rewards: Vec<f64> = self
            .global_points
            .iter()
            .map(|p| compute_reward(position, robot_map, p, ctx.merged, &self.cfg.reward, self.cfg.plan).reward)
            .collect();
        let others: Vec<Point2> = self
            .active
            .iter()
            .enumerate()
            .filter(|(r, _)| *r != robot)
            .filter_map(|(_, g)| *g)
            .collect();
        let (spaced_from, mut taken) = match self.cfg.mode {
            ServerMode::Managed => {
                let window = self.cfg.history_window;
                let mut spaced: Vec<Point2> = self
                    .visited
                    .iter()
                    .filter(|(t, _)| window.is_none_or(|w| ctx.tick.saturating_sub(*t) < w))
                    .map(|(_, g)| *g)
                    .collect();
                spaced.extend(&others);
                (spaced, Vec::new())
            }
            ServerMode::Plain => (Vec::new(), others),
        };
        taken.extend(&self.released[robot]);
        let pick = select_goal(
            &self.global_points,
            &rewards,
            &spaced_from,
            &taken,
            self.cfg.params.dist_thres,
        );
        self.reward_matrix[robot] = rewards;
        match pick {
            Some(i) => {
                let goal = self.global_points[i].position;
                let reward = self.reward_matrix[robot][i];
                self.assigned.push(Assignment {
                    tick: ctx.tick,
                    robot,
                    goal,
                    reward,
                });
                self.active[robot] = Some(goal);
                Response::Goal { robot, goal, reward }
            }
            None => Response::None { robot },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{CellIndex, FREE};

    fn grid(w: usize, h: usize, v: i8) -> OccupancyGrid {
        OccupancyGrid::from_cells(w, h, 1.0, Point2::default(), vec![v; w * h]).unwrap()
    }

    fn absolute() -> ServerConfig {
        ServerConfig {
            gain_threshold: GainThreshold::Absolute,
            ..Default::default()
        }
    }

    #[test]
    fn gain_extremes() {
        assert_eq!(info_gain(&grid(9, 9, UNKNOWN), Point2::new(4.5, 4.5), 1.0), 1.0);
        assert_eq!(info_gain(&grid(9, 9, FREE), Point2::new(4.5, 4.5), 1.0), 0.0);
    }

    #[test]
    fn gain_counts_five_cell_disk() {
        let mut m = grid(5, 5, FREE);
        m.set(CellIndex::new(2, 3), UNKNOWN);
        m.set(CellIndex::new(1, 2), UNKNOWN);
        // diagonal unknowns are outside the 1-cell disk
        m.set(CellIndex::new(3, 3), UNKNOWN);
        assert!((info_gain(&m, Point2::new(2.5, 2.5), 1.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn gain_out_of_bounds_is_unknown() {
        let m = grid(3, 3, FREE);
        // corner cell: 3 of 5 disk cells in bounds
        assert!((info_gain(&m, Point2::new(0.5, 0.5), 1.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn merge_no_candidates() {
        assert!(merge_points(&[], &grid(3, 3, UNKNOWN), &absolute()).is_empty());
    }

    #[test]
    fn merge_truncates_by_coordinates() {
        let m = grid(40, 40, UNKNOWN);
        let pts: Vec<FrontierPoint> = [30.5, 10.5, 20.5, 0.5 + 5.0, 25.5, 15.5, 35.5]
            .iter()
            .map(|&x| FrontierPoint::local(0, x, 20.5))
            .collect();
        let out = merge_points(&pts, &m, &absolute());
        let xs: Vec<f64> = out.iter().map(|p| p.position.x).collect();
        assert_eq!(xs, vec![5.5, 10.5, 15.5, 20.5, 25.5]);
        assert!(out.iter().all(|p| p.info_gain == 1.0));
    }

    #[test]
    fn merge_thins_by_gain() {
        // left half unknown; the further-left point sees more unknown
        let mut m = grid(20, 20, FREE);
        for y in 0..20 {
            for x in 0..10 {
                m.set(CellIndex::new(x, y), UNKNOWN);
            }
        }
        let a = FrontierPoint::local(0, 9.5, 10.5);
        let b = FrontierPoint::local(1, 10.0, 10.5);
        let cfg = ServerConfig {
            params: ServerParams {
                prc_unk: 0.0,
                ..Default::default()
            },
            gain_threshold: GainThreshold::Absolute,
            ..Default::default()
        };
        let ga = info_gain(&m, a.position, 1.0);
        let gb = info_gain(&m, b.position, 1.0);
        assert!(ga > gb);
        let out = merge_points(&[b, a], &m, &cfg);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].position, a.position);
    }

    #[test]
    fn merge_admission_modes() {
        let mut m = grid(20, 20, FREE);
        for x in 0..20 {
            for y in 10..20 {
                m.set(CellIndex::new(x, y), UNKNOWN);
            }
        }
        // straight boundary: gain 4/13 at radius 2 cells
        let p = FrontierPoint::local(0, 5.5, 9.5);
        let cfg = |t| ServerConfig {
            params: ServerParams {
                rad: 2.0,
                ..Default::default()
            },
            gain_threshold: t,
            ..Default::default()
        };
        assert!(merge_points(&[p], &m, &cfg(GainThreshold::Absolute)).is_empty());
        let rel = merge_points(&[p], &m, &cfg(GainThreshold::Relative));
        assert_eq!(rel.len(), 1);
        assert!((rel[0].info_gain - 4.0 / 13.0).abs() < 1e-15);
        // nothing unknown around: never admitted
        let q = FrontierPoint::local(0, 5.5, 2.5);
        assert!(merge_points(&[q], &m, &cfg(GainThreshold::Relative)).is_empty());
    }

    #[test]
    fn min_pts_tops_up() {
        let m = grid(20, 20, FREE);
        let cfg = ServerConfig {
            params: ServerParams {
                min_pts: 1,
                ..Default::default()
            },
            gain_threshold: GainThreshold::Absolute,
            ..Default::default()
        };
        let out = merge_points(&[FrontierPoint::local(0, 5.5, 5.5)], &m, &cfg);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn reward_closed_forms() {
        let free = grid(20, 20, FREE);
        let unknown = grid(20, 20, UNKNOWN);
        let here = Point2::new(2.5, 2.5);
        let mut p = FrontierPoint::local(0, 2.5, 2.5);
        p.info_gain = 1.0;
        let r = RewardParams::default();
        let opts = PlanOptions::default();
        assert_eq!(compute_reward(here, &free, &p, &free, &r, opts).reward, 1.0);
        assert_eq!(compute_reward(here, &unknown, &p, &free, &r, opts).reward, 1.5);

        let mut q = FrontierPoint::local(0, 7.5, 2.5);
        q.info_gain = 0.6;
        let e = compute_reward(here, &free, &q, &free, &r, opts);
        assert!(!e.fallback);
        assert!((e.reward - 0.6 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((e.reward - 0.2207).abs() < 1e-4);
    }

    #[test]
    fn reward_falls_back_to_euclid() {
        let mut m = grid(10, 3, FREE);
        for y in 0..3 {
            m.set(CellIndex::new(5, y), crate::world::OCCUPIED);
        }
        let mut p = FrontierPoint::local(0, 8.5, 1.5);
        p.info_gain = 1.0;
        let e = compute_reward(Point2::new(1.5, 1.5), &m, &p, &m, &RewardParams::default(), PlanOptions::default());
        assert!(e.fallback);
        assert_eq!(e.d_path, 7.0);
    }

    fn pts(coords: &[(f64, f64)]) -> Vec<FrontierPoint> {
        coords.iter().map(|&(x, y)| FrontierPoint::local(0, x, y)).collect()
    }

    #[test]
    fn select_respects_history() {
        let points = pts(&[(0.0, 0.0), (5.0, 0.0)]);
        let rewards = [0.9, 0.5];
        assert_eq!(select_goal(&points[..1], &rewards[..1], &[], &[], 1.0), Some(0));
        let hist = [Point2::new(0.3, 0.0)];
        assert_eq!(select_goal(&points, &rewards, &hist, &[], 1.0), Some(1));
        let hist = [Point2::new(0.3, 0.0), Point2::new(5.0, 0.5)];
        assert_eq!(select_goal(&points, &rewards, &hist, &[], 1.0), None);
    }

    #[test]
    fn select_ties_and_scaling() {
        let points = pts(&[(0.0, 0.0), (5.0, 0.0), (9.0, 0.0)]);
        assert_eq!(select_goal(&points, &[0.5, 0.7, 0.7], &[], &[], 1.0), Some(1));
        let scaled: Vec<f64> = [0.5, 0.7, 0.7].iter().map(|r| r * 3.7).collect();
        assert_eq!(select_goal(&points, &scaled, &[], &[], 1.0), Some(1));
        assert_eq!(select_goal(&points, &[0.5, 0.7, 0.6], &[], &[Point2::new(5.0, 0.0)], 1.0), Some(2));
    }

    #[test]
    fn server_round_trip() {
        let merged = grid(30, 30, UNKNOWN);
        let mut known = merged.clone();
        for y in 0..30 {
            for x in 0..15 {
                known.set(CellIndex::new(x, y), FREE);
            }
        }
        let maps = [&known, &known];
        let ctx = ServerContext {
            tick: 3,
            merged: &known,
            local_maps: &maps,
        };
        let mut s = ServerState::new(absolute(), 2);
        let submit = Request::SubmitPoints {
            robot: 0,
            points: vec![Point2::new(20.5, 5.5), Point2::new(20.5, 20.5)],
        };
        assert_eq!(s.handle(&submit, &ctx).unwrap(), Response::Ack { robot: 0 });
        assert_eq!(s.global_points().len(), 2);
        let r0 = s
            .handle(
                &Request::RequestGoal {
                    robot: 0,
                    pose: Pose2D::new(10.5, 5.5, 0.0),
                },
                &ctx,
            )
            .unwrap();
        let Response::Goal { goal: g0, .. } = r0 else {
            panic!("{r0:?}")
        };
        assert_eq!(g0, Point2::new(20.5, 5.5));
        let r1 = s
            .handle(
                &Request::RequestGoal {
                    robot: 1,
                    pose: Pose2D::new(10.5, 5.5, 0.0),
                },
                &ctx,
            )
            .unwrap();
        let Response::Goal { goal: g1, .. } = r1 else {
            panic!("{r1:?}")
        };
        assert_eq!(g1, Point2::new(20.5, 20.5));
        assert_eq!(s.rewards(1).len(), 2);
        let ask = |s: &mut ServerState, robot| {
            s.handle(
                &Request::RequestGoal {
                    robot,
                    pose: Pose2D::new(10.5, 5.5, 0.0),
                },
                &ctx,
            )
            .unwrap()
        };
        // g0 visited, g1 held by robot 1
        s.handle(&Request::ReportReached { robot: 0, at: g0 }, &ctx).unwrap();
        assert_eq!(ask(&mut s, 0), Response::None { robot: 0 });
        // a released goal goes back to the pool, but not to its releaser
        s.handle(&Request::Release { robot: 1 }, &ctx).unwrap();
        assert!(matches!(ask(&mut s, 0), Response::Goal { goal, .. } if goal == g1));
        assert_eq!(ask(&mut s, 1), Response::None { robot: 1 });
        // a cancelled goal can come straight back
        s.handle(&Request::Cancel { robot: 0 }, &ctx).unwrap();
        assert!(matches!(ask(&mut s, 0), Response::Goal { goal, .. } if goal == g1));
        assert_eq!(s.assigned().len(), 4);
        assert_eq!(s.assigned()[0].csv_row().split(',').count(), 5);
    }

    #[test]
    fn protocol_lines_round_trip() {
        let reqs = [
            Request::SubmitPoints {
                robot: 1,
                points: vec![Point2::new(0.1, -2.75), Point2::new(1.0 / 3.0, 7.0)],
            },
            Request::SubmitPoints {
                robot: 0,
                points: vec![],
            },
            Request::RequestGoal {
                robot: 0,
                pose: Pose2D::new(1.25, 2.5, 0.3),
            },
            Request::ReportReached {
                robot: 2,
                at: Point2::new(3.0, 4.0),
            },
            Request::Release { robot: 4 },
            Request::Cancel { robot: 3 },
        ];
        for r in reqs {
            let line = r.to_string();
            assert_eq!(line.parse::<Request>().unwrap(), r, "{line}");
        }
        let resps = [
            Response::Ack { robot: 1 },
            Response::Goal {
                robot: 0,
                goal: Point2::new(0.1, 0.2),
                reward: 0.123456789,
            },
            Response::None { robot: 3 },
        ];
        for r in resps {
            assert_eq!(r.to_string().parse::<Response>().unwrap(), r);
        }
        assert_eq!(
            Request::RequestGoal {
                robot: 0,
                pose: Pose2D::new(1.0, 2.0, 0.0)
            }
            .to_string(),
            "request_goal 0 1 2 0"
        );
        assert!("submit_points 0 2 1 2".parse::<Request>().is_err());
        assert!("fly 0".parse::<Request>().is_err());
        assert!("goal 0 1".parse::<Response>().is_err());
    }
}
