//! Simulated ground robot: ray-cast sensing, path following, path entropy
//! and saved-goal re-localization.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{plan_path, PlanOptions};
use crate::pose_graph::{pose3_from_2d, PoseGraph};
use crate::raycast::{walk, Lattice};
use crate::world::{CellIndex, OccupancyGrid, Point2, Pose2D, WorldModel, FREE, OCCUPIED, UNKNOWN};

/// Height of the ground robots' sensing plane. Anything at least this tall
/// blocks their rays.
pub const GROUND_SENSOR_PLANE_M: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct SensorParams {
    pub rays: usize,
    pub max_range: f64,
    pub fov: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            rays: 120,
            max_range: 2.5,
            fov: TAU,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbStatus {
    Ok,
    Lost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoalKind {
    Frontier,
    Relocalize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Goal {
    pub point: Point2,
    pub kind: GoalKind,
    pub assigned_tick: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SavedGoal {
    pub point: Point2,
    pub tick: u64,
    /// Pose-graph node recorded when the place was visited.
    pub node: usize,
}

#[derive(Clone, Debug)]
pub struct AgentState {
    pub id: usize,
    pub pose: Pose2D,
    pub local_map: OccupancyGrid,
    pub sg_list: Vec<SavedGoal>,
    pub orb_status: OrbStatus,
    pub d_opti: f64,
    pub reloc: usize,
    pub current_goal: Option<Goal>,
    /// Remaining cells to visit, first entry next.
    pub path: Vec<CellIndex>,
    pub graph: PoseGraph,
}

impl AgentState {
    pub fn new(id: usize, pose: Pose2D, local_map: OccupancyGrid, d_opti: f64) -> Self {
        Self {
            id,
            pose,
            local_map,
            sg_list: Vec::new(),
            orb_status: OrbStatus::Ok,
            d_opti,
            reloc: 0,
            current_goal: None,
            path: Vec::new(),
            graph: PoseGraph::new(pose3_from_2d(&pose)),
        }
    }

    pub fn position(&self) -> Point2 {
        self.pose.position()
    }

    pub fn is_relocalizing(&self) -> bool {
        matches!(self.current_goal, Some(Goal { kind: GoalKind::Relocalize, .. }))
    }

    /// Drops the goal and its path.
    pub fn clear_goal(&mut self) -> Option<Goal> {
        self.path.clear();
        self.current_goal.take()
    }

    /// Sets a goal and plans to it on `map`. Returns `false` (leaving the
    /// agent goal-less) when the goal is unreachable.
    pub fn assign_goal(&mut self, goal: Goal, map: &OccupancyGrid, opts: PlanOptions) -> Result<bool> {
        match plan_path(map, self.position(), goal.point, opts)? {
            Some(path) => {
                self.path = path.cells;
                self.current_goal = Some(goal);
                Ok(true)
            }
            None => {
                self.clear_goal();
                Ok(false)
            }
        }
    }
}

/// Casts `rays` evenly spaced rays across `fov` (centered on the heading) and
/// writes free cells up to the first blocking cell, which becomes occupied.
pub fn sense(world: &WorldModel, pose: &Pose2D, params: &SensorParams, map: &mut OccupancyGrid) -> Result<()> {
    let here = map
        .world_to_grid(pose.x, pose.y)
        .filter(|c| world.is_free(*c))
        .ok_or(Error::BlockedPose { x: pose.x, y: pose.y })?;
    map.set(here, FREE);
    let lattice = Lattice::of(map);
    let n = params.rays.max(1);
    let full_circle = params.fov >= TAU - 1e-9;
    let step = if full_circle {
        params.fov / n as f64
    } else if n > 1 {
        params.fov / (n - 1) as f64
    } else {
        0.0
    };
    let first = if full_circle || n == 1 {
        pose.theta
    } else {
        pose.theta - params.fov / 2.0
    };
    let origin = pose.position();
    for k in 0..n {
        let angle = first + k as f64 * step;
        let end = Point2::new(
            origin.x + params.max_range * angle.cos(),
            origin.y + params.max_range * angle.sin(),
        );
        walk(&lattice, origin, end, |rc| {
            if world.blocks_at(rc.cell, GROUND_SENSOR_PLANE_M) {
                map.set(rc.cell, OCCUPIED);
                false
            } else {
                map.set(rc.cell, FREE);
                true
            }
        });
    }
    Ok(())
}

/// Binary Shannon entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

fn occupancy_probability(v: i8) -> f64 {
    match v {
        FREE => 0.0,
        OCCUPIED => 1.0,
        _ => 0.5,
    }
}

/// Mean binary entropy of the cells crossed by the straight line
/// `from -> to`. Zero when the line never touches the map.
pub fn path_entropy(map: &OccupancyGrid, from: Point2, to: Point2) -> f64 {
    let lattice = Lattice::of(map);
    let (mut sum, mut count) = (0.0, 0usize);
    walk(&lattice, from, to, |rc| {
        sum += binary_entropy(occupancy_probability(map.get(rc.cell)));
        count += 1;
        true
    });
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// How a re-localization target is picked among saved goals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelocSelector {
    /// Largest path entropy.
    #[default]
    LargestEntropy,
    /// Largest `1 - entropy`, i.e. the smallest entropy.
    Literal,
}

/// Which side of `D_MAX` triggers re-localization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelocTrigger {
    Below,
    Above,
}

impl RelocTrigger {
    pub fn breached(self, d_opti: f64, d_max: f64) -> bool {
        match self {
            RelocTrigger::Below => d_opti < d_max,
            RelocTrigger::Above => d_opti > d_max,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelocOptions {
    pub d_max: f64,
    pub selector: RelocSelector,
    pub trigger: RelocTrigger,
    /// Saved goals closer than this to the agent are not revisit targets.
    pub closure_radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RelocDecision {
    NotTriggered,
    /// Triggered but no saved goal qualifies.
    NoCandidate,
    Goal(SavedGoal),
}

impl fmt::Display for RelocDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelocDecision::NotTriggered => f.write_str("not-triggered"),
            RelocDecision::NoCandidate => f.write_str("no-candidate"),
            RelocDecision::Goal(g) => write!(f, "goal({:.3},{:.3})", g.point.x, g.point.y),
        }
    }
}

/// Saved-goal re-localization. When SLAM is lost or the D-optimality is on
/// the wrong side of `D_MAX`, scores every saved goal by path entropy from
/// the current position on the agent's own map and returns the winner. The
/// winner is appended to `sg_list` and `reloc` is incremented.
///
/// The default selector takes the largest entropy. The literal selector
/// takes the largest `1 - entropy`, which favours the opposite goal.
pub fn maybe_relocalize(agent: &mut AgentState, opts: &RelocOptions, tick: u64) -> RelocDecision {
    if agent.is_relocalizing() {
        return RelocDecision::NotTriggered;
    }
    let lost = agent.orb_status == OrbStatus::Lost;
    if !(lost || opts.trigger.breached(agent.d_opti, opts.d_max)) {
        return RelocDecision::NotTriggered;
    }
    let here = agent.position();
    let mut best: Option<(f64, SavedGoal)> = None;
    for item in &agent.sg_list {
        if item.point.dist(&here) <= opts.closure_radius {
            continue;
        }
        let ent = path_entropy(&agent.local_map, here, item.point);
        let score = match opts.selector {
            RelocSelector::LargestEntropy => ent,
            RelocSelector::Literal => 1.0 - ent,
        };
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, *item));
        }
    }
    let Some((_, winner)) = best else {
        return RelocDecision::NoCandidate;
    };
    agent.reloc += 1;
    agent.sg_list.push(SavedGoal { tick, ..winner });
    RelocDecision::Goal(winner)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepOutcome {
    /// Distance travelled this tick (m).
    pub moved: f64,
    pub reached: Option<Goal>,
    pub replanned: bool,
    /// Replanning found no path; the goal was dropped.
    pub unreachable: Option<Goal>,
}

/// Advances along the current path by at most `speed` meters. Replans first
/// when a remaining path cell is now known to be occupied on `map`.
pub fn step(agent: &mut AgentState, speed: f64, map: &OccupancyGrid, opts: PlanOptions) -> Result<StepOutcome> {
    let mut out = StepOutcome::default();
    let Some(goal) = agent.current_goal else {
        return Ok(out);
    };
    if agent.path.iter().any(|c| map.get(*c) == OCCUPIED || (!opts.through_unknown && map.get(*c) == UNKNOWN)) {
        out.replanned = true;
        if !agent.assign_goal(goal, map, opts)? {
            out.unreachable = Some(goal);
            return Ok(out);
        }
    }

    let mut budget = speed;
    let mut pos = agent.position();
    let mut heading = agent.pose.theta;
    while budget > 0.0 {
        let Some(&next) = agent.path.first() else {
            break;
        };
        // last waypoint is the exact goal point
        let target = if agent.path.len() == 1 {
            goal.point
        } else {
            map.cell_center(next)
        };
        let dx = target.x - pos.x;
        let dy = target.y - pos.y;
        let dist = dx.hypot(dy);
        if dist > 0.0 {
            heading = dy.atan2(dx);
        }
        if dist <= budget {
            pos = target;
            budget -= dist;
            out.moved += dist;
            agent.path.remove(0);
        } else {
            pos = Point2::new(pos.x + dx / dist * budget, pos.y + dy / dist * budget);
            out.moved += budget;
            budget = 0.0;
        }
    }
    agent.pose = Pose2D::new(pos.x, pos.y, heading);
    if agent.path.is_empty() {
        out.reached = agent.current_goal.take();
    }
    Ok(out)
}
