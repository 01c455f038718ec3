//! Deterministic tick loop: sensing, map merging, overlap maps, frontier
//! filtering, goal assignment, re-localization, motion and uncertainty.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{
    maybe_relocalize, sense, step, AgentState, Goal, GoalKind, OrbStatus, RelocDecision, RelocOptions, SavedGoal,
};
use crate::config::{Policy, ScenarioConfig};
use crate::error::{Error, Result};
use crate::frontier::{detect_frontiers, filter_frontiers, FrontierPoint, FrontierSource};
use crate::metrics::Coverage;
use crate::overlap::{compute_iou, IoUMap};
use crate::planner::{plan_path, PlanOptions};
use crate::pose_graph::pose3_from_2d;
use crate::server::{
    info_gain, Assignment, Request, Response, ServerConfig, ServerContext, ServerMode, ServerState,
};
use crate::world::{merge_maps, OccupancyGrid, Point2, Pose2D, Terrain, UavSweep, WorldModel, LOW_OBSTACLE_M};

/// Clutter keeps this far from nominal spawns (m).
const CLUTTER_CLEARANCE_M: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    GoalAssigned,
    GoalReached,
    GoalAbandoned,
    Unreachable,
    Replanned,
    Relocalized,
    RelocNoCandidate,
    Lost,
    Closure,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::GoalAssigned => "goal_assigned",
            EventKind::GoalReached => "goal_reached",
            EventKind::GoalAbandoned => "goal_abandoned",
            EventKind::Unreachable => "unreachable",
            EventKind::Replanned => "replanned",
            EventKind::Relocalized => "relocalized",
            EventKind::RelocNoCandidate => "reloc_no_candidate",
            EventKind::Lost => "lost",
            EventKind::Closure => "closure",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub tick: u64,
    pub robot: usize,
    pub kind: EventKind,
    pub at: Point2,
}

impl Event {
    pub const CSV_HEADER: &'static str = "tick,robot_id,event,x,y";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{:.3},{:.3}", self.tick, self.robot, self.kind, self.at.x, self.at.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DOptEvent {
    None,
    Closure,
    Lost,
}

impl fmt::Display for DOptEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DOptEvent::None => "none",
            DOptEvent::Closure => "closure",
            DOptEvent::Lost => "lost",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DOptRow {
    pub tick: u64,
    pub robot: usize,
    pub d_opti: f64,
    pub event: DOptEvent,
}

/// One sampled tick.
#[derive(Clone, Debug, PartialEq)]
pub struct TickRow {
    pub tick: u64,
    pub robot_coverage: Vec<f64>,
    pub merged_coverage: f64,
    /// Per robot pair, in `pairs` order.
    pub iou_area: Vec<f64>,
    /// Local frontiers detected, summed over robots.
    pub raw: usize,
    /// Points forwarded to goal selection after filtering, summed over robots.
    pub filtered: usize,
    /// Size of the server's global list.
    pub global: usize,
    pub d_opti: Vec<f64>,
    pub reloc: Vec<usize>,
    pub lost: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierRow {
    pub tick: u64,
    pub robot: usize,
    pub point: FrontierPoint,
}

#[derive(Clone, Debug, Default)]
pub struct MetricsLog {
    pub robots: usize,
    pub pairs: Vec<(usize, usize)>,
    pub rows: Vec<TickRow>,
    pub dopti: Vec<DOptRow>,
    pub events: Vec<Event>,
    pub assignments: Vec<Assignment>,
    pub frontiers: Vec<FrontierRow>,
}

#[derive(Clone, Debug, Default)]
struct AgentAux {
    warned_no_candidate: bool,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    world: WorldModel,
    coverage: Coverage,
    prior: Option<OccupancyGrid>,
    agents: Vec<AgentState>,
    aux: Vec<AgentAux>,
    server: ServerState,
    merged: OccupancyGrid,
    pairs: Vec<(usize, usize)>,
    ious: Vec<IoUMap>,
    tick: u64,
    log: MetricsLog,
}

/// Everything a finished run produced.
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub world: WorldModel,
    pub log: MetricsLog,
    pub merged: OccupancyGrid,
    pub local_maps: Vec<OccupancyGrid>,
    pub ious: Vec<IoUMap>,
    pub agents: Vec<AgentState>,
}

impl RunOutput {
    pub fn truth(&self) -> OccupancyGrid {
        self.world.truth_grid()
    }
}

fn plan_options(cfg: &ScenarioConfig) -> PlanOptions {
    PlanOptions {
        through_unknown: cfg.plan_through_unknown,
    }
}

/// Applies seeded clutter and spawn jitter to the configured world.
pub fn prepare_world(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<(WorldModel, Vec<Pose2D>)> {
    let mut world = cfg.load_world()?;
    let res = world.resolution();
    let nominal: Vec<Point2> = cfg.spawns.iter().map(|s| Point2::new(s[0], s[1])).collect();
    let probe = world.blank_grid();

    let region = world.reachable_region();
    let mut placed = 0;
    let mut attempts = 0;
    while placed < cfg.clutter && attempts < 100 * (cfg.clutter + 1) {
        attempts += 1;
        let ix = rng.random_range(0..world.width());
        let iy = rng.random_range(0..world.height());
        let c = crate::world::CellIndex::new(ix, iy);
        let center = probe.cell_center(c);
        if !world.is_free(c)
            || !region[iy * world.width() + ix]
            || nominal.iter().any(|s| s.dist(&center) < CLUTTER_CLEARANCE_M)
        {
            continue;
        }
        world.set_terrain(c, Terrain::Obstacle { height: LOW_OBSTACLE_M });
        placed += 1;
    }

    let region = world.reachable_region();
    let mut poses: Vec<Pose2D> = Vec::with_capacity(nominal.len());
    for (k, s) in nominal.iter().enumerate() {
        let mut chosen = None;
        for _ in 0..200 {
            let (dx, dy) = if cfg.spawn_jitter > 0.0 {
                (
                    rng.random_range(-cfg.spawn_jitter..=cfg.spawn_jitter),
                    rng.random_range(-cfg.spawn_jitter..=cfg.spawn_jitter),
                )
            } else {
                (0.0, 0.0)
            };
            let p = Point2::new(s.x + dx, s.y + dy);
            let ok = probe.world_to_grid_pt(p).is_some_and(|c| {
                region[probe.index(c)]
                    && world.is_free(c)
                    && poses.iter().all(|q| probe.world_to_grid_pt(q.position()) != Some(c))
            });
            if ok {
                chosen = Some(p);
                break;
            }
            if cfg.spawn_jitter == 0.0 {
                break;
            }
        }
        let p = chosen.ok_or_else(|| {
            Error::Config(format!(
                "spawn {k} at ({}, {}) is not on a free reachable cell (resolution {res})",
                s.x, s.y
            ))
        })?;
        let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        poses.push(Pose2D::new(p.x, p.y, theta));
    }
    Ok((world, poses))
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (world, poses) = prepare_world(&cfg, &mut rng)?;
        let coverage = Coverage::new(&world);
        let prior = cfg.uav.enabled.then(|| {
            UavSweep {
                min_height: cfg.uav.min_height,
                swath: cfg.uav.swath,
                legs: cfg.uav.legs,
            }
            .prior_map(&world)
        });
        let d0 = crate::pose_graph::PoseGraph::new(pose3_from_2d(&poses[0]))
            .reported_d_opti(&cfg.uncertainty, cfg.dopt_form);
        let agents: Vec<AgentState> = poses
            .iter()
            .enumerate()
            .map(|(i, p)| AgentState::new(i, *p, world.blank_grid(), d0))
            .collect();
        let n = agents.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let server = ServerState::new(
            ServerConfig {
                params: cfg.server,
                gain_threshold: cfg.gain_threshold,
                history_window: cfg.history_window,
                reward: match cfg.policy {
                    Policy::Mexp => crate::server::RewardParams {
                        w_h: 0.0,
                        ..cfg.reward
                    },
                    _ => cfg.reward,
                },
                mode: match cfg.policy {
                    Policy::Ours => ServerMode::Managed,
                    _ => ServerMode::Plain,
                },
                plan: plan_options(&cfg),
            },
            n,
        );
        let merged = world.blank_grid();
        Ok(Self {
            log: MetricsLog {
                robots: n,
                pairs: pairs.clone(),
                ..Default::default()
            },
            cfg,
            world,
            coverage,
            prior,
            aux: vec![AgentAux::default(); n],
            agents,
            server,
            merged,
            pairs,
            ious: Vec::new(),
            tick: 0,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn world(&self) -> &WorldModel {
        &self.world
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn merged(&self) -> &OccupancyGrid {
        &self.merged
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn log(&self) -> &MetricsLog {
        &self.log
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    fn event(&mut self, robot: usize, kind: EventKind, at: Point2) {
        self.log.events.push(Event {
            tick: self.tick,
            robot,
            kind,
            at,
        });
    }

    fn ask_server(&mut self, req: Request) -> Result<Response> {
        let locals: Vec<&OccupancyGrid> = self.agents.iter().map(|a| &a.local_map).collect();
        let ctx = ServerContext {
            tick: self.tick,
            merged: &self.merged,
            local_maps: &locals,
        };
        self.server.handle(&req, &ctx)
    }

    fn uses_server(&self) -> bool {
        self.cfg.policy != Policy::Dcm
    }

    /// Drops robot `i`'s goal, telling the server when it owned it.
    fn drop_goal(&mut self, i: usize) -> Result<()> {
        if let Some(g) = self.agents[i].clear_goal() {
            if g.kind == GoalKind::Frontier && self.uses_server() {
                self.ask_server(Request::Cancel { robot: i })?;
            }
        }
        Ok(())
    }

    /// Advances one tick.
    pub fn tick(&mut self) -> Result<()> {
        self.tick += 1;
        let n = self.agents.len();
        let plan = plan_options(&self.cfg);

        // (1) sensing; a robot that lost tracking has no pose to insert scans at
        for a in &mut self.agents {
            if self.cfg.lost_stops_mapping && a.orb_status == OrbStatus::Lost {
                continue;
            }
            sense(&self.world, &a.pose, &self.cfg.sensor, &mut a.local_map)?;
        }

        // (2) merged map, robot 0's frame
        {
            let mut maps: Vec<&OccupancyGrid> = self.agents.iter().map(|a| &a.local_map).collect();
            if let Some(p) = &self.prior {
                maps.push(p);
            }
            self.merged = merge_maps(&maps, 0)?;
        }

        // (3) pairwise overlap maps
        self.ious = self
            .pairs
            .iter()
            .map(|&(i, j)| compute_iou(&self.agents[i].local_map, &self.agents[j].local_map))
            .collect::<Result<_>>()?;

        // (4) frontiers
        let mut raw_total = 0;
        let mut filtered: Vec<Vec<FrontierPoint>> = Vec::with_capacity(n);
        let iou_points: Vec<Vec<FrontierPoint>> = if self.cfg.policy == Policy::Ours {
            self.ious
                .iter()
                .map(|m| detect_frontiers(m.map(), self.cfg.min_cluster, FrontierSource::Iou))
                .collect()
        } else {
            Vec::new()
        };
        for i in 0..n {
            let raw = detect_frontiers(&self.agents[i].local_map, self.cfg.min_cluster, FrontierSource::Local(i));
            raw_total += raw.len();
            let kept = if self.cfg.policy == Policy::Ours {
                let suppressors: Vec<FrontierPoint> = self
                    .pairs
                    .iter()
                    .zip(&iou_points)
                    .filter(|((a, b), _)| *a == i || *b == i)
                    .flat_map(|(_, pts)| pts.iter().copied())
                    .collect();
                filter_frontiers(&raw, &suppressors, self.cfg.filter.dist_thresh, self.cfg.filter.options())
            } else {
                raw
            };
            filtered.push(kept);
        }
        let filtered_total: usize = filtered.iter().map(Vec::len).sum();
        for (i, pts) in filtered.iter().enumerate() {
            for p in pts {
                self.log.frontiers.push(FrontierRow {
                    tick: self.tick,
                    robot: i,
                    point: *p,
                });
            }
        }
        if self.uses_server() {
            for (i, pts) in filtered.iter().enumerate() {
                let points = pts.iter().map(|p| p.position).collect();
                self.ask_server(Request::SubmitPoints { robot: i, points })?;
            }
        }

        // goals whose surroundings someone else already mapped
        if self.cfg.abandon_explored {
            for i in 0..n {
                let Some(goal) = self.agents[i].current_goal else {
                    continue;
                };
                let far = self.agents[i].position().dist(&goal.point) > self.cfg.sensor.max_range;
                if goal.kind == GoalKind::Frontier
                    && far
                    && info_gain(&self.merged, goal.point, self.cfg.server.rad) == 0.0
                {
                    self.drop_goal(i)?;
                    self.event(i, EventKind::GoalAbandoned, goal.point);
                }
            }
        }

        // (5) goal requests, ascending id
        for i in 0..n {
            if self.agents[i].current_goal.is_some() {
                continue;
            }
            let choice = if self.uses_server() {
                let pose = self.agents[i].pose;
                match self.ask_server(Request::RequestGoal { robot: i, pose })? {
                    Response::Goal { goal, reward, .. } => Some((goal, reward)),
                    _ => None,
                }
            } else {
                self.dcm_choice(i, &filtered[i])
            };
            let Some((point, reward)) = choice else {
                continue;
            };
            if !self.uses_server() {
                self.log.assignments.push(Assignment {
                    tick: self.tick,
                    robot: i,
                    goal: point,
                    reward,
                });
            }
            let goal = Goal {
                point,
                kind: GoalKind::Frontier,
                assigned_tick: self.tick,
            };
            if self.agents[i].assign_goal(goal, &self.merged, plan)? {
                self.event(i, EventKind::GoalAssigned, point);
            } else {
                if self.uses_server() {
                    self.ask_server(Request::Release { robot: i })?;
                }
                self.event(i, EventKind::Unreachable, point);
            }
        }
        if self.uses_server() {
            let logged = self.log.assignments.len();
            self.log.assignments.extend_from_slice(&self.server.assigned()[logged..]);
        }

        // (6) re-localization
        if self.cfg.policy == Policy::Ours && self.cfg.reloc.enabled {
            let opts = RelocOptions {
                d_max: self.cfg.d_max,
                selector: self.cfg.reloc.selector,
                trigger: self.cfg.reloc_trigger(),
                closure_radius: self.cfg.reloc.closure_radius,
            };
            for i in 0..n {
                match maybe_relocalize(&mut self.agents[i], &opts, self.tick) {
                    RelocDecision::Goal(target) => {
                        self.aux[i].warned_no_candidate = false;
                        self.drop_goal(i)?;
                        let goal = Goal {
                            point: target.point,
                            kind: GoalKind::Relocalize,
                            assigned_tick: self.tick,
                        };
                        self.event(i, EventKind::Relocalized, target.point);
                        if !self.agents[i].assign_goal(goal, &self.merged, plan)? {
                            self.event(i, EventKind::Unreachable, target.point);
                        }
                    }
                    RelocDecision::NoCandidate => {
                        if !self.aux[i].warned_no_candidate {
                            self.aux[i].warned_no_candidate = true;
                            let at = self.agents[i].position();
                            self.event(i, EventKind::RelocNoCandidate, at);
                        }
                    }
                    RelocDecision::NotTriggered => {}
                }
            }
        }

        // (7) motion
        let mut previous = Vec::with_capacity(n);
        let mut arrivals: Vec<Option<Goal>> = vec![None; n];
        for i in 0..n {
            previous.push(self.agents[i].pose);
            let out = step(&mut self.agents[i], self.cfg.speed, &self.merged, plan)?;
            if out.replanned {
                let at = self.agents[i].position();
                self.event(i, EventKind::Replanned, at);
            }
            if let Some(g) = out.unreachable {
                if g.kind == GoalKind::Frontier && self.uses_server() {
                    self.ask_server(Request::Release { robot: i })?;
                }
                self.event(i, EventKind::Unreachable, g.point);
            }
            if let Some(g) = out.reached {
                self.event(i, EventKind::GoalReached, g.point);
                if g.kind == GoalKind::Frontier && self.uses_server() {
                    self.ask_server(Request::ReportReached { robot: i, at: g.point })?;
                }
                arrivals[i] = Some(g);
            }
        }

        // (8) uncertainty, loop closure, SLAM status
        let params = self.cfg.uncertainty;
        for i in 0..n {
            let mut dopt_event = DOptEvent::None;
            let a = &mut self.agents[i];
            if a.pose != previous[i] {
                let delta = pose3_from_2d(&previous[i]).inverse() * pose3_from_2d(&a.pose);
                if delta.translation.vector.norm() > 0.0 {
                    a.graph.propagate_uncertainty(delta, &params)?;
                }
            }
            let mut closed = false;
            if let Some(g) = arrivals[i] {
                let here = a.position();
                let radius = self.cfg.reloc.closure_radius;
                let hit = a
                    .sg_list
                    .iter()
                    .filter(|s| s.tick < g.assigned_tick && s.point.dist(&here) <= radius)
                    .min_by(|x, y| x.point.dist(&here).total_cmp(&y.point.dist(&here)))
                    .copied();
                if let Some(s) = hit {
                    a.graph.apply_loop_closure(s.node, params.retain, &params)?;
                    closed = true;
                }
                if g.kind == GoalKind::Frontier {
                    let node = a.graph.last_node();
                    a.sg_list.push(SavedGoal {
                        point: g.point,
                        tick: self.tick,
                        node,
                    });
                }
            }
            a.d_opti = a.graph.reported_d_opti(&params, self.cfg.dopt_form);
            let was_lost = a.orb_status == OrbStatus::Lost;
            a.orb_status = if a.graph.is_lost(&params) {
                OrbStatus::Lost
            } else {
                OrbStatus::Ok
            };
            let at = a.position();
            if closed {
                dopt_event = DOptEvent::Closure;
                self.event(i, EventKind::Closure, at);
            } else if !was_lost && self.agents[i].orb_status == OrbStatus::Lost {
                dopt_event = DOptEvent::Lost;
                self.event(i, EventKind::Lost, at);
            }
            self.log.dopti.push(DOptRow {
                tick: self.tick,
                robot: i,
                d_opti: self.agents[i].d_opti,
                event: dopt_event,
            });
        }

        // (9) metrics
        let row = TickRow {
            tick: self.tick,
            robot_coverage: self
                .agents
                .iter()
                .map(|a| self.coverage.percent(&a.local_map))
                .collect::<Result<_>>()?,
            merged_coverage: self.coverage.percent(&self.merged)?,
            iou_area: self.ious.iter().map(IoUMap::area).collect(),
            raw: raw_total,
            filtered: filtered_total,
            global: if self.uses_server() {
                self.server.global_points().len()
            } else {
                filtered_total
            },
            d_opti: self.agents.iter().map(|a| a.d_opti).collect(),
            reloc: self.agents.iter().map(|a| a.reloc).collect(),
            lost: self.agents.iter().map(|a| a.orb_status == OrbStatus::Lost).collect(),
        };
        self.log.rows.push(row);
        Ok(())
    }

    /// Gain-minus-normalized-distance choice over robot `i`'s own frontiers,
    /// with gains on the merged map. Unreachable points are skipped.
    fn dcm_choice(&self, i: usize, candidates: &[FrontierPoint]) -> Option<(Point2, f64)> {
        let here = self.agents[i].position();
        let plan = plan_options(&self.cfg);
        let scored: Vec<(Point2, f64, f64)> = candidates
            .iter()
            .filter_map(|p| {
                let gain = info_gain(&self.merged, p.position, self.cfg.server.rad);
                if gain <= 0.0 {
                    return None;
                }
                let path = plan_path(&self.merged, here, p.position, plan).ok().flatten()?;
                Some((p.position, gain, path.length))
            })
            .collect();
        let d_norm = scored.iter().map(|s| s.2).fold(0.0, f64::max);
        let d_norm = if d_norm > 0.0 { d_norm } else { 1.0 };
        let mut best: Option<(Point2, f64)> = None;
        for (p, gain, d) in scored {
            let u = gain - d / d_norm;
            if best.is_none_or(|(_, b)| u > b) {
                best = Some((p, u));
            }
        }
        best
    }

    pub fn run(mut self) -> Result<RunOutput> {
        while self.tick < self.cfg.ticks {
            self.tick()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> RunOutput {
        RunOutput {
            config: self.cfg,
            world: self.world,
            log: self.log,
            merged: self.merged,
            local_maps: self.agents.iter().map(|a| a.local_map.clone()).collect(),
            ious: self.ious,
            agents: self.agents,
        }
    }
}

/// Runs a scenario to its tick budget.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    Simulation::new(cfg.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::UNKNOWN;

    fn tiny(policy: Policy) -> ScenarioConfig {
        ScenarioConfig {
            world: "builtin:house40".into(),
            policy,
            ticks: 60,
            clutter: 0,
            ..Default::default()
        }
    }

    #[test]
    fn runs_every_policy() {
        for policy in Policy::ALL {
            let out = run_scenario(&tiny(policy)).unwrap();
            assert_eq!(out.log.rows.len(), 60);
            let cov: Vec<f64> = out.log.rows.iter().map(|r| r.merged_coverage).collect();
            assert!(cov.windows(2).all(|w| w[0] <= w[1]), "{policy}");
            assert!(cov[59] > cov[0], "{policy}");
            assert!(out.merged.cells().iter().any(|v| *v != UNKNOWN));
        }
    }

    #[test]
    fn same_seed_same_log() {
        let a = run_scenario(&tiny(Policy::Ours)).unwrap();
        let b = run_scenario(&tiny(Policy::Ours)).unwrap();
        assert_eq!(a.log.rows, b.log.rows);
        assert_eq!(a.log.events, b.log.events);
    }

    #[test]
    fn bad_spawn_is_config_error() {
        let cfg = ScenarioConfig {
            spawns: vec![[0.25, 0.25]],
            spawn_jitter: 0.0,
            ..Default::default()
        };
        assert!(Simulation::new(cfg).err().unwrap().is_config());
    }
}
