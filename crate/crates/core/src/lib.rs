//! Multi-robot collaborative frontier exploration on occupancy grids.
//!
//! Robots map a ground-truth world with ray-cast sensors, share maps, filter
//! their frontiers against pairwise overlap maps and get goals from a
//! central server. Each robot tracks its localization uncertainty in a pose
//! graph and, when it degrades, revisits an earlier goal to close a loop.

pub mod agent;
pub mod config;
pub mod error;
pub mod frontier;
pub mod metrics;
pub mod overlap;
pub mod planner;
pub mod pose_graph;
pub mod raycast;
pub mod report;
pub mod server;
pub mod sim;
pub mod world;

pub use agent::{AgentState, OrbStatus, RelocSelector, RelocTrigger, SensorParams};
pub use config::{Policy, ScenarioConfig};
pub use error::{Error, Result};
pub use frontier::{FrontierPoint, FrontierSource};
pub use metrics::MapQuality;
pub use overlap::IoUMap;
pub use pose_graph::{DOptForm, PoseGraph, UncertaintyParams};
pub use report::{RunSummary, write_run};
pub use server::{ServerParams, ServerState};
pub use sim::{run_scenario, MetricsLog, RunOutput, Simulation};
pub use world::{CellIndex, OccupancyGrid, Point2, Pose2D, WorldModel};
