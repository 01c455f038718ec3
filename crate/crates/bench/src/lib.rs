//! Fixtures shared by the benchmarks.

use coexplore::{run_scenario, OccupancyGrid, Policy, ScenarioConfig};

/// Two robots' maps and the merged map after `ticks` of the default scenario.
pub struct Snapshot {
    pub maps: Vec<OccupancyGrid>,
    pub merged: OccupancyGrid,
}

pub fn scenario(ticks: u64) -> ScenarioConfig {
    ScenarioConfig {
        policy: Policy::Ours,
        ticks,
        ..ScenarioConfig::default()
    }
}

pub fn snapshot(ticks: u64) -> Snapshot {
    let out = run_scenario(&scenario(ticks)).expect("default scenario runs");
    Snapshot {
        maps: out.local_maps,
        merged: out.merged,
    }
}
