//! Scenario configuration, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{RelocSelector, RelocTrigger, SensorParams};
use crate::error::{Error, Result};
use crate::frontier::{FilterOptions, FilterOrder};
use crate::pose_graph::{DOptForm, UncertaintyParams};
use crate::server::{GainThreshold, RewardParams, ServerParams};
use crate::world::{load_world, WorldModel};

const HOUSE40: &str = include_str!("../assets/house40.world");
const WAREHOUSE40: &str = include_str!("../assets/warehouse40.world");

pub const BUILTIN_WORLDS: [&str; 2] = ["house40", "warehouse40"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Overlap-map filtering, managed server, re-localization.
    #[default]
    Ours,
    /// Raw frontiers through an unmanaged server.
    Mexp,
    /// Per-robot gain-minus-distance utility, no server.
    Dcm,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Ours, Policy::Mexp, Policy::Dcm];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Ours => "ours",
            Policy::Mexp => "mexp",
            Policy::Dcm => "dcm",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Policy::Ours),
            "mexp" => Ok(Policy::Mexp),
            "dcm" => Ok(Policy::Dcm),
            _ => Err(Error::Config(format!("unknown policy {s:?} (expected ours, mexp or dcm)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct FilterConfig {
    pub dist_thresh: f64,
    pub order: FilterOrder,
    pub keep_iou: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            dist_thresh: 1.0,
            order: FilterOrder::IouFirst,
            keep_iou: false,
        }
    }
}

impl FilterConfig {
    pub fn options(&self) -> FilterOptions {
        FilterOptions {
            order: self.order,
            keep_iou: self.keep_iou,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct RelocConfig {
    pub enabled: bool,
    pub selector: RelocSelector,
    /// Defaults to `below` for the normalized D-optimality form and `above`
    /// for the literal one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trigger: Option<RelocTrigger>,
    pub closure_radius: f64,
}

impl Default for RelocConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            selector: RelocSelector::LargestEntropy,
            trigger: None,
            closure_radius: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct UavConfig {
    pub enabled: bool,
    pub min_height: f64,
    pub swath: f64,
    /// Fly only this many sweep legs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub legs: Option<usize>,
}

impl Default for UavConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            min_height: 1.0,
            swath: 2.0,
            legs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct ScenarioConfig {
    /// `builtin:<name>` or a world-file path relative to the config file.
    pub world: String,
    /// Nominal spawn positions (m), one per robot.
    pub spawns: Vec<[f64; 2]>,
    /// Seeded uniform offset applied to each spawn coordinate (m).
    pub spawn_jitter: f64,
    /// Seeded low obstacles scattered over the free floor.
    pub clutter: usize,
    pub policy: Policy,
    pub ticks: u64,
    pub seed: u64,
    /// Meters per tick.
    pub speed: f64,
    /// Smallest frontier cluster, in cells.
    pub min_cluster: usize,
    /// Leading fraction of the run excluded from post-transient statistics.
    pub transient: f64,
    pub d_max: f64,
    pub dopt_form: DOptForm,
    pub gain_threshold: GainThreshold,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history_window: Option<u64>,
    /// Lost robots stop inserting scans until a loop closure.
    pub lost_stops_mapping: bool,
    pub plan_through_unknown: bool,
    /// Drop a frontier goal once nothing unknown is left around it.
    pub abandon_explored: bool,
    pub sensor: SensorParams,
    pub server: ServerParams,
    pub reward: RewardParams,
    pub filter: FilterConfig,
    pub reloc: RelocConfig,
    pub uncertainty: UncertaintyParams,
    pub uav: UavConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            world: "builtin:house40".into(),
            spawns: vec![[3.0, 11.75], [6.0, 11.75]],
            spawn_jitter: 0.5,
            clutter: 6,
            policy: Policy::Ours,
            ticks: 900,
            seed: 1,
            speed: 0.25,
            min_cluster: 3,
            transient: 0.2,
            d_max: 1.5,
            dopt_form: DOptForm::Normalized,
            gain_threshold: GainThreshold::Relative,
            history_window: None,
            lost_stops_mapping: false,
            plan_through_unknown: false,
            abandon_explored: true,
            sensor: SensorParams::default(),
            server: ServerParams::default(),
            reward: RewardParams::default(),
            filter: FilterConfig::default(),
            reloc: RelocConfig::default(),
            uncertainty: UncertaintyParams::default(),
            uav: UavConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Parses TOML. Relative world paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_col(text, s.start))
                .unwrap_or((0, 0));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        if let Some(dir) = base_dir {
            if !cfg.world.starts_with("builtin:") && Path::new(&cfg.world).is_relative() {
                cfg.world = dir.join(&cfg.world).to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Trigger direction actually used.
    pub fn reloc_trigger(&self) -> RelocTrigger {
        self.reloc.trigger.unwrap_or(match self.dopt_form {
            DOptForm::Normalized => RelocTrigger::Below,
            DOptForm::Literal => RelocTrigger::Above,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.spawns.is_empty() {
            return bad("at least one robot spawn is required".into());
        }
        if self.ticks == 0 {
            return bad("ticks must be > 0".into());
        }
        if !(self.speed > 0.0) {
            return bad(format!("speed must be > 0, got {}", self.speed));
        }
        if self.min_cluster == 0 {
            return bad("min-cluster must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.transient) {
            return bad(format!("transient must be in [0, 1), got {}", self.transient));
        }
        if !(self.spawn_jitter >= 0.0) {
            return bad(format!("spawn-jitter must be >= 0, got {}", self.spawn_jitter));
        }
        if self.sensor.rays == 0 || !(self.sensor.max_range > 0.0) || !(self.sensor.fov > 0.0) {
            return bad("sensor needs rays >= 1, max-range > 0 and fov > 0".into());
        }
        self.server.validate()?;
        if !(self.filter.dist_thresh >= 0.0) {
            return bad(format!("filter.dist-thresh must be >= 0, got {}", self.filter.dist_thresh));
        }
        if !(self.reward.lambda_d > 0.0) || !(self.reward.w_h >= 0.0) {
            return bad("reward needs lambda-d > 0 and w-h >= 0".into());
        }
        let u = &self.uncertainty;
        if u.sigmas.iter().any(|s| !(*s >= 0.0)) || !(u.epsilon > 0.0) || !(u.d_cap > 0.0) {
            return bad("uncertainty needs sigmas >= 0, epsilon > 0, d-cap > 0".into());
        }
        if !(0.0..1.0).contains(&u.retain) || !(u.l_lost > 0.0) {
            return bad("uncertainty needs retain in [0, 1) and l-lost > 0".into());
        }
        if !(self.reloc.closure_radius >= 0.0) {
            return bad("reloc.closure-radius must be >= 0".into());
        }
        if self.uav.enabled && !(self.uav.min_height > 0.0 && self.uav.swath > 0.0) {
            return bad("uav needs min-height > 0 and swath > 0".into());
        }
        if self.history_window == Some(0) {
            return bad("history-window must be >= 1".into());
        }
        Ok(())
    }

    /// Loads the referenced world file.
    pub fn load_world(&self) -> Result<WorldModel> {
        if let Some(name) = self.world.strip_prefix("builtin:") {
            let text = match name {
                "house40" => HOUSE40,
                "warehouse40" => WAREHOUSE40,
                _ => {
                    return Err(Error::Config(format!(
                        "unknown builtin world {name:?} (known: {})",
                        BUILTIN_WORLDS.join(", ")
                    )))
                }
            };
            return load_world(text);
        }
        let path = PathBuf::from(&self.world);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read world {}: {e}", path.display())))?;
        load_world(&text)
    }

    /// What `validate` prints: the runtime parameters, then the full config.
    pub fn resolved_report(&self) -> String {
        let mut out = String::new();
        for (name, value) in self.parameter_table() {
            out.push_str(&format!("{name} = {value}\n"));
        }
        out.push('\n');
        out.push_str(&self.to_toml());
        out
    }

    /// The six runtime parameters the exploration pipeline is tuned by.
    pub fn parameter_table(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("PRC_UNK", self.server.prc_unk),
            ("RAD", self.server.rad),
            ("MIN_PTS", self.server.min_pts as f64),
            ("MAX_PTS", self.server.max_pts as f64),
            ("DIST_THRESH", self.filter.dist_thresh),
            ("DIST_THRES", self.server.dist_thres),
            ("D_MAX", self.d_max),
        ]
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}
