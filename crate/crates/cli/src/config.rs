//! Run configuration: TOML (or JSON) with field-path diagnostics.

use std::path::{Path, PathBuf};

use nematic_core::diagnostics::SmallDataConfig;
use nematic_core::forcing::ForcingSpec;
use nematic_core::integrator::{ConstraintMode, Scheme, StepperConfig};
use nematic_core::monitor::DetectorConfig;
use nematic_core::picard::PicardConfig;
use nematic_core::potential::PotentialFamily;
use nematic_core::scenario::{ScenarioParams, SCENARIOS};
use serde::{Deserialize, Serialize};

/// Invalid configuration, reported with the dotted path of the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.path.is_empty() {
            write!(f, "invalid config: {}", self.message)
        } else {
            write!(f, "invalid config at `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn cfg_err(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.into(),
        message: message.into(),
    }
}

fn default_length() -> f64 {
    std::f64::consts::TAU
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    #[serde(rename = "L", default = "default_length")]
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    #[serde(default)]
    pub params: ScenarioParams,
}

fn default_scheme() -> Scheme {
    Scheme::IfHeun
}
fn default_constraint() -> ConstraintMode {
    ConstraintMode::Renormalize
}
fn default_true() -> bool {
    true
}
fn default_cfl() -> f64 {
    0.5
}
fn default_one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_constraint")]
    pub constraint_mode: ConstraintMode,
    #[serde(default = "default_true")]
    pub dealias: bool,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    /// Steps between snapshots; 0 disables them. Unset means about 20 per run.
    pub snapshot_every: Option<usize>,
    #[serde(default = "default_one")]
    pub monitor_every: usize,
}

impl StepperSection {
    pub fn nsteps(&self) -> usize {
        nematic_core::integrator::step_plan(self.horizon, self.dt).0
    }

    pub fn snapshot_stride(&self) -> usize {
        self.snapshot_every.unwrap_or_else(|| (self.nsteps() / 20).max(1))
    }

    pub fn stepper(&self) -> StepperConfig {
        StepperConfig {
            dt: self.dt,
            scheme: self.scheme,
            constraint_mode: self.constraint_mode,
            dealias: self.dealias,
            cfl_safety: self.cfl_safety,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorsSection {
    pub detector: Option<DetectorConfig>,
}

fn default_r0() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Time step of the post-hoc `z` solve; defaults to `stepper.dt`.
    pub z_dt: Option<f64>,
    /// Radius of the Struwe check.
    #[serde(default = "default_r0")]
    pub r0: f64,
    pub smalldata: Option<SmallDataConfig>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            z_dt: None,
            r0: default_r0(),
            smalldata: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None, plots: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Dotted path of the swept key, e.g. `stepper.dt`.
    pub param: String,
    pub values: Vec<toml::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSection,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub potential: PotentialFamily,
    #[serde(default)]
    pub forcing: ForcingSpec,
    pub stepper: StepperSection,
    #[serde(default)]
    pub monitors: MonitorsSection,
    pub picard: Option<PicardConfig>,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
    pub sweep: Option<SweepSection>,
}

fn finite_vec(v: &[f64], path: &str) -> Result<(), ConfigError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(cfg_err(path, "entries must be finite"))
    }
}

impl RunConfig {
    /// Parses TOML or JSON (by extension, falling back to content sniffing) into a raw
    /// document, so sweeps can override keys before typed validation.
    pub fn load_value(path: &Path) -> Result<toml::Value, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err("", format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if is_json {
            let json: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| cfg_err("", format!("{}: {e}", path.display())))?;
            toml::Value::try_from(json).map_err(|e| cfg_err("", format!("{}: {e}", path.display())))
        } else {
            text.parse::<toml::Table>()
                .map(toml::Value::Table)
                .map_err(|e| cfg_err("", format!("{}: {}", path.display(), e.message())))
        }
    }

    pub fn from_value(value: toml::Value) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            cfg_err(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_value(Self::load_value(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Semantic checks beyond the schema; every failure names its field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if g.n < 8 || g.n % 2 != 0 {
            return Err(cfg_err("grid.n", format!("must be even and at least 8, got {}", g.n)));
        }
        if !(g.length > 0.0 && g.length.is_finite()) {
            return Err(cfg_err("grid.L", "must be positive"));
        }
        if !SCENARIOS.contains(&self.scenario.name.as_str()) {
            return Err(cfg_err(
                "scenario.name",
                format!("unknown scenario {:?}; known: {}", self.scenario.name, SCENARIOS.join(", ")),
            ));
        }
        match &self.potential {
            PotentialFamily::None => {}
            PotentialFamily::Magnetic { h } => finite_vec(h, "potential.H")?,
            PotentialFamily::Quadratic { xi } => finite_vec(xi, "potential.xi")?,
        }
        self.forcing.validate().map_err(core_to_cfg)?;
        let s = &self.stepper;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(cfg_err("stepper.dt", format!("must be positive, got {}", s.dt)));
        }
        if !(s.horizon >= 0.0 && s.horizon.is_finite()) {
            return Err(cfg_err("stepper.T", "must be a non-negative finite horizon"));
        }
        if !(s.cfl_safety > 0.0 && s.cfl_safety <= 1.0) {
            return Err(cfg_err("stepper.cfl_safety", "must lie in (0, 1]"));
        }
        if s.monitor_every == 0 {
            return Err(cfg_err("stepper.monitor_every", "must be at least 1"));
        }
        if let Some(d) = &self.monitors.detector {
            if !(d.epsilon > 0.0) {
                return Err(cfg_err("monitors.detector.epsilon", "must be positive"));
            }
            if !(d.r > 0.0) {
                return Err(cfg_err("monitors.detector.R", "must be positive"));
            }
            if !(d.radius_multiplier > 0.0) {
                return Err(cfg_err("monitors.detector.radius_multiplier", "must be positive"));
            }
            if d.radius_multiplier * d.r >= 0.5 * g.length {
                return Err(cfg_err("monitors.detector.R", "ball radius must stay below L/2"));
            }
        }
        if let Some(p) = &self.picard {
            p.validate().map_err(core_to_cfg)?;
        }
        if let Some(z) = self.verify.z_dt {
            if !(z > 0.0) {
                return Err(cfg_err("verify.z_dt", "must be positive"));
            }
        }
        if !(self.verify.r0 > 0.0 && self.verify.r0 < 0.5 * g.length) {
            return Err(cfg_err("verify.r0", "must lie in (0, L/2)"));
        }
        if let Some(sd) = &self.verify.smalldata {
            if sd.radius_multiplier * sd.r >= 0.5 * g.length || !(sd.r > 0.0) || !(sd.epsilon > 0.0) {
                return Err(cfg_err("verify.smalldata", "need epsilon > 0 and 0 < radius_multiplier * R < L/2"));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(cfg_err("sweep.values", "must not be empty"));
            }
        }
        Ok(())
    }
}

/// Maps a core parameter error onto a config error with the same field path.
pub fn core_to_cfg(e: nematic_core::Error) -> ConfigError {
    match e {
        nematic_core::Error::InvalidParameter { field, reason } => cfg_err(field, reason),
        other => cfg_err("", other.to_string()),
    }
}

/// Sets a dotted key in a raw document, creating intermediate tables.
pub fn set_path(doc: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| cfg_err(parts[..i].join("."), "is not a table"))?;
        if i + 1 == parts.len() {
            table.insert((*key).to_string(), value);
            return Ok(());
        }
        cur = table
            .entry((*key).to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Err(cfg_err("sweep.param", "empty path"))
}
