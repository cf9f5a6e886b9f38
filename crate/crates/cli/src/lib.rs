//! Command-line driver for the nematic flow solver: configuration, run orchestration,
//! post-hoc verification, Picard checks, sweeps and PNG output.

pub mod config;
pub mod picard;
pub mod plot;
pub mod run;
pub mod sweep;
pub mod verify;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nematic_core::scenario::scenario_build;
use nematic_core::{ForcingSpec, Grid64, Potential64, PotentialSpec, State64, TorusGrid};

pub use config::{ConfigError, RunConfig};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INVALID_CONFIG: i32 = 1;
    pub const DETECTOR_HALT: i32 = 2;
    pub const NUMERICAL_ABORT: i32 = 3;
    pub const PICARD_DIVERGED: i32 = 4;
}

/// Terminal outcome of a subcommand that is not a plain success.
#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    /// Bad or missing input files (snapshots, run directory).
    Input(String),
    Halted(String),
    Numerical(String),
    PicardDiverged(String),
    /// Verification ran but some asserted invariant failed.
    VerifyFailed(Vec<String>),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) | Failure::Input(_) => exit::INVALID_CONFIG,
            Failure::Halted(_) => exit::DETECTOR_HALT,
            Failure::Numerical(_) | Failure::VerifyFailed(_) => exit::NUMERICAL_ABORT,
            Failure::PicardDiverged(_) => exit::PICARD_DIVERGED,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Input(m) => write!(f, "invalid input: {m}"),
            Failure::Halted(m) => write!(f, "detector halt: {m}"),
            Failure::Numerical(m) => write!(f, "numerical abort: {m}"),
            Failure::PicardDiverged(m) => write!(f, "Picard iteration diverged: {m}"),
            Failure::VerifyFailed(names) => write!(f, "verification failed: {}", names.join(", ")),
        }
    }
}

impl std::error::Error for Failure {}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<nematic_core::Error> for Failure {
    fn from(e: nematic_core::Error) -> Self {
        use nematic_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::InvalidGrid(_) | E::UnknownScenario { .. } => {
                Failure::Config(config::core_to_cfg(e))
            }
            E::Format(_) | E::GridMismatch(_) | E::Json(_) => Failure::Input(e.to_string()),
            E::Io(_) => Failure::Input(e.to_string()),
            E::NonFinite { .. } | E::StepAborted { .. } | E::Forcing { .. } => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = Some(out.clone());
        }
    }
}

/// Resolved output directory of a config.
pub fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

/// Everything needed to start a simulation, built from a validated config.
pub struct Setup {
    pub grid: Arc<Grid64>,
    pub state: State64,
    pub forcing: ForcingSpec,
    pub pot: Potential64,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self, Failure> {
        let grid = TorusGrid::new(cfg.grid.n, cfg.grid.length)?;
        let sc = scenario_build(&cfg.scenario.name, &cfg.scenario.params, &grid, cfg.seed)?;
        // an explicit forcing section replaces whatever the scenario brings
        let forcing = if cfg.forcing.is_zero() { sc.forcing } else { cfg.forcing.clone() };
        Ok(Self {
            grid,
            state: sc.state,
            forcing,
            pot: PotentialSpec::from_family(&cfg.potential),
        })
    }
}

pub const RESOLVED_CONFIG: &str = "config.toml";

/// Writes the resolved config into `dir` for provenance.
pub fn write_resolved(cfg: &RunConfig, dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(RESOLVED_CONFIG), cfg.to_toml())?;
    Ok(())
}

/// Worker count from `NEMATIC2D_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("NEMATIC2D_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}
