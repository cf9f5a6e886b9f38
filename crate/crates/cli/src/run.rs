//! `nematic2d run`: one simulation with energy logging, detector, snapshots and plots.

use std::path::{Path, PathBuf};

use nematic_core::energy::EnergyReport;
use nematic_core::integrator::{self, StopReason};
use nematic_core::local::FireEvent;
use nematic_core::monitor::{MonitorOptions, RunMonitor};
use serde::Serialize;

use crate::{out_dir, plot, write_resolved, Failure, RunConfig, Setup};

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub steps: usize,
    pub t_final: f64,
    pub halted: Option<String>,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub max_abs_residual: f64,
    pub min_slack: f64,
    pub detector_events: usize,
    pub snapshots: usize,
}

/// In-memory products of a run, for callers that want more than the files.
pub struct RunProducts {
    pub summary: RunSummary,
    pub reports: Vec<EnergyReport>,
    pub events: Vec<FireEvent>,
}

/// Runs `cfg` into its output directory. A detector halt is reported through
/// `summary.halted`, not as an error.
pub fn execute(cfg: &RunConfig) -> Result<RunProducts, Failure> {
    let dir = out_dir(cfg);
    write_resolved(cfg, &dir)?;
    let setup = Setup::new(cfg)?;
    let st = &cfg.stepper;
    let opts = MonitorOptions {
        monitor_every: st.monitor_every,
        snapshot_every: st.snapshot_stride(),
        dealias: st.dealias,
        detector: cfg.monitors.detector,
        out_dir: Some(dir.clone()),
    };
    let mut monitor = RunMonitor::new(&setup.grid, setup.pot, setup.forcing.clone(), opts)?;
    let outcome = integrator::run(setup.state, st.horizon, &st.stepper(), &setup.forcing, &setup.pot, &mut [&mut monitor])?;
    let halted = match outcome.stop {
        StopReason::Completed => None,
        StopReason::Halted(reason) => Some(reason),
    };
    if cfg.output.plots {
        plot::render_run(&dir, &monitor.reports, &monitor.snapshots)?;
    }
    let reports = std::mem::take(&mut monitor.reports);
    let summary = RunSummary {
        out_dir: dir.clone(),
        steps: outcome.steps,
        t_final: outcome.state.t,
        halted,
        energy_initial: reports.first().map_or(f64::NAN, |r| r.energy),
        energy_final: reports.last().map_or(f64::NAN, |r| r.energy),
        max_abs_residual: monitor.tracker().max_abs_residual,
        min_slack: monitor.tracker().min_slack,
        detector_events: monitor.events().len(),
        snapshots: monitor.snapshots.len(),
    };
    write_json(&dir.join("run.json"), &summary)?;
    Ok(RunProducts {
        summary,
        events: monitor.events().to_vec(),
        reports,
    })
}

pub fn cli_run(cfg: &RunConfig) -> Result<RunSummary, Failure> {
    let products = execute(cfg)?;
    match &products.summary.halted {
        Some(reason) => Err(Failure::Halted(reason.clone())),
        None => Ok(products.summary),
    }
}

pub(crate) fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Input(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
