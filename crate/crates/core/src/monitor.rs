//! Run-loop observer that logs energies, tracks the local-energy detector and writes
//! snapshots.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::{self, BudgetTracker, EnergyReport, CSV_HEADER};
use crate::error::Result;
use crate::forcing::ForcingSpec;
use crate::integrator::{Control, Observer};
use crate::local::{self, DetectorPolicy, DetectorState, DiskKernel, FireEvent};
use crate::potential::PotentialSpec;
use crate::scalar::Real;
use crate::snapshot;
use crate::state::State;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub epsilon: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(default = "default_policy")]
    pub policy: DetectorPolicy,
    /// Ball radius in units of `R`.
    #[serde(default = "default_mult")]
    pub radius_multiplier: f64,
}

fn default_policy() -> DetectorPolicy {
    DetectorPolicy::Log
}
fn default_mult() -> f64 {
    2.0
}

pub struct MonitorOptions {
    /// Energy rows every this many steps (the final state is always logged).
    pub monitor_every: usize,
    /// Snapshots every this many steps; `0` disables snapshots.
    pub snapshot_every: usize,
    pub dealias: bool,
    pub detector: Option<DetectorConfig>,
    /// Directory for `energy.csv`, `detector.jsonl` and `snapshots/`; `None` keeps
    /// everything in memory.
    pub out_dir: Option<PathBuf>,
}

pub struct RunMonitor<T: Real> {
    opts: MonitorOptions,
    pot: PotentialSpec<T>,
    forcing: ForcingSpec,
    kernel: Option<DiskKernel<T>>,
    pub detector: Option<DetectorState>,
    tracker: BudgetTracker,
    pub reports: Vec<EnergyReport>,
    /// `(index, time)` of written snapshots.
    pub snapshots: Vec<(usize, f64)>,
    energy_csv: Option<BufWriter<File>>,
    events: Option<BufWriter<File>>,
    last_step: Option<usize>,
    last_logged_t: Option<f64>,
    last_snapshot_t: Option<f64>,
}

impl<T: Real> RunMonitor<T> {
    pub fn new(
        grid: &std::sync::Arc<crate::grid::TorusGrid<T>>,
        pot: PotentialSpec<T>,
        forcing: ForcingSpec,
        opts: MonitorOptions,
    ) -> Result<Self> {
        let (kernel, detector) = match &opts.detector {
            Some(dc) => (
                Some(DiskKernel::new(grid, dc.radius_multiplier * dc.r)?),
                Some(DetectorState::new(dc.epsilon, dc.r, dc.policy)?),
            ),
            None => (None, None),
        };
        let (energy_csv, events) = match &opts.out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                if opts.snapshot_every > 0 {
                    std::fs::create_dir_all(snapshot::snapshot_dir(dir))?;
                }
                let mut csv = BufWriter::new(File::create(dir.join("energy.csv"))?);
                writeln!(csv, "{CSV_HEADER}")?;
                let ev = BufWriter::new(File::create(dir.join("detector.jsonl"))?);
                (Some(csv), Some(ev))
            }
            None => (None, None),
        };
        Ok(Self {
            opts,
            pot,
            forcing,
            kernel,
            detector,
            tracker: BudgetTracker::new(),
            reports: Vec::new(),
            snapshots: Vec::new(),
            energy_csv,
            events,
            last_step: None,
            last_logged_t: None,
            last_snapshot_t: None,
        })
    }

    pub fn out_dir(&self) -> Option<&Path> {
        self.opts.out_dir.as_deref()
    }

    pub fn events(&self) -> &[FireEvent] {
        self.detector.as_ref().map_or(&[], |d| &d.events)
    }

    pub fn tracker(&self) -> &BudgetTracker {
        &self.tracker
    }

    fn log_energy(&mut self, s: &State<T>) -> Result<Option<FireEvent>> {
        let mut rep = energy::global_energy(s, &self.pot, &self.forcing, self.opts.dealias)?;
        self.tracker.push(&mut rep);
        let mut fired = None;
        if let (Some(kernel), Some(det)) = (&self.kernel, &mut self.detector) {
            let prof = local::local_energy_with(s, &self.pot, det.r, kernel);
            rep.er_sup = prof.sup_value;
            rep.er_argmax = prof.argmax;
            fired = det.update(prof.sup_value, s.t);
            rep.detector_fired = det.fired;
        }
        if let Some(csv) = &mut self.energy_csv {
            writeln!(csv, "{}", rep.csv_row())?;
        }
        if let (Some(ev), Some(out)) = (&fired, &mut self.events) {
            serde_json::to_writer(&mut *out, ev)?;
            writeln!(out)?;
            out.flush()?;
        }
        self.last_logged_t = Some(s.t);
        self.reports.push(rep);
        Ok(fired)
    }

    fn snapshot(&mut self, s: &State<T>) -> Result<()> {
        if let Some(dir) = &self.opts.out_dir {
            let idx = self.snapshots.len();
            snapshot::write_state(&snapshot::snapshot_dir(dir), idx, s)?;
            self.snapshots.push((idx, s.t));
        }
        self.last_snapshot_t = Some(s.t);
        Ok(())
    }
}

impl<T: Real> Observer<T> for RunMonitor<T> {
    fn observe(&mut self, step: usize, state: &State<T>) -> Result<Control<T>> {
        self.last_step = Some(step);
        if self.opts.snapshot_every > 0 && step % self.opts.snapshot_every == 0 {
            self.snapshot(state)?;
        }
        if step % self.opts.monitor_every.max(1) != 0 {
            return Ok(Control::Continue);
        }
        let Some(ev) = self.log_energy(state)? else {
            return Ok(Control::Continue);
        };
        let policy = self.detector.as_ref().map(|d| d.policy).unwrap_or(DetectorPolicy::Log);
        match policy {
            DetectorPolicy::Log => Ok(Control::Continue),
            DetectorPolicy::Halt => {
                if self.last_snapshot_t != Some(state.t) && self.opts.snapshot_every > 0 {
                    self.snapshot(state)?;
                }
                Ok(Control::Halt(format!(
                    "local energy {:.6e} exceeded 2 eps^2 = {:.6e} at t = {}",
                    ev.er_sup,
                    2.0 * ev.eps * ev.eps,
                    ev.t
                )))
            }
            DetectorPolicy::RestartRenormalized => {
                let (next, drop) = local::restart_renormalized(state, &self.pot)?;
                log::info!("restart at t = {}: E {} -> {}", drop.t, drop.e_before, drop.e_after);
                if let Some(det) = &mut self.detector {
                    det.drop_log.push(drop);
                }
                Ok(Control::Replace(next))
            }
        }
    }

    fn finish(&mut self, state: &State<T>) -> Result<()> {
        if self.last_logged_t != Some(state.t) {
            self.log_energy(state)?;
        }
        if self.opts.snapshot_every > 0 && self.last_snapshot_t != Some(state.t) {
            self.snapshot(state)?;
        }
        if let Some(csv) = &mut self.energy_csv {
            csv.flush()?;
        }
        if let Some(ev) = &mut self.events {
            ev.flush()?;
        }
        Ok(())
    }
}
