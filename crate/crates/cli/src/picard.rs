//! `nematic2d picard`: fixed-point iteration on the scenario's initial data.

use nematic_core::picard::{picard_solve, PicardConfig, PicardOutcome};
use serde::Serialize;

use crate::run::write_json;
use crate::{out_dir, write_resolved, Failure, RunConfig, Setup};

pub const PICARD_CSV_HEADER: &str = "iteration,distance,factor";

#[derive(Debug, Serialize)]
pub struct PicardSummary {
    pub converged: bool,
    pub iterations: usize,
    pub horizon: f64,
    pub dt: f64,
    pub last_distance: f64,
    pub max_factor: f64,
}

/// Picard settings from the config, defaulting to the whole run horizon at the stepper
/// time step.
pub fn picard_config(cfg: &RunConfig) -> PicardConfig {
    cfg.picard.unwrap_or_else(|| {
        let mut p = PicardConfig::new(cfg.stepper.horizon, cfg.stepper.dt);
        p.dealias = cfg.stepper.dealias;
        p
    })
}

pub fn csv(outcome: &PicardOutcome<f64>) -> String {
    let mut text = format!("{PICARD_CSV_HEADER}\n");
    for (i, d) in outcome.distances.iter().enumerate() {
        let factor = if i == 0 { String::new() } else { outcome.factors[i - 1].to_string() };
        text.push_str(&format!("{},{},{}\n", i + 1, d, factor));
    }
    text
}

pub fn execute(cfg: &RunConfig) -> Result<(PicardSummary, PicardOutcome<f64>), Failure> {
    let dir = out_dir(cfg);
    write_resolved(cfg, &dir)?;
    let setup = Setup::new(cfg)?;
    let pc = picard_config(cfg);
    pc.validate()?;
    let outcome = picard_solve(&setup.state, &pc, &setup.forcing, &setup.pot)?;
    std::fs::write(dir.join("picard.csv"), csv(&outcome))?;
    let summary = PicardSummary {
        converged: outcome.converged(),
        iterations: outcome.iterations,
        horizon: pc.horizon,
        dt: pc.dt,
        last_distance: outcome.distances.last().copied().unwrap_or(f64::NAN),
        max_factor: outcome.factors.iter().copied().fold(0.0, f64::max),
    };
    write_json(&dir.join("picard.json"), &summary)?;
    Ok((summary, outcome))
}

pub fn cli_picard(cfg: &RunConfig) -> Result<PicardSummary, Failure> {
    let (summary, _) = execute(cfg)?;
    if summary.converged {
        Ok(summary)
    } else {
        Err(Failure::PicardDiverged(format!(
            "{} sweeps on T0 = {}, last distance {:e}",
            summary.iterations, summary.horizon, summary.last_distance
        )))
    }
}
