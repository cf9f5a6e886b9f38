//! `nematic2d verify`: post-hoc diagnostics on the snapshots of a finished run.
//!
//! Checks and what each one asserts:
//! * `pressure`: recovered pressure is finite, mean-zero and consistent with the Leray
//!   projection at every snapshot.
//! * `zcheck`: the sphere defect solves its linear equation within the Gronwall bound
//!   (unit constant); renormalized runs must also keep it below `1e-8`.
//! * `smalldata`: higher norms stay below the cap, and small data never fires the detector.
//! * `struwe`: both ratios are well defined (finite, or both sides zero).
//! * `apriori`: every integrated norm and ratio is finite.
//! * `budget`: the energy inequality slack in `energy.csv` is non-negative up to roundoff.

use std::path::{Path, PathBuf};

use nematic_core::diagnostics::{
    pressure_consistency, pressure_series, recover_pressure, smalldata_monitor, z_verify, SmallDataConfig,
    PRESSURE_CSV_HEADER, SMALLDATA_CSV_HEADER, ZCHECK_CSV_HEADER,
};
use nematic_core::estimates::apriori_report;
use nematic_core::integrator::ConstraintMode;
use nematic_core::local::{struwe_check, StruweRatio};
use nematic_core::snapshot;
use nematic_core::{ForcingSpec, Potential64, State64};
use serde::Serialize;
use serde_json::{json, Value};

use crate::run::write_json;
use crate::{config::ConfigError, Failure, RunConfig, Setup};

pub const CHECKS: &[&str] = &["pressure", "zcheck", "smalldata", "struwe", "apriori", "budget"];

#[derive(Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub details: Value,
}

#[derive(Debug, Serialize)]
pub struct Verdict {
    pub run_dir: PathBuf,
    pub snapshots: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

impl Verdict {
    pub fn failed(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
    }
}

/// Parses `--only`, a comma-separated subset of [`CHECKS`].
pub fn parse_only(only: Option<&str>) -> Result<Vec<&'static str>, Failure> {
    let Some(list) = only else {
        return Ok(CHECKS.to_vec());
    };
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let known = CHECKS.iter().find(|c| **c == name).ok_or_else(|| {
            Failure::Config(ConfigError {
                path: "--only".into(),
                message: format!("unknown check {name:?}; known: {}", CHECKS.join(", ")),
            })
        })?;
        if !out.contains(known) {
            out.push(*known);
        }
    }
    if out.is_empty() {
        return Err(Failure::Config(ConfigError {
            path: "--only".into(),
            message: "no check named".into(),
        }));
    }
    Ok(out)
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    dir: &'a Path,
    traj: &'a [State64],
    forcing: &'a ForcingSpec,
    pot: &'a Potential64,
    dealias: bool,
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<(), Failure> {
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn check_pressure(c: &Ctx) -> Result<CheckOutcome, Failure> {
    let rows = pressure_series(c.traj, c.forcing, c.dealias)?;
    write_csv(&c.dir.join("pressure.csv"), PRESSURE_CSV_HEADER, rows.iter().map(|r| r.csv_row()))?;
    let mut worst_consistency = 0.0f64;
    let mut worst_mean = 0.0f64;
    for s in c.traj {
        worst_consistency = worst_consistency.max(pressure_consistency(s, c.forcing, c.dealias)?);
        let rec = recover_pressure(s, c.forcing, c.dealias)?;
        let scale = 1.0 + rec.p_tilde.max_abs();
        worst_mean = worst_mean.max(rec.p_tilde.mean()[0].abs() / scale);
    }
    let finite = rows.iter().all(|r| r.grad_l43.is_finite() && r.p_l2.is_finite());
    let cum = rows.last().map_or(0.0, |r| r.grad_l43_cum);
    Ok(CheckOutcome {
        name: "pressure".into(),
        passed: finite && worst_consistency < 1e-8 && worst_mean < 1e-10,
        details: json!({
            "max_consistency_rel": worst_consistency,
            "max_mean_rel": worst_mean,
            "gradp_L43_cum": cum,
            "finite": finite,
        }),
    })
}

fn check_zcheck(c: &Ctx) -> Result<CheckOutcome, Failure> {
    let t_end = c.traj.last().map_or(0.0, |s| s.t);
    let dt_z = c.cfg.verify.z_dt.unwrap_or(c.cfg.stepper.dt);
    let z = z_verify(c.traj, c.pot, None, t_end, dt_z, c.dealias)?;
    write_csv(&c.dir.join("zcheck.csv"), ZCHECK_CSV_HEADER, z.rows.iter().map(|r| r.csv_row()))?;
    let within = z
        .rows
        .iter()
        .all(|r| r.z_l2 * r.z_l2 <= r.bound_sq * (1.0 + 1e-9) + 1e-24);
    let renormalized = c.cfg.stepper.constraint_mode == ConstraintMode::Renormalize;
    let tiny = !renormalized || z.sup_l2 <= 1e-8;
    Ok(CheckOutcome {
        name: "zcheck".into(),
        passed: within && tiny,
        details: json!({
            "z0_L2": z.z0_l2,
            "sup_z_L2": z.sup_l2,
            "gronwall_bound_sq": z.bound_sq,
            "fitted_c": z.fitted_c,
            "within_bound": within,
            "renormalized_run": renormalized,
        }),
    })
}

/// Threshold parameters for checks that need a local-energy scale: the explicit verify
/// section, else the run's detector, else `epsilon = 1` with `R = L/16`.
fn smalldata_config(cfg: &RunConfig) -> SmallDataConfig {
    if let Some(sd) = cfg.verify.smalldata {
        return sd;
    }
    let (epsilon, r, radius_multiplier) = match &cfg.monitors.detector {
        Some(d) => (d.epsilon, d.r, d.radius_multiplier),
        None => (1.0, cfg.grid.length / 16.0, 2.0),
    };
    SmallDataConfig {
        cap: 1e6,
        smallness: 0.0,
        epsilon,
        r,
        radius_multiplier,
    }
}

fn check_smalldata(c: &Ctx) -> Result<CheckOutcome, Failure> {
    let sd = smalldata_config(c.cfg);
    let rec = smalldata_monitor(c.traj, c.forcing, c.pot, &sd, c.dealias)?;
    write_csv(&c.dir.join("smalldata.csv"), SMALLDATA_CSV_HEADER, rec.rows.iter().map(|r| r.csv_row()))?;
    Ok(CheckOutcome {
        name: "smalldata".into(),
        passed: rec.passed(),
        details: json!({
            "E0_bold": rec.e0_bold,
            "sup_norms": rec.sup_norms,
            "int_higher": rec.int_higher,
            "bounded": rec.bounded,
            "detector_fired": rec.detector_fired,
            "small_and_silent": rec.small_and_silent,
            "quadratic_checks": rec.quadratic_checks,
            "monotone_after_transient": rec.monotone_after_transient,
            "notices": rec.notices,
        }),
    })
}

fn check_struwe(c: &Ctx) -> Result<CheckOutcome, Failure> {
    let rep = struwe_check(c.traj, c.cfg.verify.r0)?;
    let ok = |r: StruweRatio| match r {
        StruweRatio::Value(v) => v.is_finite(),
        StruweRatio::ZeroOverZero => true,
        StruweRatio::Degenerate => false,
    };
    Ok(CheckOutcome {
        name: "struwe".into(),
        passed: ok(rep.velocity.ratio) && ok(rep.gradient.ratio),
        details: serde_json::to_value(rep).unwrap_or(Value::Null),
    })
}

fn check_apriori(c: &Ctx) -> Result<CheckOutcome, Failure> {
    let sd = smalldata_config(c.cfg);
    let rep = apriori_report(c.traj, c.forcing, c.pot, sd.epsilon, sd.r, c.dealias)?;
    let passed = rep.all_finite();
    let mut details = serde_json::to_value(&rep).unwrap_or(Value::Null);
    if let Some(obj) = details.as_object_mut() {
        obj.remove("higher_series");
    }
    Ok(CheckOutcome {
        name: "apriori".into(),
        passed,
        details,
    })
}

fn check_budget(c: &Ctx) -> Result<CheckOutcome, Failure> {
    let path = c.dir.join("energy.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Failure::Input(format!("{}: missing column {name}", path.display())))
    };
    let (ct, ce, cr, cs) = (col("t")?, col("E")?, col("residual_eq")?, col("slack_ineq")?);
    let (mut max_res, mut min_slack, mut max_e, mut t_end) = (0.0f64, f64::INFINITY, 0.0f64, 0.0f64);
    let mut rows = 0;
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let num = |i: usize| {
            f.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Failure::Input(format!("{}: malformed row {}", path.display(), k + 2)))
        };
        t_end = num(ct)?;
        max_e = max_e.max(num(ce)?.abs());
        max_res = max_res.max(num(cr)?.abs());
        min_slack = min_slack.min(num(cs)?);
        rows += 1;
    }
    if rows == 0 {
        return Err(Failure::Input(format!("{}: no rows", path.display())));
    }
    let tol = 10.0 * max_res * t_end.max(1.0) + 1e-9 * (1.0 + max_e);
    Ok(CheckOutcome {
        name: "budget".into(),
        passed: min_slack.is_finite() && min_slack >= -tol,
        details: json!({
            "rows": rows,
            "max_abs_residual_per_time": max_res,
            "min_slack": min_slack,
            "tolerance": tol,
        }),
    })
}

/// Loads the trajectory of `dir` and runs the selected checks, writing CSVs and
/// `verdict.json` into `dir`.
pub fn verify_dir(cfg: &RunConfig, dir: &Path, only: &[&str]) -> Result<Verdict, Failure> {
    let snap = snapshot::snapshot_dir(dir);
    if !snap.is_dir() {
        return Err(Failure::Input(format!("{}: no snapshot directory", snap.display())));
    }
    let setup = Setup::new(cfg)?;
    let traj = snapshot::read_trajectory(&snap, &setup.grid)?;
    let ctx = Ctx {
        cfg,
        dir,
        traj: &traj,
        forcing: &setup.forcing,
        pot: &setup.pot,
        dealias: cfg.stepper.dealias,
    };
    let mut checks = Vec::new();
    for name in only {
        log::info!("verify: {name}");
        let outcome = match *name {
            "pressure" => check_pressure(&ctx)?,
            "zcheck" => check_zcheck(&ctx)?,
            "smalldata" => check_smalldata(&ctx)?,
            "struwe" => check_struwe(&ctx)?,
            "apriori" => check_apriori(&ctx)?,
            "budget" => check_budget(&ctx)?,
            other => unreachable!("unchecked name {other}"),
        };
        checks.push(outcome);
    }
    let verdict = Verdict {
        run_dir: dir.to_path_buf(),
        snapshots: traj.len(),
        t_start: traj.first().map_or(0.0, |s| s.t),
        t_end: traj.last().map_or(0.0, |s| s.t),
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    write_json(&dir.join("verdict.json"), &verdict)?;
    Ok(verdict)
}

pub fn cli_verify(cfg: &RunConfig, dir: &Path, only: Option<&str>) -> Result<Verdict, Failure> {
    let names = parse_only(only)?;
    let verdict = verify_dir(cfg, dir, &names)?;
    if verdict.passed {
        Ok(verdict)
    } else {
        Err(Failure::VerifyFailed(verdict.failed()))
    }
}
