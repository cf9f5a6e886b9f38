//! Fixed-point (Picard) iteration of the mild formulation on `[0, T0]`.
//!
//! Each sweep freezes the nonlinear terms of the previous iterate and solves the linear
//! Stokes/heat system exactly in time per mode, with the Duhamel integral taken by the
//! trapezoid rule on the inner grid:
//! `u_{j+1} = E u_j + dt/2 (E N_j + N_{j+1})`, `E = exp(-|k|^2 dt)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Spectrum;
use crate::forcing::ForcingSpec;
use crate::integrator::{apply_factor, forcing_at, integrating_factor, step_plan};
use crate::ops;
use crate::potential::PotentialSpec;
use crate::rhs;
use crate::scalar::Real;
use crate::state::State;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    #[serde(rename = "T0")]
    pub horizon: f64,
    pub dt: f64,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_true")]
    pub dealias: bool,
}

fn default_iters() -> usize {
    50
}
fn default_tol() -> f64 {
    1e-10
}
fn default_true() -> bool {
    true
}

impl PicardConfig {
    pub fn new(horizon: f64, dt: f64) -> Self {
        Self {
            horizon,
            dt,
            max_iters: default_iters(),
            tol: default_tol(),
            dealias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("picard.T0", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(Error::param("picard.dt", "must lie in (0, T0]"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("picard.tol", "must be positive"));
        }
        if self.max_iters < 2 {
            return Err(Error::param("picard.max_iters", "must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PicardStatus {
    Converged,
    /// `max_iters` reached, or the iterates stopped being finite.
    Diverged,
}

#[derive(Clone, Debug)]
pub struct PicardOutcome<T: Real> {
    pub status: PicardStatus,
    /// Last iterate, one state per inner time level.
    pub trajectory: Vec<State<T>>,
    /// `dist(iter_n, iter_{n-1})` for `n = 1, 2, ...`
    pub distances: Vec<f64>,
    /// `distances[n] / distances[n-1]`
    pub factors: Vec<f64>,
    pub iterations: usize,
}

impl<T: Real> PicardOutcome<T> {
    pub fn converged(&self) -> bool {
        self.status == PicardStatus::Converged
    }
}

type Traj<T> = Vec<(Spectrum<T, 2>, Spectrum<T, 3>)>;

/// `max_j (||δv_j||_{H^1} + ||δd_j||_{H^2})`, the sup-in-time proxy of the solution-space
/// distance.
fn distance<T: Real>(a: &Traj<T>, b: &Traj<T>) -> f64 {
    a.iter()
        .zip(b)
        .map(|((va, da), (vb, db))| {
            let mut dv = va.clone();
            dv.axpy(-T::one(), vb);
            let mut dd = da.clone();
            dd.axpy(-T::one(), db);
            (ops::h1_sq_spec(&dv).sqrt() + ops::h2_sq_spec(&dd).sqrt()).to_f64_lossy()
        })
        .fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x) })
}

pub fn picard_solve<T: Real>(
    s0: &State<T>,
    cfg: &PicardConfig,
    forcing: &ForcingSpec,
    pot: &PotentialSpec<T>,
) -> Result<PicardOutcome<T>> {
    cfg.validate()?;
    let grid = s0.grid().clone();
    let (nsteps, last) = step_plan(cfg.horizon, cfg.dt);
    let times: Vec<f64> = (0..=nsteps)
        .map(|j| if j == nsteps { s0.t + cfg.horizon } else { s0.t + j as f64 * cfg.dt })
        .collect();
    let e_full = integrating_factor(&grid, cfg.dt);
    let e_last = integrating_factor(&grid, last);
    let forcing_samples = times
        .iter()
        .map(|&t| forcing_at(forcing, &grid, t))
        .collect::<Result<Vec<_>>>()?;

    let v0 = s0.v.spectrum();
    let d0 = s0.d.spectrum();
    let mut iterate: Traj<T> = vec![(v0.clone(), d0.clone()); nsteps + 1];
    let mut distances = Vec::new();
    let mut factors = Vec::new();
    let mut status = PicardStatus::Diverged;
    let mut iterations = 0;

    for it in 1..=cfg.max_iters {
        iterations = it;
        let nl: Vec<(Spectrum<T, 2>, Spectrum<T, 3>)> = iterate
            .iter()
            .zip(&forcing_samples)
            .map(|((vh, dh), (f, g))| {
                let b = rhs::evaluate(vh, dh, f.as_ref(), g.as_ref(), pot, cfg.dealias);
                (b.fv, b.gd)
            })
            .collect();
        let mut next: Traj<T> = Vec::with_capacity(nsteps + 1);
        next.push((v0.clone(), d0.clone()));
        for j in 0..nsteps {
            let (h, e) = if j + 1 == nsteps { (last, &e_last) } else { (cfg.dt, &e_full) };
            let half = T::lit(0.5 * h);
            let (vj, dj) = &next[j];
            let mut v = vj.clone();
            v.axpy(half, &nl[j].0);
            apply_factor(&mut v, e);
            v.axpy(half, &nl[j + 1].0);
            let mut d = dj.clone();
            d.axpy(half, &nl[j].1);
            apply_factor(&mut d, e);
            d.axpy(half, &nl[j + 1].1);
            next.push((v, d));
        }
        let dist = distance(&next, &iterate);
        if let Some(&prev) = distances.last() {
            factors.push(if prev > 0.0 { dist / prev } else { 0.0 });
        }
        distances.push(dist);
        iterate = next;
        if !dist.is_finite() || dist > 1e150 {
            log::warn!("Picard iterates blew up at sweep {it}");
            break;
        }
        if dist < cfg.tol {
            status = PicardStatus::Converged;
            break;
        }
    }
    if status == PicardStatus::Diverged {
        log::warn!(
            "Picard iteration did not converge in {iterations} sweeps on T0 = {} (last distance {:e})",
            cfg.horizon,
            distances.last().copied().unwrap_or(f64::NAN)
        );
    }

    let trajectory = iterate
        .into_iter()
        .zip(&times)
        .map(|((vh, dh), &t)| State {
            v: vh.inverse(),
            d: dh.inverse(),
            t,
        })
        .collect();
    Ok(PicardOutcome {
        status,
        trajectory,
        distances,
        factors,
        iterations,
    })
}
