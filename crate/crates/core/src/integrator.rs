//! Integrating-factor time stepping with exact diffusion and explicit nonlinearity.
//!
//! For `u' = -|k|^2 u + N(u)` per mode, with `E = exp(-|k|^2 dt)`:
//!
//! * IF-Euler: `u1 = E (u0 + dt N(u0))`
//! * IF-Heun:  `u* = E (u0 + dt N(u0))`, `u1 = E (u0 + dt/2 N(u0)) + dt/2 N(u*)`

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Spectrum, VectorField2, VectorField3};
use crate::forcing::ForcingSpec;
use crate::grid::TorusGrid;
use crate::ops;
use crate::potential::PotentialSpec;
use crate::rhs;
use crate::scalar::Real;
use crate::state::{min_length, renormalize, sphere_defect, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    IfHeun,
    IfEuler,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintMode {
    Renormalize,
    TrackDrift,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfig {
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_constraint")]
    pub constraint_mode: ConstraintMode,
    #[serde(default = "default_true")]
    pub dealias: bool,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
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

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            scheme: Scheme::IfHeun,
            constraint_mode: ConstraintMode::Renormalize,
            dealias: true,
            cfl_safety: 0.5,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_constraint(mut self, mode: ConstraintMode) -> Self {
        self.constraint_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("stepper.dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::param("stepper.cfl_safety", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Advisory step bound `cfl_safety * min(dx / max|v|, dx^2 / pi^2)`.
pub fn advisory_dt<T: Real>(state: &State<T>, cfg: &StepperConfig) -> f64 {
    let dx = state.grid().dx().to_f64_lossy();
    let vmax = state.v.max_norm().to_f64_lossy();
    let diffusive = dx * dx / (std::f64::consts::PI * std::f64::consts::PI);
    let advective = if vmax > 0.0 { dx / vmax } else { f64::INFINITY };
    cfg.cfl_safety * advective.min(diffusive)
}

/// Per-mode integrating factors `exp(-|k|^2 h)`.
pub(crate) fn integrating_factor<T: Real>(grid: &TorusGrid<T>, h: f64) -> Vec<T> {
    (0..grid.len())
        .map(|idx| (-grid.k_squared(idx) * T::lit(h)).exp())
        .collect()
}

pub(crate) fn apply_factor<T: Real, const C: usize>(s: &mut Spectrum<T, C>, e: &[T]) {
    for c in 0..C {
        for (v, f) in s.comp_mut(c).iter_mut().zip(e) {
            *v = *v * *f;
        }
    }
}

struct Stage<T: Real> {
    fv: Spectrum<T, 2>,
    gd: Spectrum<T, 3>,
}

/// Forcing samples at time `t`, `None` when identically zero.
pub(crate) fn forcing_at<T: Real>(
    forcing: &ForcingSpec,
    grid: &Arc<TorusGrid<T>>,
    t: f64,
) -> Result<(Option<VectorField2<T>>, Option<VectorField3<T>>)> {
    let f = if forcing.f.is_zero() { None } else { Some(forcing.f_at(grid, t)?) };
    let g = if forcing.g.is_zero() { None } else { Some(forcing.g_at(grid, t)?) };
    Ok((f, g))
}

fn stage<T: Real>(
    vh: &Spectrum<T, 2>,
    dh: &Spectrum<T, 3>,
    t: f64,
    forcing: &ForcingSpec,
    pot: &PotentialSpec<T>,
    dealias: bool,
) -> Result<Stage<T>> {
    let (f, g) = forcing_at(forcing, vh.grid(), t)?;
    let b = rhs::evaluate(vh, dh, f.as_ref(), g.as_ref(), pot, dealias);
    Ok(Stage { fv: b.fv, gd: b.gd })
}

/// Advances one step of length `dt` (which may differ from `cfg.dt` for a final partial step).
pub fn step_with<T: Real>(
    s: &State<T>,
    cfg: &StepperConfig,
    dt: f64,
    forcing: &ForcingSpec,
    pot: &PotentialSpec<T>,
) -> Result<State<T>> {
    let e = integrating_factor(s.grid(), dt);
    step_with_factor(s, cfg, dt, &e, forcing, pot)
}

/// [`step_with`] with the integrating factor `exp(-|k|^2 dt)` supplied by the caller.
fn step_with_factor<T: Real>(
    s: &State<T>,
    cfg: &StepperConfig,
    dt: f64,
    e: &[T],
    forcing: &ForcingSpec,
    pot: &PotentialSpec<T>,
) -> Result<State<T>> {
    let h = T::lit(dt);
    let half = T::lit(0.5 * dt);
    let vh = s.v.spectrum();
    let dh = s.d.spectrum();
    let k1 = stage(&vh, &dh, s.t, forcing, pot, cfg.dealias)?;

    let mut v1 = vh.clone();
    v1.axpy(h, &k1.fv);
    apply_factor(&mut v1, e);
    let mut d1 = dh.clone();
    d1.axpy(h, &k1.gd);
    apply_factor(&mut d1, e);

    let (v_new, d_new) = match cfg.scheme {
        Scheme::IfEuler => (v1, d1),
        Scheme::IfHeun => {
            let k2 = stage(&v1, &d1, s.t + dt, forcing, pot, cfg.dealias)?;
            let mut v2 = vh;
            v2.axpy(half, &k1.fv);
            apply_factor(&mut v2, e);
            v2.axpy(half, &k2.fv);
            let mut d2 = dh;
            d2.axpy(half, &k1.gd);
            apply_factor(&mut d2, e);
            d2.axpy(half, &k2.gd);
            (v2, d2)
        }
    };

    let t_new = s.t + dt;
    let mut v_new = ops::leray_spec(&v_new);
    v_new.zero_mean();
    let v = v_new.inverse();
    let mut d = d_new.inverse();
    let abort = |reason: String| Error::StepAborted { t: t_new, reason };
    if !v.is_finite() || !d.is_finite() {
        return Err(abort(format!(
            "non-finite state (max|v| = {}, max|d| = {})",
            v.max_abs(),
            d.max_abs()
        )));
    }
    let lmin = min_length(&d);
    if lmin < T::lit(0.5) {
        return Err(abort(format!("director length fell to {lmin} (< 0.5) before renormalization")));
    }
    if cfg.constraint_mode == ConstraintMode::Renormalize {
        renormalize(&mut d)?;
    }
    Ok(State { v, d, t: t_new })
}

pub fn step<T: Real>(
    s: &State<T>,
    cfg: &StepperConfig,
    forcing: &ForcingSpec,
    pot: &PotentialSpec<T>,
) -> Result<State<T>> {
    step_with(s, cfg, cfg.dt, forcing, pot)
}

/// What an observer asks the run loop to do next.
pub enum Control<T: Real> {
    Continue,
    Halt(String),
    /// Continue from a modified state (e.g. a renormalized restart).
    Replace(State<T>),
}

/// Hook invoked after every step (and once for the initial state, step 0).
pub trait Observer<T: Real> {
    fn observe(&mut self, step: usize, state: &State<T>) -> Result<Control<T>>;

    /// Called exactly once when the run ends, whatever the reason.
    fn finish(&mut self, _state: &State<T>) -> Result<()> {
        Ok(())
    }
}

/// In-memory trajectory sampled every `every` steps (the final state is always kept).
pub struct Recorder<T: Real> {
    pub every: usize,
    pub states: Vec<State<T>>,
}

impl<T: Real> Recorder<T> {
    pub fn new(every: usize) -> Self {
        Self {
            every: every.max(1),
            states: Vec::new(),
        }
    }
}

impl<T: Real> Observer<T> for Recorder<T> {
    fn observe(&mut self, step: usize, state: &State<T>) -> Result<Control<T>> {
        if step % self.every == 0 {
            self.states.push(state.clone());
        }
        Ok(Control::Continue)
    }

    fn finish(&mut self, state: &State<T>) -> Result<()> {
        if self.states.last().map(|s| s.t) != Some(state.t) {
            self.states.push(state.clone());
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum StopReason {
    Completed,
    Halted(String),
}

#[derive(Debug)]
pub struct RunOutcome<T: Real> {
    pub state: State<T>,
    pub steps: usize,
    pub stop: StopReason,
}

/// Number of steps covering `[0, horizon]` and the length of the last one.
pub fn step_plan(horizon: f64, dt: f64) -> (usize, f64) {
    if horizon <= 0.0 {
        return (0, dt);
    }
    let ratio = horizon / dt;
    let whole = ratio.round();
    if (ratio - whole).abs() < 1e-9 * ratio.max(1.0) {
        (whole as usize, dt)
    } else {
        let n = ratio.ceil() as usize;
        (n, horizon - (n - 1) as f64 * dt)
    }
}

/// Runs from `s0` for `horizon` time units, calling every observer after each step.
pub fn run<T: Real>(
    s0: State<T>,
    horizon: f64,
    cfg: &StepperConfig,
    forcing: &ForcingSpec,
    pot: &PotentialSpec<T>,
    observers: &mut [&mut dyn Observer<T>],
) -> Result<RunOutcome<T>> {
    cfg.validate()?;
    if horizon < 0.0 || !horizon.is_finite() {
        return Err(Error::param("stepper.T", "must be a non-negative finite horizon"));
    }
    let advisory = advisory_dt(&s0, cfg);
    if cfg.dt > advisory {
        log::warn!("dt = {} exceeds advisory bound {advisory:.3e}", cfg.dt);
    }
    let (nsteps, last_dt) = step_plan(horizon, cfg.dt);
    let mut state = s0;
    let mut stop = StopReason::Completed;
    let mut steps = 0;
    let e_full = integrating_factor(state.grid(), cfg.dt);
    let e_last = integrating_factor(state.grid(), last_dt);

    let result = (|| -> Result<()> {
        if let Some(reason) = notify(observers, 0, &mut state)? {
            stop = StopReason::Halted(reason);
            return Ok(());
        }
        for k in 1..=nsteps {
            let (dt, e) = if k == nsteps { (last_dt, &e_last) } else { (cfg.dt, &e_full) };
            let mut next = step_with_factor(&state, cfg, dt, e, forcing, pot)?;
            if k == nsteps {
                next.t = horizon;
            }
            state = next;
            steps = k;
            if let Some(reason) = notify(observers, k, &mut state)? {
                stop = StopReason::Halted(reason);
                return Ok(());
            }
        }
        Ok(())
    })();

    let mut flush = Ok(());
    for obs in observers.iter_mut() {
        if let Err(e) = obs.finish(&state) {
            flush = Err(e);
        }
    }
    result?;
    flush?;
    Ok(RunOutcome { state, steps, stop })
}

fn notify<T: Real>(
    observers: &mut [&mut dyn Observer<T>],
    step: usize,
    state: &mut State<T>,
) -> Result<Option<String>> {
    for obs in observers.iter_mut() {
        match obs.observe(step, state)? {
            Control::Continue => {}
            Control::Halt(reason) => return Ok(Some(reason)),
            Control::Replace(s) => *state = s,
        }
    }
    Ok(None)
}

/// One row of [`sphere_drift_probe`]: time step and `max_t max_x ||d| - 1|`.
#[derive(Clone, Copy, Debug)]
pub struct DriftRow {
    pub dt: f64,
    pub drift: f64,
}

#[derive(Clone, Debug)]
pub struct DriftTable {
    pub rows: Vec<DriftRow>,
    /// `log2(drift(dt_i) / drift(dt_{i+1}))` for consecutive rows (when `dt` halves).
    pub observed_orders: Vec<f64>,
}

/// Runs the same scenario at each `dt` and reports the sup-in-time sphere defect.
pub fn sphere_drift_probe<T: Real>(
    s0: &State<T>,
    horizon: f64,
    dt_list: &[f64],
    base: &StepperConfig,
    forcing: &ForcingSpec,
    pot: &PotentialSpec<T>,
) -> Result<DriftTable> {
    struct Drift(f64);
    impl<T: Real> Observer<T> for Drift {
        fn observe(&mut self, _: usize, s: &State<T>) -> Result<Control<T>> {
            self.0 = self.0.max(sphere_defect(&s.d).to_f64_lossy());
            Ok(Control::Continue)
        }
    }
    let mut rows = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        let cfg = StepperConfig { dt, ..*base };
        let mut probe = Drift(0.0);
        run(s0.clone(), horizon, &cfg, forcing, pot, &mut [&mut probe])?;
        rows.push(DriftRow { dt, drift: probe.0 });
    }
    let observed_orders = rows
        .windows(2)
        .map(|w| (w[0].drift / w[1].drift).ln() / (w[0].dt / w[1].dt).ln())
        .collect();
    Ok(DriftTable { rows, observed_orders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{scenario_build, ScenarioParams};
    use std::f64::consts::TAU;

    fn grid(n: usize) -> Arc<TorusGrid<f64>> {
        TorusGrid::new(n, TAU).unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = grid(16);
        let s = scenario_build::<f64>("zero", &ScenarioParams::default(), &g, 0).unwrap().state;
        let out = step(&s, &StepperConfig::new(0.01), &ForcingSpec::zero(), &PotentialSpec::none()).unwrap();
        assert_eq!(out.v.max_abs(), 0.0);
        assert!(out.d.sub(&s.d).max_abs() == 0.0);
        assert!((out.t - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_dt() {
        assert!(StepperConfig::new(0.0).validate().unwrap_err().to_string().contains("stepper.dt"));
        assert!(StepperConfig::new(-1.0).validate().is_err());
    }

    #[test]
    fn aborts_on_collapsed_director() {
        let g = grid(16);
        let mut s = scenario_build::<f64>("zero", &ScenarioParams::default(), &g, 0).unwrap().state;
        s.d = VectorField3::uniform(&g, [0.0, 0.0, 0.1]);
        let err = step(&s, &StepperConfig::new(0.01), &ForcingSpec::zero(), &PotentialSpec::none()).unwrap_err();
        assert!(matches!(err, Error::StepAborted { .. }), "{err}");
        s.v.comp_mut(0)[3] = f64::NAN;
        s.d = VectorField3::uniform(&g, [0.0, 0.0, 1.0]);
        assert!(step(&s, &StepperConfig::new(0.01), &ForcingSpec::zero(), &PotentialSpec::none()).is_err());
    }

    #[test]
    fn step_plan_handles_partial_steps() {
        assert_eq!(step_plan(1.0, 1e-3).0, 1000);
        let (n, last) = step_plan(1.0, 0.3);
        assert_eq!(n, 4);
        assert!((last - 0.1).abs() < 1e-12);
        assert_eq!(step_plan(0.0, 0.1).0, 0);
    }

    #[test]
    fn empty_horizon_records_initial_state() {
        let g = grid(8);
        let s = scenario_build::<f64>("zero", &ScenarioParams::default(), &g, 0).unwrap().state;
        let mut rec = Recorder::new(1);
        let out = run(s, 0.0, &StepperConfig::new(0.1), &ForcingSpec::zero(), &PotentialSpec::none(), &mut [&mut rec]).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(rec.states.len(), 1);
    }

    #[test]
    fn equilibrium_is_stationary() {
        let g = grid(16);
        let h = [0.3, -0.4, 1.2];
        let p = ScenarioParams { director: Some(h), ..Default::default() };
        let s = scenario_build::<f64>("zero", &p, &g, 0).unwrap().state;
        let pot = PotentialSpec::magnetic(h);
        let out = run(s.clone(), 1.0, &StepperConfig::new(0.01), &ForcingSpec::zero(), &pot, &mut []).unwrap();
        assert!(out.state.d.sub(&s.d).max_abs() < 1e-12);
        assert_eq!(out.state.v.max_abs(), 0.0);
    }
}
