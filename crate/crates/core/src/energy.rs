//! Global energy, dissipation, forcing work and the running energy budget.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::VectorField3;
use crate::forcing::ForcingSpec;
use crate::ops;
use crate::potential::{cross3, PotentialSpec};
use crate::rhs;
use crate::scalar::Real;
use crate::state::State;

/// One row of the energy log. Instantaneous quantities are filled by [`global_energy`],
/// cumulative ones (`residual_eq`, `slack_ineq`, `psi`, `xi`) by [`BudgetTracker`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub elastic: f64,
    pub anisotropic: f64,
    /// `||grad v||^2`
    pub diss_v: f64,
    /// `||R(d)||^2`
    pub diss_r: f64,
    /// `<f, v>`
    pub work_f: f64,
    /// Work of the director forcing against the tension, `-<d × g, R(d)>` for the
    /// `+ d × g` sign convention of the director equation.
    pub work_g: f64,
    /// `½(||f||_{H^-1}^2 + ||g||^2)`
    pub psi_rate: f64,
    /// `½(||f||^2 + ||g||_{H^1}^2)`
    pub xi_rate: f64,
    pub residual_eq: f64,
    pub slack_ineq: f64,
    pub psi: f64,
    pub xi: f64,
    pub er_sup: f64,
    pub er_argmax: (f64, f64),
    pub detector_fired: bool,
}

pub const CSV_HEADER: &str = "t,E,kinetic,elastic,anisotropic,diss_v,diss_R,work_f,work_g,residual_eq,slack_ineq,Psi,Xi,ER_sup,ER_argmax_x,ER_argmax_y,detector_fired";

impl EnergyReport {
    /// CSV row matching [`CSV_HEADER`]. Shortest round-trip float formatting keeps the
    /// output reproducible bit for bit.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.energy,
            self.kinetic,
            self.elastic,
            self.anisotropic,
            self.diss_v,
            self.diss_r,
            self.work_f,
            self.work_g,
            self.residual_eq,
            self.slack_ineq,
            self.psi,
            self.xi,
            self.er_sup,
            self.er_argmax.0,
            self.er_argmax.1,
            u8::from(self.detector_fired)
        )
    }
}

/// `\int phi(d)`.
pub fn anisotropic_energy<T: Real>(d: &VectorField3<T>, pot: &PotentialSpec<T>) -> T {
    if pot.is_none() {
        return T::zero();
    }
    let g = d.grid();
    (0..g.len()).fold(T::zero(), |a, idx| a + pot.phi(d.at(idx))) * g.cell_area()
}

/// `E = ½(||v||^2 + ||grad d||^2) + \int phi(d)`.
pub fn energy<T: Real>(s: &State<T>, pot: &PotentialSpec<T>) -> f64 {
    let kinetic = T::lit(0.5) * ops::l2_sq(&s.v);
    let elastic = T::lit(0.5) * ops::h1_semi_sq_spec(&s.d.spectrum());
    (kinetic + elastic + anisotropic_energy(&s.d, pot)).to_f64_lossy()
}

/// Instantaneous energy, dissipation and forcing quantities at `s.t`.
pub fn global_energy<T: Real>(
    s: &State<T>,
    pot: &PotentialSpec<T>,
    forcing: &ForcingSpec,
    dealias: bool,
) -> Result<EnergyReport> {
    let grid = s.grid();
    let vh = s.v.spectrum();
    let dh = s.d.spectrum();
    let half = T::lit(0.5);
    let kinetic = half * ops::l2_sq(&s.v);
    let elastic = half * ops::h1_semi_sq_spec(&dh);
    let anisotropic = anisotropic_energy(&s.d, pot);
    let diss_v = ops::h1_semi_sq_spec(&vh);
    let r = rhs::tension(&s.d, pot, dealias);
    let diss_r = ops::l2_sq(&r);

    let (mut work_f, mut work_g, mut psi_rate, mut xi_rate) = (T::zero(), T::zero(), T::zero(), T::zero());
    if !forcing.f.is_zero() {
        let f = forcing.f_at(grid, s.t)?;
        let fh = f.spectrum();
        let mean = f.mean();
        if mean.iter().any(|m| m.abs() > T::lit(1e-12)) {
            log::warn!("forcing f has nonzero mean {mean:?} at t = {}; dropped from the H^-1 budget", s.t);
        }
        work_f = f.inner(&s.v);
        psi_rate = psi_rate + half * ops::h_minus1_sq_spec(&fh);
        xi_rate = xi_rate + half * ops::l2_sq(&f);
    }
    if !forcing.g.is_zero() {
        let g = forcing.g_at(grid, s.t)?;
        let mut dxg = g.clone();
        for idx in 0..grid.len() {
            dxg.set(idx, cross3(s.d.at(idx), g.at(idx)));
        }
        work_g = -dxg.inner(&r);
        psi_rate = psi_rate + half * ops::l2_sq(&g);
        xi_rate = xi_rate + half * ops::h1_sq_spec(&g.spectrum());
    }

    let f = |x: T| x.to_f64_lossy();
    Ok(EnergyReport {
        t: s.t,
        energy: f(kinetic + elastic + anisotropic),
        kinetic: f(kinetic),
        elastic: f(elastic),
        anisotropic: f(anisotropic),
        diss_v: f(diss_v),
        diss_r: f(diss_r),
        work_f: f(work_f),
        work_g: f(work_g),
        psi_rate: f(psi_rate),
        xi_rate: f(xi_rate),
        ..Default::default()
    })
}

/// Running trapezoid accumulation of the energy budget from the first report `s` to
/// the latest one `t`.
///
/// * equality residual `|E(t) - E(s) + \int (diss - work)| / (t - s)`: zero for the
///   exact solution, `O(dt^2)` for the discrete one;
/// * inequality slack `E(s) + Psi(s,t) - E(t) - ½ \int diss`: nonnegative once Young's
///   inequality absorbs the work terms.
#[derive(Clone, Debug)]
pub struct BudgetTracker {
    start: Option<(f64, f64)>,
    prev: Option<EnergyReport>,
    int_eq: f64,
    int_diss: f64,
    psi: f64,
    xi: f64,
    /// Largest `|E(t) - E(s) + \int(diss - work)|` so far.
    pub max_abs_residual: f64,
    pub min_slack: f64,
}

impl Default for BudgetTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl BudgetTracker {
    pub fn new() -> Self {
        Self {
            start: None,
            prev: None,
            int_eq: 0.0,
            int_diss: 0.0,
            psi: 0.0,
            xi: 0.0,
            max_abs_residual: 0.0,
            min_slack: f64::INFINITY,
        }
    }

    /// Fills the cumulative columns of `r` and folds it into the running integrals.
    pub fn push(&mut self, r: &mut EnergyReport) {
        let eq_rate = |r: &EnergyReport| r.diss_v + r.diss_r - r.work_f - r.work_g;
        let diss = |r: &EnergyReport| r.diss_v + r.diss_r;
        let (t0, e0) = *self.start.get_or_insert((r.t, r.energy));
        if let Some(p) = &self.prev {
            let h = r.t - p.t;
            self.int_eq += 0.5 * h * (eq_rate(p) + eq_rate(r));
            self.int_diss += 0.5 * h * (diss(p) + diss(r));
            self.psi += 0.5 * h * (p.psi_rate + r.psi_rate);
            self.xi += 0.5 * h * (p.xi_rate + r.xi_rate);
        }
        let abs_res = (r.energy - e0 + self.int_eq).abs();
        let span = r.t - t0;
        r.residual_eq = if span > 0.0 { abs_res / span } else { 0.0 };
        r.slack_ineq = e0 + self.psi - r.energy - 0.5 * self.int_diss;
        r.psi = self.psi;
        r.xi = self.xi;
        self.max_abs_residual = self.max_abs_residual.max(abs_res);
        self.min_slack = self.min_slack.min(r.slack_ineq);
        self.prev = Some(r.clone());
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BudgetSummary {
    /// Equality residual at the last report divided by the interval length.
    pub residual_per_time: f64,
    /// Largest absolute equality residual along the interval.
    pub max_abs_residual: f64,
    /// Smallest inequality slack along the interval.
    pub min_slack: f64,
    /// `min_slack < -10 * max_abs_residual`, with a roundoff floor.
    pub violated: bool,
}

/// Budget over a sequence of instantaneous reports (cumulative columns recomputed).
pub fn budget_residual(reports: &[EnergyReport]) -> BudgetSummary {
    let mut tracker = BudgetTracker::new();
    let mut last = 0.0;
    for r in reports {
        let mut r = r.clone();
        tracker.push(&mut r);
        last = r.residual_eq;
    }
    let min_slack = if reports.is_empty() { 0.0 } else { tracker.min_slack };
    let scale = reports.iter().map(|r| r.energy.abs()).fold(0.0, f64::max);
    BudgetSummary {
        residual_per_time: last,
        max_abs_residual: tracker.max_abs_residual,
        min_slack,
        violated: min_slack < -(10.0 * tracker.max_abs_residual).max(1e-12 * (1.0 + scale)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::scenario::{scenario_build, ScenarioParams};
    use std::f64::consts::{PI, TAU};

    #[test]
    fn taylor_green_energy() {
        let g = TorusGrid::<f64>::new(32, TAU).unwrap();
        let s = scenario_build("taylor_green", &ScenarioParams::default(), &g, 0).unwrap().state;
        let r = global_energy(&s, &PotentialSpec::none(), &ForcingSpec::zero(), true).unwrap();
        assert!((r.energy - PI * PI).abs() < 1e-11);
        assert!((r.diss_v - 4.0 * PI * PI).abs() < 1e-10);
        assert_eq!(r.elastic, 0.0);
        assert_eq!(r.energy, r.kinetic + r.elastic + r.anisotropic);
    }

    #[test]
    fn magnetic_constant_director_energy() {
        let g = TorusGrid::<f64>::new(16, TAU).unwrap();
        let pot = PotentialSpec::magnetic([0.0, 0.0, 1.0]);
        let p = ScenarioParams { director: Some([1.0, 0.0, 0.0]), ..Default::default() };
        let s = scenario_build("zero", &p, &g, 0).unwrap().state;
        let r = global_energy(&s, &pot, &ForcingSpec::zero(), true).unwrap();
        assert!((r.energy - 2.0 * PI * PI).abs() < 1e-12);
        let p = ScenarioParams { director: Some([0.0, 0.0, 1.0]), ..Default::default() };
        let s = scenario_build("zero", &p, &g, 0).unwrap().state;
        assert_eq!(global_energy(&s, &pot, &ForcingSpec::zero(), true).unwrap().energy, 0.0);
    }

    #[test]
    fn zero_budget_is_zero() {
        let reports: Vec<EnergyReport> = (0..5).map(|i| EnergyReport { t: i as f64 * 0.1, ..Default::default() }).collect();
        let b = budget_residual(&reports);
        assert_eq!(b.residual_per_time, 0.0);
        assert_eq!(b.min_slack, 0.0);
        assert!(!b.violated);
    }

    #[test]
    fn exact_exponential_budget() {
        // E = e^{-t} with diss = e^{-t}: the residual is the trapezoid error alone
        let reports: Vec<EnergyReport> = (0..=100)
            .map(|i| {
                let t = i as f64 * 0.01;
                EnergyReport { t, energy: (-t).exp(), diss_v: (-t).exp(), ..Default::default() }
            })
            .collect();
        let b = budget_residual(&reports);
        assert!(b.residual_per_time < 1e-5, "{b:?}");
        assert!(b.min_slack >= 0.0);
    }
}
