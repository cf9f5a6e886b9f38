//! A priori estimate quantities and the terms of the localized energy inequality,
//! evaluated along stored trajectories.

use std::sync::Arc;

use serde::Serialize;

use crate::diagnostics::recover_pressure;
use crate::energy;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField2, VectorField3};
use crate::forcing::ForcingSpec;
use crate::grid::TorusGrid;
use crate::ops;
use crate::potential::{norm3, PotentialSpec};
use crate::rhs;
use crate::scalar::Real;
use crate::state::State;

fn trapezoid(times: &[f64], vals: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(vals.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Integrated and supremal norms from the a priori estimates, together with the
/// ratios of each left-hand side to its bracketed right-hand side with every constant
/// set to one. The ratios are emitted for offline fitting; nothing is asserted about
/// them.
#[derive(Clone, Debug, Serialize)]
pub struct AprioriReport {
    pub t_end: f64,
    pub e0: f64,
    pub psi: f64,
    pub xi: f64,
    pub sigma0: f64,
    /// `\int ||Δd||^2`
    pub int_lap_d: f64,
    /// `\int (||v||_{L^4}^4 + ||grad d||_{L^4}^4)`
    pub int_l4: f64,
    /// `sup (||grad v||^2 + ||Δd||^2)`
    pub sup_higher: f64,
    /// `\int (||A v||^2 + ||grad Δd||^2)`
    pub int_top: f64,
    /// `\int (||grad d||_{L^4}^4 + ||v||_{L^4}^4 + ||grad d||_{L^4}^2 + ||v||_{L^4}^2)`
    pub int_gronwall: f64,
    pub ratio_lap_d: f64,
    pub ratio_l4: f64,
    pub ratio_higher: f64,
    /// `(t, ||grad v||^2 + ||Δd||^2)` per slice.
    pub higher_series: Vec<(f64, f64)>,
}

impl AprioriReport {
    pub fn all_finite(&self) -> bool {
        [
            self.e0,
            self.psi,
            self.xi,
            self.sigma0,
            self.int_lap_d,
            self.int_l4,
            self.sup_higher,
            self.int_top,
            self.int_gronwall,
            self.ratio_lap_d,
            self.ratio_l4,
            self.ratio_higher,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `epsilon` and `r` are the local-energy threshold parameters entering the brackets.
pub fn apriori_report<T: Real>(
    traj: &[State<T>],
    forcing: &ForcingSpec,
    pot: &PotentialSpec<T>,
    epsilon: f64,
    r: f64,
    dealias: bool,
) -> Result<AprioriReport> {
    let first = traj.first().ok_or_else(|| Error::param("apriori", "empty trajectory"))?;
    let times: Vec<f64> = traj.iter().map(|s| s.t).collect();
    let mut lap_d = Vec::new();
    let mut l4 = Vec::new();
    let mut higher = Vec::new();
    let mut top = Vec::new();
    let mut gron = Vec::new();
    let mut tracker = energy::BudgetTracker::new();
    let mut e0 = 0.0;
    for (i, s) in traj.iter().enumerate() {
        let vh = s.v.spectrum();
        let dh = s.d.spectrum();
        let ld = ops::laplacian_sq_spec(&dh).to_f64_lossy();
        let gv = ops::h1_semi_sq_spec(&vh).to_f64_lossy();
        let v4 = ops::l4_pow4(&s.v).to_f64_lossy();
        let g2 = ops::grad3_spec(&dh).squared_norm();
        let gd4 = ops::l2_sq(&g2).to_f64_lossy();
        lap_d.push(ld);
        l4.push(v4 + gd4);
        higher.push(gv + ld);
        top.push((ops::laplacian_sq_spec(&vh) + ops::grad_laplacian_sq_spec(&dh)).to_f64_lossy());
        gron.push(gd4 + v4 + gd4.sqrt() + v4.sqrt());
        let mut rep = energy::global_energy(s, pot, forcing, dealias)?;
        tracker.push(&mut rep);
        if i == 0 {
            e0 = rep.energy;
        }
    }
    let t_span = times.last().copied().unwrap_or(first.t) - first.t;
    let psi = tracker.psi();
    let xi = tracker.xi();
    let int_lap_d = trapezoid(&times, &lap_d);
    let int_l4 = trapezoid(&times, &l4);
    let sup_higher = higher.iter().copied().fold(0.0, f64::max);
    let int_top = trapezoid(&times, &top);
    let int_gronwall = trapezoid(&times, &gron);
    let sigma0 = e0 + higher[0] + psi + xi + (e0 + 1.0) * xi;
    let bracket = e0 + psi + (1.0 + 2.0 * epsilon * epsilon / (r * r)) * t_span;
    Ok(AprioriReport {
        t_end: first.t + t_span,
        e0,
        psi,
        xi,
        sigma0,
        int_lap_d,
        int_l4,
        sup_higher,
        int_top,
        int_gronwall,
        ratio_lap_d: ratio(int_lap_d, bracket),
        ratio_l4: ratio(int_l4, epsilon * epsilon * bracket),
        ratio_higher: ratio(sup_higher + 2.0 * int_top, sigma0 * (xi + int_gronwall).exp()),
        higher_series: times.iter().copied().zip(higher).collect(),
    })
}

/// Discretized cutoff `phi_c` with `1_{B(x0,R)} <= phi_c <= 1_{B(x0,2R)}` and
/// `|grad phi_c| <= c4 / R`.
#[derive(Clone, Debug)]
pub struct Cutoff<T: Real> {
    pub center: [f64; 2],
    pub r: f64,
    pub values: ScalarField<T>,
    pub grad: VectorField2<T>,
}

fn periodic_offset(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

/// Smooth step from 1 at `u <= 0` to 0 at `u >= 1`, and its derivative.
fn smooth_step(u: f64) -> (f64, f64) {
    if u <= 0.0 {
        return (1.0, 0.0);
    }
    if u >= 1.0 {
        return (0.0, 0.0);
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    let s = b / (a + b);
    let ds = -a * b * (1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u))) / ((a + b) * (a + b));
    (s, ds)
}

impl<T: Real> Cutoff<T> {
    /// Radial bump equal to 1 on `B(x0, R)` and vanishing outside `B(x0, 2R)`.
    pub fn bump(grid: &Arc<TorusGrid<T>>, center: [f64; 2], r: f64) -> Result<Self> {
        let l = grid.length().to_f64_lossy();
        let n = grid.n();
        let mut vals = vec![T::zero(); grid.len()];
        let mut gx = vec![T::zero(); grid.len()];
        let mut gy = vec![T::zero(); grid.len()];
        for j in 0..n {
            for i in 0..n {
                let dx = periodic_offset(grid.coord(i).to_f64_lossy() - center[0], l);
                let dy = periodic_offset(grid.coord(j).to_f64_lossy() - center[1], l);
                let rho = (dx * dx + dy * dy).sqrt();
                let (s, ds) = smooth_step((rho - r) / r);
                let idx = grid.index(i, j);
                vals[idx] = T::lit(s);
                if rho > 0.0 {
                    gx[idx] = T::lit(ds / r * dx / rho);
                    gy[idx] = T::lit(ds / r * dy / rho);
                }
            }
        }
        let c = Self {
            center,
            r,
            values: ScalarField::from_values(grid, vals)?,
            grad: VectorField2::from_components(grid, [gx, gy])?,
        };
        c.validate(4.0)?;
        Ok(c)
    }

    /// User-supplied cutoff samples; the gradient is taken spectrally.
    pub fn from_samples(values: ScalarField<T>, center: [f64; 2], r: f64, c4: f64) -> Result<Self> {
        let grad = ops::grad(&values);
        let c = Self { center, r, values, grad };
        c.validate(c4)?;
        Ok(c)
    }

    /// Checks `1_{B(R)} <= phi_c <= 1_{B(2R)}` at grid points and `|grad phi_c| <= c4/R`.
    pub fn validate(&self, c4: f64) -> Result<()> {
        let grid = self.values.grid();
        let l = grid.length().to_f64_lossy();
        if !(self.r > 0.0 && 4.0 * self.r < l) {
            return Err(Error::param("cutoff.R", "need 0 < 2R < L/2"));
        }
        let n = grid.n();
        let tol = 1e-12;
        for j in 0..n {
            for i in 0..n {
                let idx = grid.index(i, j);
                let dx = periodic_offset(grid.coord(i).to_f64_lossy() - self.center[0], l);
                let dy = periodic_offset(grid.coord(j).to_f64_lossy() - self.center[1], l);
                let rho = (dx * dx + dy * dy).sqrt();
                let v = self.values.values()[idx].to_f64_lossy();
                let upper = if rho < 2.0 * self.r { 1.0 } else { 0.0 };
                let lower = if rho <= self.r { 1.0 } else { 0.0 };
                if v < lower - tol || v > upper + tol {
                    return Err(Error::param(
                        "cutoff",
                        format!("value {v} at distance {rho} violates the ball bounds"),
                    ));
                }
                let [a, b] = self.grad.at(idx);
                let gn = (a * a + b * b).sqrt().to_f64_lossy();
                if gn > c4 / self.r + tol {
                    return Err(Error::param("cutoff", format!("|grad phi_c| = {gn} exceeds c4/R")));
                }
            }
        }
        Ok(())
    }
}

/// Every term of the localized energy inequality over `[s, t]`, integrated in time by
/// the trapezoid rule over the trajectory slices.
#[derive(Clone, Debug, Default, Serialize)]
pub struct LocalInequalityTerms {
    /// `E_phi(t) - E_phi(s)`
    pub energy_change: f64,
    /// `\int\int phi (|grad v|^2 + |R(d)|^2)`
    pub dissipation: f64,
    /// `\int\int |grad phi| ½|grad d|^2 |v|`
    pub grad_d_sq_v: f64,
    /// `\int\int |grad phi| |d_t d| |grad d|`
    pub dtd_grad_d: f64,
    /// `\int\int |grad phi| phi(d) |v|`
    pub phi_v: f64,
    /// `\int\int |grad phi| |v|^3`
    pub v_cubed: f64,
    /// `\int\int |grad phi| |grad v| |v|`
    pub grad_v_v: f64,
    /// `\int\int |grad phi| |p - p_mean| |v|`
    pub pressure_v: f64,
    /// `\int\int |grad phi| |g| |grad d|`
    pub g_grad_d: f64,
    /// `\int\int phi |d| |grad g| |grad d|`
    pub d_grad_g_grad_d: f64,
    /// `\int\int phi |d| |g| |phi'(d)|`
    pub d_g_phi_prime: f64,
    /// `\int\int phi |f| |v|`
    pub f_v: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub margin: f64,
}

/// Pointwise Frobenius norm of the gradient of each component, summed in square.
fn grad_frobenius<T: Real, const C: usize>(f: &crate::field::Field<T, C>) -> ScalarField<T> {
    let s = f.spectrum();
    let dx = ops::ddx_spec(&s).inverse();
    let dy = ops::ddy_spec(&s).inverse();
    let mut out = ScalarField::zeros(f.grid());
    for (idx, o) in out.values_mut().iter_mut().enumerate() {
        let a = dx.at(idx);
        let b = dy.at(idx);
        *o = (0..C).fold(T::zero(), |acc, c| acc + a[c] * a[c] + b[c] * b[c]).sqrt();
    }
    out
}

struct SliceTerms {
    e_phi: f64,
    vals: [f64; 11],
}

fn slice_terms<T: Real>(
    s: &State<T>,
    cutoff: &Cutoff<T>,
    forcing: &ForcingSpec,
    pot: &PotentialSpec<T>,
    dealias: bool,
) -> Result<SliceTerms> {
    let grid = s.grid().clone();
    let f = if forcing.f.is_zero() { None } else { Some(forcing.f_at(&grid, s.t)?) };
    let g = if forcing.g.is_zero() { None } else { Some(forcing.g_at(&grid, s.t)?) };
    let dh = s.d.spectrum();
    let grad_d = ops::grad3_spec(&dh).squared_norm();
    let grad_v = grad_frobenius(&s.v);
    let r = rhs::tension(&s.d, pot, dealias);
    let mut dtd = rhs::director_rhs_spec(&s.v.spectrum(), &dh, g.as_ref(), pot, dealias);
    dtd.axpy(T::one(), &ops::laplacian_spec(&dh));
    let dtd: VectorField3<T> = dtd.inverse();
    let pressure = recover_pressure(s, forcing, dealias)?.p;
    let p_mean = pressure.mean()[0];
    let grad_g = g.as_ref().map(grad_frobenius);

    let w = grid.cell_area().to_f64_lossy();
    let mut acc = [0.0f64; 11];
    let mut e_phi = 0.0;
    for idx in 0..grid.len() {
        let phi_c = cutoff.values.values()[idx].to_f64_lossy();
        let [gx, gy] = cutoff.grad.at(idx);
        let gphi = (gx * gx + gy * gy).sqrt().to_f64_lossy();
        let [vx, vy] = s.v.at(idx);
        let v = (vx * vx + vy * vy).sqrt().to_f64_lossy();
        let gd2 = grad_d.values()[idx].to_f64_lossy();
        let gd = gd2.sqrt();
        let d = s.d.at(idx);
        let dn = norm3(d).to_f64_lossy();
        let phi_d = if pot.is_none() { 0.0 } else { pot.phi(d).to_f64_lossy() };
        let gv = grad_v.values()[idx].to_f64_lossy();
        let rr = norm3(r.at(idx)).to_f64_lossy();
        e_phi += 0.5 * phi_c * (v * v + gd2 + 2.0 * phi_d);
        acc[0] += phi_c * (gv * gv + rr * rr);
        acc[1] += gphi * 0.5 * gd2 * v;
        acc[2] += gphi * norm3(dtd.at(idx)).to_f64_lossy() * gd;
        acc[3] += gphi * phi_d * v;
        acc[4] += gphi * v * v * v;
        acc[5] += gphi * gv * v;
        acc[6] += gphi * (pressure.values()[idx] - p_mean).abs().to_f64_lossy() * v;
        if let Some(g) = &g {
            let gn = norm3(g.at(idx)).to_f64_lossy();
            acc[7] += gphi * gn * gd;
            acc[8] += phi_c.abs() * dn * grad_g.as_ref().map_or(0.0, |x| x.values()[idx].to_f64_lossy()) * gd;
            if !pot.is_none() {
                acc[9] += phi_c.abs() * dn * gn * norm3(pot.phi_prime(d)).to_f64_lossy();
            }
        }
        if let Some(f) = &f {
            let [fx, fy] = f.at(idx);
            acc[10] += phi_c.abs() * (fx * fx + fy * fy).sqrt().to_f64_lossy() * v;
        }
    }
    Ok(SliceTerms {
        e_phi: e_phi * w,
        vals: acc.map(|a| a * w),
    })
}

/// Evaluates both sides of the localized energy inequality between the first and last
/// slice of `traj`. `d_t d` is taken from the equation, not from differences of slices.
pub fn local_energy_inequality_terms<T: Real>(
    traj: &[State<T>],
    cutoff: &Cutoff<T>,
    forcing: &ForcingSpec,
    pot: &PotentialSpec<T>,
    dealias: bool,
) -> Result<LocalInequalityTerms> {
    if traj.is_empty() {
        return Err(Error::param("local_inequality", "empty trajectory"));
    }
    let slices = traj
        .iter()
        .map(|s| slice_terms(s, cutoff, forcing, pot, dealias))
        .collect::<Result<Vec<_>>>()?;
    let times: Vec<f64> = traj.iter().map(|s| s.t).collect();
    let int = |k: usize| trapezoid(&times, &slices.iter().map(|s| s.vals[k]).collect::<Vec<_>>());
    let mut t = LocalInequalityTerms {
        energy_change: slices.last().unwrap().e_phi - slices[0].e_phi,
        dissipation: int(0),
        grad_d_sq_v: int(1),
        dtd_grad_d: int(2),
        phi_v: int(3),
        v_cubed: int(4),
        grad_v_v: int(5),
        pressure_v: int(6),
        g_grad_d: int(7),
        d_grad_g_grad_d: int(8),
        d_g_phi_prime: int(9),
        f_v: int(10),
        ..Default::default()
    };
    t.lhs = t.energy_change + t.dissipation;
    t.rhs = t.grad_d_sq_v
        + t.dtd_grad_d
        + t.phi_v
        + t.v_cubed
        + t.grad_v_v
        + t.pressure_v
        + t.g_grad_d
        + t.d_grad_g_grad_d
        + t.d_g_phi_prime
        + t.f_v;
    t.margin = t.rhs - t.lhs;
    Ok(t)
}
