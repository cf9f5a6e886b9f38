//! Localized energies on balls, the concentration detector and Struwe-type ratios.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy;
use crate::error::{Error, Result};
use crate::field::{Field, ScalarField, Spectrum};
use crate::grid::TorusGrid;
use crate::ops;
use crate::potential::PotentialSpec;
use crate::scalar::Real;
use crate::state::{renormalize, State};

/// `\int_0^x sqrt(r^2 - s^2) ds` for `0 <= x <= r`.
fn circle_primitive(x: f64, r: f64) -> f64 {
    let x = x.clamp(0.0, r);
    0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).clamp(-1.0, 1.0).asin())
}

/// Area of the disk `|p| < r` inside the quadrant rectangle `[0,a] x [0,b]`, extended
/// oddly in `a` and `b` so rectangle areas follow by inclusion-exclusion.
fn quadrant_area(a: f64, b: f64, r: f64) -> f64 {
    let sign = a.signum() * b.signum();
    let (a, b) = (a.abs(), b.abs());
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let xa = a.min(r);
    // below xb the disk is taller than b
    let xb = (r * r - b * b).max(0.0).sqrt().min(xa);
    sign * (b * xb + circle_primitive(xa, r) - circle_primitive(xb, r))
}

fn rect_disk_area(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    quadrant_area(x1, y1, r) - quadrant_area(x0, y1, r) - quadrant_area(x1, y0, r) + quadrant_area(x0, y0, r)
}

/// Exact overlap areas between the disk of radius `r` centred at the origin and every
/// grid cell (cells centred on grid points, periodic images included). Convolving a
/// sampled density with these weights integrates it over the ball with a cellwise
/// constant reconstruction, so constant densities are integrated exactly.
pub struct DiskKernel<T: Real> {
    pub radius: f64,
    spectrum: Spectrum<T, 1>,
    grid: Arc<TorusGrid<T>>,
}

impl<T: Real> DiskKernel<T> {
    pub fn new(grid: &Arc<TorusGrid<T>>, radius: f64) -> Result<Self> {
        let l = grid.length().to_f64_lossy();
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("monitors.R", format!("ball radius must be positive, got {radius}")));
        }
        if radius >= 0.5 * l {
            return Err(Error::param(
                "monitors.R",
                format!("ball radius {radius} reaches half the period {}; the ball would wrap", 0.5 * l),
            ));
        }
        let n = grid.n();
        let h = grid.dx().to_f64_lossy();
        let mut w = vec![T::zero(); grid.len()];
        for j in 0..n {
            for i in 0..n {
                let mut area = 0.0;
                for ox in [i as f64 * h, i as f64 * h - l] {
                    for oy in [j as f64 * h, j as f64 * h - l] {
                        area += rect_disk_area(ox - 0.5 * h, ox + 0.5 * h, oy - 0.5 * h, oy + 0.5 * h, radius);
                    }
                }
                w[grid.index(i, j)] = T::lit(area);
            }
        }
        let field = ScalarField::from_values(grid, w)?;
        Ok(Self {
            radius,
            spectrum: field.spectrum(),
            grid: grid.clone(),
        })
    }

    /// Total weight, equal to `pi r^2` up to roundoff.
    pub fn area(&self) -> f64 {
        self.spectrum.comp(0)[0].re.to_f64_lossy()
    }

    /// `x -> \int_{B(x, r)} rho`.
    pub fn ball_integrals(&self, rho: &ScalarField<T>) -> ScalarField<T> {
        assert_eq!(rho.grid().n(), self.grid.n(), "kernel built for another grid");
        let k = self.spectrum.comp(0);
        rho.spectrum().map_modes(|idx, z| z * k[idx]).inverse()
    }
}

/// Largest value and its index; ties go to the smallest flat grid index.
pub fn argmax<T: Real>(f: &ScalarField<T>) -> (T, usize) {
    let mut best = (T::neg_infinity(), 0);
    for (idx, &v) in f.values().iter().enumerate() {
        if v > best.0 {
            best = (v, idx);
        }
    }
    best
}

/// Pointwise local energy density `½(|v|^2 + |grad d|^2) + phi(d)`.
pub fn energy_density<T: Real>(s: &State<T>, pot: &PotentialSpec<T>) -> ScalarField<T> {
    let grad2 = ops::grad3(&s.d).squared_norm();
    let half = T::lit(0.5);
    let mut rho = grad2;
    for (idx, r) in rho.values_mut().iter_mut().enumerate() {
        let [a, b] = s.v.at(idx);
        *r = half * (a * a + b * b + *r) + if pot.is_none() { T::zero() } else { pot.phi(s.d.at(idx)) };
    }
    rho
}

#[derive(Clone, Debug)]
pub struct LocalEnergyProfile<T: Real> {
    /// Nominal radius `R`.
    pub r: f64,
    /// Radius of the integration ball, `radius_multiplier * R`.
    pub ball_radius: f64,
    /// Ball integral centred at each grid point.
    pub values: ScalarField<T>,
    pub sup_value: f64,
    pub argmax_index: usize,
    pub argmax: (f64, f64),
}

/// Sup over grid centres of `½ \int_{B(x, m R)} (|v|^2 + |grad d|^2 + 2 phi(d))` with
/// `m = radius_multiplier` (2 for the usual convention).
pub fn local_energy<T: Real>(
    s: &State<T>,
    pot: &PotentialSpec<T>,
    r: f64,
    radius_multiplier: f64,
) -> Result<LocalEnergyProfile<T>> {
    let kernel = DiskKernel::new(s.grid(), radius_multiplier * r)?;
    Ok(local_energy_with(s, pot, r, &kernel))
}

/// [`local_energy`] with a prebuilt kernel (reused across steps by the run monitor).
pub fn local_energy_with<T: Real>(
    s: &State<T>,
    pot: &PotentialSpec<T>,
    r: f64,
    kernel: &DiskKernel<T>,
) -> LocalEnergyProfile<T> {
    let values = kernel.ball_integrals(&energy_density(s, pot));
    let (sup, idx) = argmax(&values);
    let g = s.grid();
    let n = g.n();
    LocalEnergyProfile {
        r,
        ball_radius: kernel.radius,
        sup_value: sup.to_f64_lossy(),
        argmax_index: idx,
        argmax: (g.coord(idx % n).to_f64_lossy(), g.coord(idx / n).to_f64_lossy()),
        values,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorPolicy {
    Halt,
    Log,
    RestartRenormalized,
}

/// JSON-lines record of a threshold crossing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FireEvent {
    pub t: f64,
    pub event: FireTag,
    #[serde(rename = "ER_sup")]
    pub er_sup: f64,
    pub eps: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FireTag {
    Fire,
}

/// Energy before and after a renormalized restart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyDrop {
    pub t: f64,
    pub e_before: f64,
    pub e_after: f64,
    /// Whether `|d| >= 1` held everywhere before renormalization, the case in which
    /// `e_after <= e_before` is expected.
    pub outward_only: bool,
}

/// Stopping-time detector: fires when the local energy exceeds `2 eps^2`.
///
/// After firing it stays disarmed until the local energy falls back to `2 eps^2` or
/// below, so a sustained excursion produces one event.
#[derive(Clone, Debug)]
pub struct DetectorState {
    pub epsilon: f64,
    pub r: f64,
    pub policy: DetectorPolicy,
    pub fired: bool,
    pub t_fire: Option<f64>,
    pub events: Vec<FireEvent>,
    pub drop_log: Vec<EnergyDrop>,
    armed: bool,
}

impl DetectorState {
    pub fn new(epsilon: f64, r: f64, policy: DetectorPolicy) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param("monitors.epsilon", "must be positive"));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::param("monitors.R", "must be positive"));
        }
        Ok(Self {
            epsilon,
            r,
            policy,
            fired: false,
            t_fire: None,
            events: Vec::new(),
            drop_log: Vec::new(),
            armed: true,
        })
    }

    pub fn threshold(&self) -> f64 {
        2.0 * self.epsilon * self.epsilon
    }

    /// Feeds one sample of `sup E_R`; returns the event if this sample is a crossing.
    pub fn update(&mut self, sup_value: f64, t: f64) -> Option<FireEvent> {
        if let Some(last) = self.events.last() {
            debug_assert!(t >= last.t, "detector fed non-monotone time");
        }
        if sup_value > self.threshold() {
            if !self.armed {
                return None;
            }
            self.armed = false;
            self.fired = true;
            self.t_fire.get_or_insert(t);
            let ev = FireEvent {
                t,
                event: FireTag::Fire,
                er_sup: sup_value,
                eps: self.epsilon,
                r: self.r,
            };
            self.events.push(ev);
            Some(ev)
        } else {
            self.armed = true;
            None
        }
    }
}

/// Replays a stored profile through a fresh detector; returns the first firing time.
pub fn detector_replay(epsilon: f64, r: f64, samples: &[(f64, f64)]) -> Result<Option<f64>> {
    let mut det = DetectorState::new(epsilon, r, DetectorPolicy::Log)?;
    for &(t, sup) in samples {
        det.update(sup, t);
    }
    Ok(det.t_fire)
}

/// Restart after a detector event: truncates both fields to the dealiased band,
/// renormalizes `d`, re-projects `v`, and records the energy change.
pub fn restart_renormalized<T: Real>(s: &State<T>, pot: &PotentialSpec<T>) -> Result<(State<T>, EnergyDrop)> {
    let e_before = energy::energy(s, pot);
    let outward_only = crate::state::min_length(&s.d) >= T::one();
    let mut vh = ops::leray_spec(&ops::dealias(&s.v.spectrum()));
    vh.zero_mean();
    let v = vh.inverse();
    let mut d = ops::dealias(&s.d.spectrum()).inverse();
    renormalize(&mut d)?;
    let next = State { v, d, t: s.t };
    let e_after = energy::energy(&next, pot);
    if e_after > e_before && outward_only {
        log::warn!("restart raised the energy from {e_before} to {e_after}");
    }
    Ok((
        next,
        EnergyDrop {
            t: s.t,
            e_before,
            e_after,
            outward_only,
        },
    ))
}

/// Ratio of the Struwe-type inequality for one field `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StruweTerms {
    /// `\int ||h||_{L^4}^4 dt`
    pub lhs: f64,
    /// `sup_{t, x} \int_{B(x, r0)} |h|^2`
    pub mass_sup: f64,
    /// `\int (||grad h||^2 + r0^{-2} ||h||^2) dt`
    pub bracket: f64,
    pub ratio: StruweRatio,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum StruweRatio {
    Value(f64),
    /// `h = 0`: both sides vanish.
    ZeroOverZero,
    /// Zero denominator with nonzero numerator, impossible in exact arithmetic.
    Degenerate,
}

impl StruweRatio {
    pub fn value(self) -> Option<f64> {
        match self {
            StruweRatio::Value(v) => Some(v),
            _ => None,
        }
    }
}

fn trapezoid(times: &[f64], vals: &[f64]) -> f64 {
    if vals.len() == 1 {
        return vals[0];
    }
    times
        .windows(2)
        .zip(vals.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Struwe ratio `lhs / (mass_sup * bracket)` for a time series of fields. A single
/// slice is treated as an instantaneous check (no time integral on either side).
pub fn struwe_terms<T: Real, const C: usize>(times: &[f64], fields: &[Field<T, C>], r0: f64) -> Result<StruweTerms> {
    if fields.is_empty() || times.len() != fields.len() {
        return Err(Error::param("struwe", "need one time per slice and at least one slice"));
    }
    let kernel = DiskKernel::new(fields[0].grid(), r0)?;
    let mut l4 = Vec::with_capacity(fields.len());
    let mut br = Vec::with_capacity(fields.len());
    let mut mass_sup = 0.0f64;
    let inv_r2 = 1.0 / (r0 * r0);
    for h in fields {
        l4.push(ops::l4_pow4(h).to_f64_lossy());
        let l2 = ops::l2_sq(h).to_f64_lossy();
        br.push(ops::h1_semi_sq_spec(&h.spectrum()).to_f64_lossy() + inv_r2 * l2);
        let mut m2 = ScalarField::zeros(h.grid());
        for (idx, m) in m2.values_mut().iter_mut().enumerate() {
            *m = h.at(idx).iter().fold(T::zero(), |a, v| a + *v * *v);
        }
        mass_sup = mass_sup.max(argmax(&kernel.ball_integrals(&m2)).0.to_f64_lossy());
    }
    let lhs = trapezoid(times, &l4);
    let bracket = trapezoid(times, &br);
    let denom = mass_sup * bracket;
    let ratio = if denom > 0.0 {
        StruweRatio::Value(lhs / denom)
    } else if lhs == 0.0 {
        StruweRatio::ZeroOverZero
    } else {
        log::warn!("Struwe check: zero denominator with lhs = {lhs}");
        StruweRatio::Degenerate
    };
    Ok(StruweTerms {
        lhs,
        mass_sup,
        bracket,
        ratio,
    })
}

/// Struwe ratios for `v` and for `grad d` along a trajectory.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StruweReport {
    pub velocity: StruweTerms,
    pub gradient: StruweTerms,
}

pub fn struwe_check<T: Real>(traj: &[State<T>], r0: f64) -> Result<StruweReport> {
    let times: Vec<f64> = traj.iter().map(|s| s.t).collect();
    let vs: Vec<_> = traj.iter().map(|s| s.v.clone()).collect();
    let gs = traj.iter().map(|s| gradient_field(&s.d)).collect::<Result<Vec<_>>>()?;
    Ok(StruweReport {
        velocity: struwe_terms(&times, &vs, r0)?,
        gradient: struwe_terms(&times, &gs, r0)?,
    })
}

/// `grad d` as a six-component field `(d_x, d_y)`.
pub fn gradient_field<T: Real>(d: &crate::field::VectorField3<T>) -> Result<Field<T, 6>> {
    let g = ops::grad3(d);
    let [a, b, c] = g.dx.into_components();
    let [e, f, h] = g.dy.into_components();
    Field::from_components(d.grid(), [a, b, c, e, f, h])
}
