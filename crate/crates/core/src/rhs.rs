//! Nonlinear right-hand sides of the velocity and director equations.
//!
//! Products are formed pointwise from two-thirds-truncated inputs and the
//! result is truncated again before use. Diffusion (`-A v`, `-Â d`) is not
//! included; the integrator applies it exactly.

use crate::field::{Spectrum, VectorField2, VectorField3};
use crate::ops::{self, Gradient3};
use crate::potential::{cross3, PotentialSpec};
use crate::scalar::Real;

fn truncated<T: Real, const C: usize>(s: &Spectrum<T, C>, dealias: bool) -> Spectrum<T, C> {
    if dealias {
        ops::dealias(s)
    } else {
        s.clone()
    }
}

fn to_truncated_spectrum<T: Real, const C: usize>(f: &crate::field::Field<T, C>, dealias: bool) -> Spectrum<T, C> {
    let s = f.spectrum();
    truncated(&s, dealias)
}

/// Physical-space quantities derived from a (truncated) velocity.
struct VelocityParts<T: Real> {
    v: VectorField2<T>,
    dvx: VectorField2<T>,
    dvy: VectorField2<T>,
}

impl<T: Real> VelocityParts<T> {
    fn new(vh: &Spectrum<T, 2>) -> Self {
        Self {
            v: vh.inverse(),
            dvx: ops::ddx_spec(vh).inverse(),
            dvy: ops::ddy_spec(vh).inverse(),
        }
    }

    /// `(u . grad) v` for the stored field `v` and an advecting `u`.
    fn advected_by(&self, u: &VectorField2<T>) -> VectorField2<T> {
        let g = u.grid();
        let mut out = VectorField2::zeros(g);
        for idx in 0..g.len() {
            let [ux, uy] = u.at(idx);
            let a = self.dvx.at(idx);
            let b = self.dvy.at(idx);
            out.set(idx, [ux * a[0] + uy * b[0], ux * a[1] + uy * b[1]]);
        }
        out
    }
}

/// Physical-space quantities derived from a (truncated) director.
struct DirectorParts<T: Real> {
    d: VectorField3<T>,
    grad: Gradient3<T>,
    /// `|grad d|^2`
    grad_sq: crate::field::ScalarField<T>,
    lap: VectorField3<T>,
}

impl<T: Real> DirectorParts<T> {
    fn new(dh: &Spectrum<T, 3>) -> Self {
        let grad = ops::grad3_spec(dh);
        Self {
            d: dh.inverse(),
            grad_sq: grad.squared_norm(),
            grad,
            lap: ops::laplacian_spec(dh).inverse(),
        }
    }

    /// `|grad d|^2 d - phi'(d) + alpha(d) d`, the zeroth-order part of the tension.
    fn reaction(&self, pot: &PotentialSpec<T>) -> VectorField3<T> {
        let g = self.d.grid();
        let gn = &self.grad_sq;
        let mut out = VectorField3::zeros(g);
        for idx in 0..g.len() {
            let d = self.d.at(idx);
            let s = gn.values()[idx];
            let t = if pot.is_none() { [T::zero(); 3] } else { tangent_no_warn(pot, d) };
            out.set(idx, std::array::from_fn(|k| s * d[k] + t[k]));
        }
        out
    }
}

#[inline]
fn tangent_no_warn<T: Real>(pot: &PotentialSpec<T>, d: [T; 3]) -> [T; 3] {
    let p = pot.phi_prime(d);
    let a = p[0] * d[0] + p[1] * d[1] + p[2] * d[2];
    std::array::from_fn(|k| a * d[k] - p[k])
}

/// `B(u, w) = Π (u . grad w)`.
pub fn convective<T: Real>(u: &VectorField2<T>, w: &VectorField2<T>, dealias: bool) -> VectorField2<T> {
    convective_spec(u, &w.spectrum(), dealias).inverse()
}

fn convective_spec<T: Real>(u: &VectorField2<T>, wh: &Spectrum<T, 2>, dealias: bool) -> Spectrum<T, 2> {
    let uh = truncated(&u.spectrum(), dealias);
    let u_t = uh.inverse();
    let parts = VelocityParts::new(&truncated(wh, dealias));
    let prod = to_truncated_spectrum(&parts.advected_by(&u_t), dealias);
    ops::leray_spec(&prod)
}

/// `-Π Div(grad d ⊙ grad d)`, assembled as `-Π[(grad d)^T Δd]` (the gradient part is annihilated).
pub fn ericksen_stress_div<T: Real>(d: &VectorField3<T>, dealias: bool) -> VectorField2<T> {
    let parts = DirectorParts::new(&truncated(&d.spectrum(), dealias));
    let mut s = to_truncated_spectrum(&parts.grad.transpose_apply(&parts.lap), dealias);
    s.scale(-T::one());
    ops::leray_spec(&s).inverse()
}

/// Unprojected `Div(grad d ⊙ grad d)` by spectral divergence of the stress tensor.
pub fn stress_tensor_divergence<T: Real>(d: &VectorField3<T>, dealias: bool) -> VectorField2<T> {
    let parts = DirectorParts::new(&truncated(&d.spectrum(), dealias));
    let xx = parts.grad.dx.dot(&parts.grad.dx);
    let xy = parts.grad.dx.dot(&parts.grad.dy);
    let yy = parts.grad.dy.dot(&parts.grad.dy);
    let g = d.grid().clone();
    let mut row0 = VectorField2::zeros(&g);
    let mut row1 = VectorField2::zeros(&g);
    for idx in 0..g.len() {
        row0.set(idx, [xx.values()[idx], xy.values()[idx]]);
        row1.set(idx, [xy.values()[idx], yy.values()[idx]]);
    }
    let div0 = ops::div_spec(&to_truncated_spectrum(&row0, dealias)).inverse();
    let div1 = ops::div_spec(&to_truncated_spectrum(&row1, dealias)).inverse();
    let [a] = div0.into_components();
    let [b] = div1.into_components();
    VectorField2::from_components(&g, [a, b]).expect("same grid")
}

/// Cross-check assembly `-Π Div(grad d ⊙ grad d)` through the full stress tensor.
pub fn ericksen_stress_div_tensor<T: Real>(d: &VectorField3<T>, dealias: bool) -> VectorField2<T> {
    let mut s = stress_tensor_divergence(d, dealias).spectrum();
    s.scale(-T::one());
    ops::leray_spec(&s).inverse()
}

/// `G(v, d) = |grad d|^2 d - v . grad d - phi'(d) + (phi'(d) . d) d + d × g`, diffusion excluded.
pub fn director_rhs<T: Real>(
    v: &VectorField2<T>,
    d: &VectorField3<T>,
    g: &VectorField3<T>,
    pot: &PotentialSpec<T>,
    dealias: bool,
) -> VectorField3<T> {
    director_rhs_spec(&v.spectrum(), &d.spectrum(), Some(g), pot, dealias).inverse()
}

fn director_rhs_from_parts<T: Real>(
    v: &VectorField2<T>,
    parts: &DirectorParts<T>,
    g: Option<&VectorField3<T>>,
    pot: &PotentialSpec<T>,
    dealias: bool,
) -> Spectrum<T, 3> {
    director_rhs_with_adv(&parts.grad.directional(v), parts, g, pot, dealias)
}

/// Same as [`director_rhs_from_parts`] with `v . grad d` already formed.
fn director_rhs_with_adv<T: Real>(
    adv: &VectorField3<T>,
    parts: &DirectorParts<T>,
    g: Option<&VectorField3<T>>,
    pot: &PotentialSpec<T>,
    dealias: bool,
) -> Spectrum<T, 3> {
    let mut out = parts.reaction(pot);
    out.axpy(-T::one(), adv);
    if let Some(g) = g {
        for idx in 0..out.grid().len() {
            let c = cross3(parts.d.at(idx), g.at(idx));
            let cur = out.at(idx);
            out.set(idx, std::array::from_fn(|k| cur[k] + c[k]));
        }
    }
    to_truncated_spectrum(&out, dealias)
}

pub(crate) fn director_rhs_spec<T: Real>(
    vh: &Spectrum<T, 2>,
    dh: &Spectrum<T, 3>,
    g: Option<&VectorField3<T>>,
    pot: &PotentialSpec<T>,
    dealias: bool,
) -> Spectrum<T, 3> {
    let v = truncated(vh, dealias).inverse();
    let parts = DirectorParts::new(&truncated(dh, dealias));
    director_rhs_from_parts(&v, &parts, g, pot, dealias)
}

/// Tension field `R(d) = Δd + |grad d|^2 d - phi'(d) + alpha(d) d`.
pub fn tension<T: Real>(d: &VectorField3<T>, pot: &PotentialSpec<T>, dealias: bool) -> VectorField3<T> {
    tension_spec(&d.spectrum(), pot, dealias).inverse()
}

pub(crate) fn tension_spec<T: Real>(dh: &Spectrum<T, 3>, pot: &PotentialSpec<T>, dealias: bool) -> Spectrum<T, 3> {
    let parts = DirectorParts::new(&truncated(dh, dealias));
    let mut s = to_truncated_spectrum(&parts.reaction(pot), dealias);
    s.axpy(T::one(), &ops::laplacian_spec(&truncated(dh, dealias)));
    s
}

/// Nonlinear right-hand sides at one instant.
#[derive(Clone, Debug)]
pub struct RhsBundle<T: Real> {
    /// `Π[-(v . grad v) - (grad d)^T Δd + f]`, mean mode zeroed.
    pub fv: Spectrum<T, 2>,
    /// `G(v, d)` including `d × g`.
    pub gd: Spectrum<T, 3>,
    /// `||grad d||_{L^4}^4`.
    pub grad_d_l4_pow4: T,
    /// `||v . grad d||_{L^2}`.
    pub v_grad_d_l2: T,
}

/// Full nonlinear evaluation from state spectra; `f` and `g` are physical forcing samples.
pub fn evaluate<T: Real>(
    vh: &Spectrum<T, 2>,
    dh: &Spectrum<T, 3>,
    f: Option<&VectorField2<T>>,
    g: Option<&VectorField3<T>>,
    pot: &PotentialSpec<T>,
    dealias: bool,
) -> RhsBundle<T> {
    let vt = truncated(vh, dealias);
    let vel = VelocityParts::new(&vt);
    let dir = DirectorParts::new(&truncated(dh, dealias));

    let mut mom = vel.advected_by(&vel.v);
    mom.axpy(T::one(), &dir.grad.transpose_apply(&dir.lap));
    let mut fv = to_truncated_spectrum(&mom, dealias);
    fv.scale(-T::one());
    if let Some(f) = f {
        fv.axpy(T::one(), &f.spectrum());
    }
    let mut fv = ops::leray_spec(&fv);
    fv.zero_mean();

    let adv = dir.grad.directional(&vel.v);
    let gd = director_rhs_with_adv(&adv, &dir, g, pot, dealias);
    RhsBundle {
        fv,
        gd,
        grad_d_l4_pow4: ops::l2_sq(&dir.grad_sq),
        v_grad_d_l2: ops::l2_sq(&adv).sqrt(),
    }
}

/// Residuals of the two orthogonality identities used in the energy argument.
#[derive(Clone, Copy, Debug)]
pub struct StructuralResiduals<T> {
    /// `<-Div(grad d ⊙ grad d), u> + <u . grad d, Δd>`.
    pub dissip_residual: T,
    /// Natural scale of the dissipation pairing.
    pub dissip_scale: T,
    /// `<u . grad d, |grad d|^2 d - phi'(d) + alpha(d) d>`.
    pub perp_residual: T,
    pub perp_scale: T,
}

impl<T: Real> StructuralResiduals<T> {
    pub fn dissip_relative(&self) -> T {
        relative(self.dissip_residual, self.dissip_scale)
    }

    pub fn perp_relative(&self) -> T {
        relative(self.perp_residual, self.perp_scale)
    }
}

fn relative<T: Real>(r: T, scale: T) -> T {
    if scale > T::zero() {
        r.abs() / scale
    } else {
        r.abs()
    }
}

/// Evaluates both pairings; the stress pairing uses the tensor-divergence form so the
/// cancellation is a genuine integration by parts.
pub fn structural_identity_check<T: Real>(
    u: &VectorField2<T>,
    d: &VectorField3<T>,
    pot: &PotentialSpec<T>,
) -> StructuralResiduals<T> {
    let dh = d.spectrum();
    let parts = DirectorParts::new(&dh);
    let stress = stress_tensor_divergence(d, false);
    let adv = parts.grad.directional(u);

    let a = -stress.inner(u);
    let b = adv.inner(&parts.lap);
    let dissip_scale = ops::l2_sq(&stress).sqrt() * ops::l2_sq(u).sqrt() + ops::l2_sq(&adv).sqrt() * ops::l2_sq(&parts.lap).sqrt();

    let reaction = parts.reaction(pot);
    let perp = adv.inner(&reaction);
    let perp_scale = ops::l2_sq(&adv).sqrt() * ops::l2_sq(&reaction).sqrt();
    StructuralResiduals {
        dissip_residual: a + b,
        dissip_scale,
        perp_residual: perp,
        perp_scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use std::f64::consts::TAU;
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<TorusGrid<f64>> {
        TorusGrid::new(n, TAU).unwrap()
    }

    fn taylor_green(g: &Arc<TorusGrid<f64>>) -> VectorField2<f64> {
        VectorField2::from_fn(g, |x, y| [x.sin() * y.cos(), -x.cos() * y.sin()])
    }

    fn equator(g: &Arc<TorusGrid<f64>>) -> VectorField3<f64> {
        VectorField3::from_fn(g, |x, _| [x.cos(), x.sin(), 0.0])
    }

    #[test]
    fn convective_cases() {
        let g = grid(32);
        let zero = VectorField2::zeros(&g);
        assert_eq!(convective(&zero, &zero, true).max_abs(), 0.0);
        let tg = taylor_green(&g);
        assert!(convective(&tg, &tg, true).max_abs() < 1e-10);
    }

    #[test]
    fn stress_cases() {
        let g = grid(32);
        let c = VectorField3::uniform(&g, [0.0, 0.6, 0.8]);
        assert!(ericksen_stress_div(&c, true).max_abs() < 1e-14);
        let eq = equator(&g);
        assert!(ericksen_stress_div(&eq, true).max_abs() < 1e-12);
        assert!(ericksen_stress_div_tensor(&eq, true).max_abs() < 1e-12);
    }

    #[test]
    fn director_rhs_cases() {
        let g = grid(16);
        let none = PotentialSpec::none();
        let v0 = VectorField2::zeros(&g);
        let g0 = VectorField3::zeros(&g);
        let d0 = VectorField3::uniform(&g, [0.0, 0.0, 1.0]);
        assert!(director_rhs(&v0, &d0, &g0, &none, true).max_abs() < 1e-15);

        let gamma = 0.7;
        let e1 = VectorField3::uniform(&g, [1.0, 0.0, 0.0]);
        let gg = VectorField3::uniform(&g, [0.0, 0.0, gamma]);
        let out = director_rhs(&v0, &e1, &gg, &none, true);
        for idx in 0..g.len() {
            let a = out.at(idx);
            assert!(a[0].abs() < 1e-14 && (a[1] + gamma).abs() < 1e-14 && a[2].abs() < 1e-14);
        }

        let g32 = grid(32);
        let eq = equator(&g32);
        let rhs = director_rhs(&VectorField2::zeros(&g32), &eq, &VectorField3::zeros(&g32), &none, true);
        assert!(rhs.sub(&eq).max_abs() < 1e-12);
        let full = rhs.add(&ops::laplacian(&eq));
        assert!(full.max_abs() < 1e-12);
    }

    #[test]
    fn tension_cases() {
        let g = grid(16);
        let h = [0.0, 1.0, 2.0];
        let hn = 5f64.sqrt();
        let d = VectorField3::uniform(&g, [0.0, 1.0 / hn, 2.0 / hn]);
        assert!(tension(&d, &PotentialSpec::magnetic(h), true).max_abs() < 1e-14);
        assert!(tension(&d, &PotentialSpec::none(), true).max_abs() < 1e-15);
        let g32 = grid(32);
        assert!(tension(&equator(&g32), &PotentialSpec::none(), true).max_abs() < 1e-12);
    }

    #[test]
    fn structural_trivial_cases() {
        let g = grid(16);
        let d = equator(&g);
        let pot = PotentialSpec::magnetic([0.0, 0.0, 1.0]);
        let r = structural_identity_check(&VectorField2::zeros(&g), &d, &pot);
        assert_eq!(r.dissip_residual, 0.0);
        assert_eq!(r.perp_residual, 0.0);
        let c = VectorField3::uniform(&g, [1.0, 0.0, 0.0]);
        let r = structural_identity_check(&taylor_green(&g), &c, &pot);
        assert!(r.dissip_residual.abs() < 1e-14 && r.perp_residual.abs() < 1e-14);
    }

    #[test]
    fn forcing_enters_linearly() {
        let g = grid(16);
        let v = taylor_green(&g).scaled(0.3);
        let d = VectorField3::from_fn(&g, |x, y| {
            let a = [0.3 * x.sin(), 0.2 * y.cos(), 1.0];
            let l = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            a.map(|c| c / l)
        });
        let pot = PotentialSpec::quadratic([0.1, 0.2, 0.3]);
        let gf = VectorField3::from_fn(&g, |x, y| [x.cos(), y.sin(), 0.5]);
        let zero = VectorField3::zeros(&g);
        let base = director_rhs(&v, &d, &zero, &pot, true);
        let one = director_rhs(&v, &d, &gf, &pot, true).sub(&base);
        let three = director_rhs(&v, &d, &gf.scaled(3.0), &pot, true).sub(&base);
        assert!(three.sub(&one.scaled(3.0)).max_abs() < 1e-12);
    }
}
