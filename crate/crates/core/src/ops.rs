//! Spectral differential operators, Leray projection, dealiasing and norms.
//!
//! Derivatives are exact multipliers `i k` per mode (Nyquist derivative set to
//! zero so real fields stay real); the Laplacian uses `-|k|^2` with the Nyquist
//! wavenumber kept.

use rustfft::num_complex::Complex;

use crate::error::Result;
use crate::field::{Field, ScalarField, Spectrum, VectorField2, VectorField3};
use crate::scalar::{lit, Real};

/// Validating forward transform: rejects NaN or infinite samples.
pub fn transform_forward<T: Real, const C: usize>(field: &Field<T, C>) -> Result<Spectrum<T, C>> {
    field.check_finite("transform input")?;
    Ok(field.spectrum())
}

pub fn transform_inverse<T: Real, const C: usize>(spec: &Spectrum<T, C>) -> Field<T, C> {
    spec.inverse()
}

#[inline]
fn times_i<T: Real>(z: Complex<T>, k: T) -> Complex<T> {
    // i k z
    Complex::new(-z.im * k, z.re * k)
}

pub fn ddx_spec<T: Real, const C: usize>(s: &Spectrum<T, C>) -> Spectrum<T, C> {
    let g = s.grid().clone();
    s.map_modes(|idx, z| times_i(z, g.k_deriv(idx).0))
}

pub fn ddy_spec<T: Real, const C: usize>(s: &Spectrum<T, C>) -> Spectrum<T, C> {
    let g = s.grid().clone();
    s.map_modes(|idx, z| times_i(z, g.k_deriv(idx).1))
}

pub fn laplacian_spec<T: Real, const C: usize>(s: &Spectrum<T, C>) -> Spectrum<T, C> {
    let g = s.grid().clone();
    s.map_modes(|idx, z| z * (-g.k_squared(idx)))
}

/// Spectral divergence of a 2-vector spectrum.
pub fn div_spec<T: Real>(u: &Spectrum<T, 2>) -> Spectrum<T, 1> {
    let g = u.grid().clone();
    let mut out = Spectrum::<T, 1>::zeros(&g);
    for idx in 0..g.len() {
        let (kx, ky) = g.k_deriv(idx);
        out.comp_mut(0)[idx] = times_i(u.comp(0)[idx], kx) + times_i(u.comp(1)[idx], ky);
    }
    out
}

pub fn grad<T: Real>(s: &ScalarField<T>) -> VectorField2<T> {
    let sh = s.spectrum();
    let g = s.grid().clone();
    let mut out = Spectrum::<T, 2>::zeros(&g);
    for idx in 0..g.len() {
        let (kx, ky) = g.k_deriv(idx);
        out.comp_mut(0)[idx] = times_i(sh.comp(0)[idx], kx);
        out.comp_mut(1)[idx] = times_i(sh.comp(0)[idx], ky);
    }
    out.inverse()
}

pub fn div<T: Real>(u: &VectorField2<T>) -> ScalarField<T> {
    div_spec(&u.spectrum()).inverse()
}

pub fn laplacian<T: Real, const C: usize>(f: &Field<T, C>) -> Field<T, C> {
    laplacian_spec(&f.spectrum()).inverse()
}

/// Gradient of a 3-vector field: `dx[k] = d_x d_k`, `dy[k] = d_y d_k`.
#[derive(Clone, Debug)]
pub struct Gradient3<T: Real> {
    pub dx: VectorField3<T>,
    pub dy: VectorField3<T>,
}

impl<T: Real> Gradient3<T> {
    /// Pointwise `|grad d|^2 = sum_k (d_x d_k)^2 + (d_y d_k)^2`.
    pub fn squared_norm(&self) -> ScalarField<T> {
        let mut out = self.dx.dot(&self.dx);
        let yy = self.dy.dot(&self.dy);
        out.axpy(T::one(), &yy);
        out
    }

    /// Pointwise directional derivative `(u . grad) d`.
    pub fn directional(&self, u: &VectorField2<T>) -> VectorField3<T> {
        let g = u.grid();
        let mut out = VectorField3::zeros(g);
        for idx in 0..g.len() {
            let [ux, uy] = u.at(idx);
            let a = self.dx.at(idx);
            let b = self.dy.at(idx);
            out.set(idx, std::array::from_fn(|k| ux * a[k] + uy * b[k]));
        }
        out
    }

    /// Pointwise `(grad d)^T w`, i.e. `(d_x d . w, d_y d . w)`.
    pub fn transpose_apply(&self, w: &VectorField3<T>) -> VectorField2<T> {
        let grid = w.grid().clone();
        let [x] = self.dx.dot(w).into_components();
        let [y] = self.dy.dot(w).into_components();
        VectorField2::from_components(&grid, [x, y]).expect("same grid")
    }
}

pub fn grad3_spec<T: Real>(d: &Spectrum<T, 3>) -> Gradient3<T> {
    Gradient3 {
        dx: ddx_spec(d).inverse(),
        dy: ddy_spec(d).inverse(),
    }
}

pub fn grad3<T: Real>(d: &VectorField3<T>) -> Gradient3<T> {
    grad3_spec(&d.spectrum())
}

/// Per-mode `I - k k^T / |k|^2`; the mean mode passes through unchanged.
pub fn leray_spec<T: Real>(u: &Spectrum<T, 2>) -> Spectrum<T, 2> {
    let g = u.grid().clone();
    let mut out = u.clone();
    for idx in 1..g.len() {
        let (kx, ky) = g.k_deriv(idx);
        let k2 = kx * kx + ky * ky;
        if k2 == T::zero() {
            continue;
        }
        let a = u.comp(0)[idx];
        let b = u.comp(1)[idx];
        let kdotu = a * kx + b * ky;
        out.comp_mut(0)[idx] = a - kdotu * (kx / k2);
        out.comp_mut(1)[idx] = b - kdotu * (ky / k2);
    }
    out
}

pub fn leray_project<T: Real>(u: &VectorField2<T>) -> VectorField2<T> {
    leray_spec(&u.spectrum()).inverse()
}

/// Zeroes every mode outside the two-thirds band.
pub fn dealias<T: Real, const C: usize>(s: &Spectrum<T, C>) -> Spectrum<T, C> {
    let mut out = s.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place<T: Real, const C: usize>(s: &mut Spectrum<T, C>) {
    let g = s.grid().clone();
    let zero = Complex::new(T::zero(), T::zero());
    for c in 0..C {
        for (idx, v) in s.comp_mut(c).iter_mut().enumerate() {
            if !g.keeps_mode(idx) {
                *v = zero;
            }
        }
    }
}

/// `max_k |k . u(k)| / n^2`: divergence in spectral max norm (amplitude units).
pub fn spectral_divergence_max<T: Real>(u: &Spectrum<T, 2>) -> T {
    let g = u.grid();
    let norm = T::from_usize_lossy(g.len());
    (0..g.len()).fold(T::zero(), |m, idx| {
        let (kx, ky) = g.k_deriv(idx);
        m.max((u.comp(0)[idx] * kx + u.comp(1)[idx] * ky).norm() / norm)
    })
}

/// Norms of a field. `h_minus1` uses only the mean-zero part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms<T> {
    pub l2: T,
    pub l4: T,
    pub h1_seminorm: T,
    pub h_minus1: T,
}

/// `L^2/n^4`, the factor turning a spectral power sum into an `L^2` integral.
#[inline]
pub(crate) fn parseval_factor<T: Real>(g: &crate::grid::TorusGrid<T>) -> T {
    let n2 = T::from_usize_lossy(g.len());
    g.area() / (n2 * n2)
}

/// `L^2` norm squared by quadrature.
pub fn l2_sq<T: Real, const C: usize>(f: &Field<T, C>) -> T {
    f.inner(f)
}

/// `L^4` norm to the fourth power, `\int |f|^4` with `|f|` the pointwise Euclidean norm.
pub fn l4_pow4<T: Real, const C: usize>(f: &Field<T, C>) -> T {
    let g = f.grid();
    let mut acc = T::zero();
    for idx in 0..g.len() {
        let s = f.at(idx).iter().fold(T::zero(), |a, v| a + *v * *v);
        acc = acc + s * s;
    }
    acc * g.cell_area()
}

/// Generic `L^p` norm to the power `p` of the pointwise Euclidean norm.
pub fn lp_pow<T: Real, const C: usize>(f: &Field<T, C>, p: T) -> T {
    let g = f.grid();
    let mut acc = T::zero();
    for idx in 0..g.len() {
        let s = f.at(idx).iter().fold(T::zero(), |a, v| a + *v * *v);
        acc = acc + s.sqrt().powf(p);
    }
    acc * g.cell_area()
}

/// Spectral `\sum w(k) |f(k)|^2` integrated with Parseval.
pub fn weighted_power<T: Real, const C: usize>(s: &Spectrum<T, C>, mut weight: impl FnMut(usize) -> T) -> T {
    let g = s.grid();
    let mut acc = T::zero();
    for c in 0..C {
        for (idx, v) in s.comp(c).iter().enumerate() {
            acc = acc + weight(idx) * v.norm_sqr();
        }
    }
    acc * parseval_factor(g)
}

/// `||grad f||^2` via spectral derivatives.
pub fn h1_semi_sq_spec<T: Real, const C: usize>(s: &Spectrum<T, C>) -> T {
    let g = s.grid().clone();
    weighted_power(s, |idx| {
        let (kx, ky) = g.k_deriv(idx);
        kx * kx + ky * ky
    })
}

/// `||Laplacian f||^2`.
pub fn laplacian_sq_spec<T: Real, const C: usize>(s: &Spectrum<T, C>) -> T {
    let g = s.grid().clone();
    weighted_power(s, |idx| {
        let k2 = g.k_squared(idx);
        k2 * k2
    })
}

/// `||grad Laplacian f||^2`.
pub fn grad_laplacian_sq_spec<T: Real, const C: usize>(s: &Spectrum<T, C>) -> T {
    let g = s.grid().clone();
    weighted_power(s, |idx| {
        let (kx, ky) = g.k_deriv(idx);
        let k2 = g.k_squared(idx);
        (kx * kx + ky * ky) * k2 * k2
    })
}

/// `H^{-1}` norm squared of the mean-zero part, `\sum_{k != 0} |f(k)|^2 / |k|^2`.
pub fn h_minus1_sq_spec<T: Real, const C: usize>(s: &Spectrum<T, C>) -> T {
    let g = s.grid().clone();
    weighted_power(s, |idx| {
        let k2 = g.k_squared(idx);
        if idx == 0 || k2 == T::zero() {
            T::zero()
        } else {
            T::one() / k2
        }
    })
}

/// Full `H^2` norm squared, `\sum (1 + |k|^2)^2 |f(k)|^2`.
pub fn h2_sq_spec<T: Real, const C: usize>(s: &Spectrum<T, C>) -> T {
    let g = s.grid().clone();
    weighted_power(s, |idx| {
        let w = T::one() + g.k_squared(idx);
        w * w
    })
}

/// Full `H^1` norm squared, `\sum (1 + |k|^2) |f(k)|^2`.
pub fn h1_sq_spec<T: Real, const C: usize>(s: &Spectrum<T, C>) -> T {
    let g = s.grid().clone();
    weighted_power(s, |idx| T::one() + g.k_squared(idx))
}

pub fn norms<T: Real, const C: usize>(f: &Field<T, C>) -> Norms<T> {
    let s = f.spectrum();
    if f.mean().iter().any(|m| m.abs() > lit::<T>(1e3) * T::epsilon() * (T::one() + f.max_abs())) {
        log::debug!("H^-1 norm evaluated on the mean-zero part only");
    }
    Norms {
        l2: l2_sq(f).sqrt(),
        l4: l4_pow4(f).sqrt().sqrt(),
        h1_seminorm: h1_semi_sq_spec(&s).sqrt(),
        h_minus1: h_minus1_sq_spec(&s).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use std::f64::consts::{PI, TAU};

    fn grid(n: usize) -> std::sync::Arc<TorusGrid<f64>> {
        TorusGrid::new(n, TAU).unwrap()
    }

    #[test]
    fn constant_maps_to_single_mode() {
        let g = grid(16);
        let f = ScalarField::uniform(&g, [2.5]);
        let s = transform_forward(&f).unwrap();
        assert!((s.comp(0)[0].re - 2.5 * 256.0).abs() < 1e-10);
        for idx in 1..g.len() {
            assert!(s.comp(0)[idx].norm() < 1e-10);
        }
    }

    #[test]
    fn sine_has_two_modes() {
        let g = TorusGrid::new(16, 3.0).unwrap();
        let f = ScalarField::from_fn(&g, |x, _| [(TAU * x / 3.0).sin()]);
        let s = f.spectrum();
        let big: Vec<usize> = (0..g.len()).filter(|&i| s.comp(0)[i].norm() > 1e-9).collect();
        assert_eq!(big, vec![g.mode_index(1, 0), g.mode_index(-1, 0)]);
        assert!(s.hermitian_defect() < 1e-14);
    }

    #[test]
    fn rejects_non_finite() {
        let g = grid(8);
        let mut f = ScalarField::zeros(&g);
        f.values_mut()[5] = f64::NAN;
        assert!(transform_forward(&f).is_err());
    }

    #[test]
    fn grad_of_sine() {
        let g = grid(32);
        let s = ScalarField::from_fn(&g, |x, _| [x.sin()]);
        let gr = grad(&s);
        for idx in 0..g.len() {
            let x = g.coord(idx % 32);
            assert!((gr.comp(0)[idx] - x.cos()).abs() < 1e-13);
            assert!(gr.comp(1)[idx].abs() < 1e-13);
        }
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = grid(16);
        let f = VectorField3::uniform(&g, [1.0, -2.0, 3.5]);
        let l = laplacian(&f);
        assert_eq!(l.max_abs(), 0.0);
    }

    #[test]
    fn leray_cases() {
        let g = grid(32);
        let tg = VectorField2::from_fn(&g, |x, y| [x.sin() * y.cos(), -x.cos() * y.sin()]);
        assert!(leray_project(&tg).sub(&tg).max_abs() < 1e-13);

        let pot = ScalarField::from_fn(&g, |x, y| [x.sin() * y.cos()]);
        assert!(leray_project(&grad(&pot)).max_abs() < 1e-12);

        let longitudinal = VectorField2::from_fn(&g, |x, _| [x.sin(), 0.0]);
        assert!(leray_project(&longitudinal).max_abs() < 1e-12);
    }

    #[test]
    fn norms_closed_forms() {
        let g = grid(32);
        let one = ScalarField::uniform(&g, [1.0]);
        let n1 = norms(&one);
        assert!((n1.l2 - TAU).abs() < 1e-12);
        assert!((n1.l4 - (4.0 * PI * PI).powf(0.25)).abs() < 1e-12);
        assert_eq!(n1.h1_seminorm, 0.0);
        assert_eq!(n1.h_minus1, 0.0);

        let s = ScalarField::from_fn(&g, |x, _| [x.sin()]);
        let ns = norms(&s);
        assert!((ns.l2 * ns.l2 - 2.0 * PI * PI).abs() < 1e-11);
        assert!((ns.h_minus1 * ns.h_minus1 - 2.0 * PI * PI).abs() < 1e-11);
        assert!((ns.h1_seminorm * ns.h1_seminorm - 2.0 * PI * PI).abs() < 1e-11);

        let z = norms(&ScalarField::<f64>::zeros(&g));
        assert_eq!(z, Norms { l2: 0.0, l4: 0.0, h1_seminorm: 0.0, h_minus1: 0.0 });
    }

    #[test]
    fn dealias_edge_modes() {
        let g = grid(32);
        let inside = ScalarField::from_fn(&g, |x, y| [(3.0 * x).cos() + (10.0 * y).sin()]);
        let s = inside.spectrum();
        let d = dealias(&s);
        assert!(d.inverse().sub(&inside).max_abs() < 1e-13);
        assert_eq!(dealias(&d).comp(0), d.comp(0));

        let edge = ScalarField::from_fn(&g, |x, _| [(15.0 * x).cos()]);
        assert!(dealias(&edge.spectrum()).max_modulus() < 1e-12);
    }

    #[test]
    fn f32_round_trip() {
        let g = TorusGrid::<f32>::new(16, 1.0).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| [(6.2831855 * x).sin() + y]);
        let back = f.spectrum().inverse();
        assert!(back.sub(&f).max_abs() < 1e-5);
    }
}
