//! Real sample fields and their spectra.

use std::sync::Arc;

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::scalar::Real;

/// Real field with `C` components sampled on a [`TorusGrid`].
#[derive(Clone, Debug)]
pub struct Field<T: Real, const C: usize> {
    grid: Arc<TorusGrid<T>>,
    comps: [Vec<T>; C],
}

pub type ScalarField<T> = Field<T, 1>;
pub type VectorField2<T> = Field<T, 2>;
pub type VectorField3<T> = Field<T, 3>;

/// Fourier coefficients of a `C`-component real field (unnormalized forward FFT).
#[derive(Clone, Debug)]
pub struct Spectrum<T: Real, const C: usize> {
    grid: Arc<TorusGrid<T>>,
    comps: [Vec<Complex<T>>; C],
}

impl<T: Real, const C: usize> Field<T, C> {
    pub fn zeros(grid: &Arc<TorusGrid<T>>) -> Self {
        Self {
            grid: grid.clone(),
            comps: std::array::from_fn(|_| vec![T::zero(); grid.len()]),
        }
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn(grid: &Arc<TorusGrid<T>>, mut f: impl FnMut(T, T) -> [T; C]) -> Self {
        let n = grid.n();
        let mut out = Self::zeros(grid);
        for j in 0..n {
            let y = grid.coord(j);
            for i in 0..n {
                let val = f(grid.coord(i), y);
                let idx = j * n + i;
                for c in 0..C {
                    out.comps[c][idx] = val[c];
                }
            }
        }
        out
    }

    /// Constant field.
    pub fn uniform(grid: &Arc<TorusGrid<T>>, value: [T; C]) -> Self {
        Self {
            grid: grid.clone(),
            comps: std::array::from_fn(|c| vec![value[c]; grid.len()]),
        }
    }

    pub fn from_components(grid: &Arc<TorusGrid<T>>, comps: [Vec<T>; C]) -> Result<Self> {
        for (c, v) in comps.iter().enumerate() {
            if v.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "component {c} has {} samples, grid needs {}",
                    v.len(),
                    grid.len()
                )));
            }
        }
        Ok(Self {
            grid: grid.clone(),
            comps,
        })
    }

    #[inline]
    pub fn grid(&self) -> &Arc<TorusGrid<T>> {
        &self.grid
    }

    #[inline]
    pub fn comp(&self, c: usize) -> &[T] {
        &self.comps[c]
    }

    #[inline]
    pub fn comp_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[Vec<T>; C] {
        &self.comps
    }

    pub fn into_components(self) -> [Vec<T>; C] {
        self.comps
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [T; C] {
        std::array::from_fn(|c| self.comps[c][idx])
    }

    #[inline]
    pub fn set(&mut self, idx: usize, val: [T; C]) {
        for (c, v) in val.into_iter().enumerate() {
            self.comps[c][idx] = v;
        }
    }

    /// Fails on the first NaN or infinity.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        for comp in &self.comps {
            if let Some(index) = comp.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: what.to_string(),
                    index,
                });
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Pointwise Euclidean norm.
    pub fn magnitude(&self) -> ScalarField<T> {
        let mut out = ScalarField::zeros(&self.grid);
        for idx in 0..self.grid.len() {
            let s = self
                .comps
                .iter()
                .fold(T::zero(), |acc, comp| acc + comp[idx] * comp[idx]);
            out.comps[0][idx] = s.sqrt();
        }
        out
    }

    /// Largest absolute sample over all components.
    pub fn max_abs(&self) -> T {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Largest pointwise Euclidean norm.
    pub fn max_norm(&self) -> T {
        (0..self.grid.len()).fold(T::zero(), |m, idx| {
            let s = self.comps.iter().fold(T::zero(), |a, c| a + c[idx] * c[idx]);
            m.max(s.sqrt())
        })
    }

    /// Quadrature integral of each component, weight `(L/n)^2`.
    pub fn integral(&self) -> [T; C] {
        let w = self.grid.cell_area();
        std::array::from_fn(|c| self.comps[c].iter().fold(T::zero(), |a, &v| a + v) * w)
    }

    /// Component-wise mean over the torus.
    pub fn mean(&self) -> [T; C] {
        let area = self.grid.area();
        self.integral().map(|v| v / area)
    }

    /// `L^2` inner product `sum_c \int a_c b_c`.
    pub fn inner(&self, other: &Self) -> T {
        let w = self.grid.cell_area();
        let mut acc = T::zero();
        for c in 0..C {
            for (a, b) in self.comps[c].iter().zip(&other.comps[c]) {
                acc = acc + *a * *b;
            }
        }
        acc * w
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn scale(&mut self, s: T) {
        for comp in &mut self.comps {
            for v in comp.iter_mut() {
                *v = *v * s;
            }
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: T, other: &Self) {
        for (dst, src) in self.comps.iter_mut().zip(&other.comps) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = *d + a * *s;
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-T::one(), other);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(T::one(), other);
        out
    }

    /// Pointwise dot product with another field of the same arity.
    pub fn dot(&self, other: &Self) -> ScalarField<T> {
        let mut out = ScalarField::zeros(&self.grid);
        for idx in 0..self.grid.len() {
            let mut s = T::zero();
            for c in 0..C {
                s = s + self.comps[c][idx] * other.comps[c][idx];
            }
            out.comps[0][idx] = s;
        }
        out
    }

    /// Linear interpolation `(1 - theta) * self + theta * other`.
    pub fn lerp(&self, other: &Self, theta: T) -> Self {
        let mut out = self.scaled(T::one() - theta);
        out.axpy(theta, other);
        out
    }

    /// Unchecked forward transform; use [`crate::ops::transform_forward`] to validate input.
    pub fn spectrum(&self) -> Spectrum<T, C> {
        let g = &self.grid;
        let mut out: [Vec<Complex<T>>; C] = std::array::from_fn(|_| Vec::new());
        let mut c = 0;
        while c + 1 < C {
            let (a, b) = g.fft_forward_pair(&self.comps[c], &self.comps[c + 1]);
            out[c] = a;
            out[c + 1] = b;
            c += 2;
        }
        if c < C {
            out[c] = g.fft_forward(&self.comps[c]);
        }
        Spectrum {
            grid: g.clone(),
            comps: out,
        }
    }

    /// Cyclic shift by `(di, dj)` grid cells.
    pub fn shifted(&self, di: usize, dj: usize) -> Self {
        let n = self.grid.n();
        let mut out = Self::zeros(&self.grid);
        for c in 0..C {
            for j in 0..n {
                for i in 0..n {
                    out.comps[c][((j + dj) % n) * n + (i + di) % n] = self.comps[c][j * n + i];
                }
            }
        }
        out
    }
}

impl<T: Real> ScalarField<T> {
    #[inline]
    pub fn values(&self) -> &[T] {
        &self.comps[0]
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.comps[0]
    }

    /// Wraps samples into a one-component field.
    pub fn from_values(grid: &Arc<TorusGrid<T>>, values: Vec<T>) -> Result<Self> {
        Self::from_components(grid, [values])
    }
}

impl<T: Real, const C: usize> Spectrum<T, C> {
    pub fn zeros(grid: &Arc<TorusGrid<T>>) -> Self {
        Self {
            grid: grid.clone(),
            comps: std::array::from_fn(|_| vec![Complex::new(T::zero(), T::zero()); grid.len()]),
        }
    }

    pub fn from_components(grid: &Arc<TorusGrid<T>>, comps: [Vec<Complex<T>>; C]) -> Result<Self> {
        if comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch("spectrum length differs from grid".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            comps,
        })
    }

    #[inline]
    pub fn grid(&self) -> &Arc<TorusGrid<T>> {
        &self.grid
    }

    #[inline]
    pub fn comp(&self, c: usize) -> &[Complex<T>] {
        &self.comps[c]
    }

    #[inline]
    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex<T>] {
        &mut self.comps[c]
    }

    /// Coefficient of component `c` at integer wavenumbers `(kx, ky)`.
    pub fn coeff(&self, c: usize, kx: i64, ky: i64) -> Complex<T> {
        self.comps[c][self.grid.mode_index(kx, ky)]
    }

    /// Inverse transform, `1/n^2` normalization.
    pub fn inverse(&self) -> Field<T, C> {
        let g = &self.grid;
        let mut out: [Vec<T>; C] = std::array::from_fn(|_| Vec::new());
        let mut c = 0;
        while c + 1 < C {
            let (a, b) = g.fft_inverse_pair(&self.comps[c], &self.comps[c + 1]);
            out[c] = a;
            out[c + 1] = b;
            c += 2;
        }
        if c < C {
            out[c] = g.fft_inverse(&self.comps[c]);
        }
        Field {
            grid: g.clone(),
            comps: out,
        }
    }

    /// Applies a per-mode complex multiplier to every component.
    pub fn map_modes(&self, mut f: impl FnMut(usize, Complex<T>) -> Complex<T>) -> Self {
        Self {
            grid: self.grid.clone(),
            comps: std::array::from_fn(|c| self.comps[c].iter().enumerate().map(|(idx, v)| f(idx, *v)).collect()),
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: T, other: &Self) {
        for (dst, src) in self.comps.iter_mut().zip(&other.comps) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = *d + *s * a;
            }
        }
    }

    pub fn scale(&mut self, a: T) {
        for comp in &mut self.comps {
            for v in comp.iter_mut() {
                *v = *v * a;
            }
        }
    }

    /// Largest coefficient modulus, optionally restricted to a component.
    pub fn max_modulus(&self) -> T {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(T::zero(), |m, v| m.max(v.norm()))
    }

    /// Largest violation of `c(-k) = conj(c(k))` over all modes, relative to the largest modulus.
    pub fn hermitian_defect(&self) -> T {
        let n = self.grid.n();
        let mut worst = T::zero();
        for comp in &self.comps {
            for j in 0..n {
                for i in 0..n {
                    let a = comp[j * n + i];
                    let b = comp[((n - j) % n) * n + (n - i) % n];
                    worst = worst.max((a - b.conj()).norm());
                }
            }
        }
        let scale = self.max_modulus();
        if scale > T::zero() {
            worst / scale
        } else {
            worst
        }
    }

    /// Zeroes the mean (k = 0) mode of every component.
    pub fn zero_mean(&mut self) {
        for comp in &mut self.comps {
            comp[0] = Complex::new(T::zero(), T::zero());
        }
    }

    /// Sum of squared moduli; `L^2` norm squared is `L^2/n^4` times this.
    pub fn power(&self) -> T {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(T::zero(), |a, v| a + v.norm_sqr())
    }
}
