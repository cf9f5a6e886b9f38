//! Uniform periodic grid on the square torus `[0, L)^2` and its FFT plans.
//!
//! Sample and mode storage is row-major with `y` outer and `x` inner, so the
//! flat index of grid point `(i, j)` (x index `i`, y index `j`) is `j * n + i`.
//! Mode indices follow the usual FFT ordering: index `m < n/2` is wavenumber
//! `m`, the rest are `m - n`. The Nyquist index `n/2` is stored as `-n/2`.
//!
//! Transform normalization: the forward transform is unnormalized and the
//! inverse carries `1/n^2`, so a constant field `c` maps to a single
//! zero-mode coefficient `c * n^2`.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

pub struct TorusGrid<T: Real> {
    n: usize,
    length: T,
    /// Integer wavenumber per axis index.
    k_int: Vec<i64>,
    dealias_mask: Vec<bool>,
    /// Per-mode derivative wavenumbers `2*pi/L * k` (Nyquist zeroed) and full `|k|^2`,
    /// by flat index.
    kx_mode: Vec<T>,
    ky_mode: Vec<T>,
    k2_mode: Vec<T>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for TorusGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl<T: Real> TorusGrid<T> {
    /// Builds a grid with `n` points per axis on a torus of period `length`.
    pub fn new(n: usize, length: T) -> Result<Arc<Self>> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n = {n}: need an even number of points, at least 8"
            )));
        }
        if !(length.is_finite() && length > T::zero()) {
            return Err(Error::InvalidGrid(format!("L = {length}: must be positive")));
        }
        let scale = T::TAU() / length;
        let k_int: Vec<i64> = (0..n)
            .map(|m| if m < n / 2 { m as i64 } else { m as i64 - n as i64 })
            .collect();
        let k_full: Vec<T> = k_int.iter().map(|&k| lit::<T>(k as f64) * scale).collect();
        let k_deriv: Vec<T> = k_int
            .iter()
            .zip(&k_full)
            .map(|(&k, &kf)| if k == -(n as i64) / 2 { T::zero() } else { kf })
            .collect();
        let cutoff = n as f64 / 3.0;
        let mut dealias_mask = vec![true; n * n];
        for j in 0..n {
            for i in 0..n {
                let keep = (k_int[i].abs() as f64) <= cutoff && (k_int[j].abs() as f64) <= cutoff;
                dealias_mask[j * n + i] = keep;
            }
        }
        let kx_mode: Vec<T> = (0..n * n).map(|idx| k_deriv[idx % n]).collect();
        let ky_mode: Vec<T> = (0..n * n).map(|idx| k_deriv[idx / n]).collect();
        let k2_mode: Vec<T> = (0..n * n)
            .map(|idx| {
                let (a, b) = (k_full[idx % n], k_full[idx / n]);
                a * a + b * b
            })
            .collect();
        let mut planner = FftPlanner::<T>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Arc::new(Self {
            n,
            length,
            k_int,
            dealias_mask,
            kx_mode,
            ky_mode,
            k2_mode,
            fwd,
            inv,
        }))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn length(&self) -> T {
        self.length
    }

    /// Grid spacing `L/n`.
    #[inline]
    pub fn dx(&self) -> T {
        self.length / T::from_usize_lossy(self.n)
    }

    /// Quadrature weight of one sample, `(L/n)^2`.
    #[inline]
    pub fn cell_area(&self) -> T {
        self.dx() * self.dx()
    }

    /// Area of the torus, `L^2`.
    #[inline]
    pub fn area(&self) -> T {
        self.length * self.length
    }

    /// Physical coordinate of axis index `i`.
    #[inline]
    pub fn coord(&self, i: usize) -> T {
        T::from_usize_lossy(i) * self.dx()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    /// Integer wavenumber of axis index `m`.
    #[inline]
    pub fn wavenumber_int(&self, m: usize) -> i64 {
        self.k_int[m]
    }

    /// Derivative wavevector `(kx, ky)` of flat mode index `idx` (Nyquist zeroed).
    #[inline]
    pub fn k_deriv(&self, idx: usize) -> (T, T) {
        (self.kx_mode[idx], self.ky_mode[idx])
    }

    /// `|k|^2` of flat mode index `idx`, Nyquist included.
    #[inline]
    pub fn k_squared(&self, idx: usize) -> T {
        self.k2_mode[idx]
    }

    /// Two-thirds rule mask: `false` for modes with any `|k_i| > n/3`.
    #[inline]
    pub fn keeps_mode(&self, idx: usize) -> bool {
        self.dealias_mask[idx]
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.dealias_mask
    }

    /// Flat index of the mode with integer wavenumbers `(kx, ky)`.
    pub fn mode_index(&self, kx: i64, ky: i64) -> usize {
        let n = self.n as i64;
        let wrap = |k: i64| (((k % n) + n) % n) as usize;
        self.index(wrap(kx), wrap(ky))
    }

    /// Unnormalized forward 2D FFT of one real component.
    pub(crate) fn fft_forward(&self, values: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fft2(&mut buf, &self.fwd);
        buf
    }

    /// Inverse 2D FFT with `1/n^2`; returns the real part.
    pub(crate) fn fft_inverse(&self, coeffs: &[Complex<T>]) -> Vec<T> {
        let mut buf = coeffs.to_vec();
        self.fft2(&mut buf, &self.inv);
        let scale = T::one() / T::from_usize_lossy(self.len());
        buf.into_iter().map(|c| c.re * scale).collect()
    }

    /// Forward transforms of two real components with one complex FFT.
    pub(crate) fn fft_forward_pair(&self, a: &[T], b: &[T]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let mut z: Vec<Complex<T>> = a.iter().zip(b).map(|(&x, &y)| Complex::new(x, y)).collect();
        self.fft2(&mut z, &self.fwd);
        let n = self.n;
        let half = T::lit(0.5);
        let mut fa = Vec::with_capacity(z.len());
        let mut fb = Vec::with_capacity(z.len());
        for j in 0..n {
            let jm = if j == 0 { 0 } else { n - j };
            for i in 0..n {
                let im = if i == 0 { 0 } else { n - i };
                let p = z[j * n + i];
                let q = z[jm * n + im].conj();
                fa.push((p + q) * half);
                // (p - q) / 2i
                let d = p - q;
                fb.push(Complex::new(d.im * half, -d.re * half));
            }
        }
        (fa, fb)
    }

    /// Inverse transforms of two Hermitian spectra with one complex FFT.
    pub(crate) fn fft_inverse_pair(&self, a: &[Complex<T>], b: &[Complex<T>]) -> (Vec<T>, Vec<T>) {
        // a + i b
        let mut z: Vec<Complex<T>> = a.iter().zip(b).map(|(&x, &y)| Complex::new(x.re - y.im, x.im + y.re)).collect();
        self.fft2(&mut z, &self.inv);
        let scale = T::one() / T::from_usize_lossy(self.len());
        let ra = z.iter().map(|c| c.re * scale).collect();
        let rb = z.iter().map(|c| c.im * scale).collect();
        (ra, rb)
    }

    fn fft2(&self, buf: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>) {
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        transpose_square(buf, self.n);
        plan.process_with_scratch(buf, &mut scratch);
        transpose_square(buf, self.n);
    }
}

fn transpose_square<X: Copy>(buf: &mut [X], n: usize) {
    for j in 0..n {
        for i in (j + 1)..n {
            buf.swap(j * n + i, i * n + j);
        }
    }
}
