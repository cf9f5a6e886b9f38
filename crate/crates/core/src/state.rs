use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{VectorField2, VectorField3};
use crate::grid::TorusGrid;
use crate::ops;
use crate::scalar::Real;

/// Velocity `v`, director `d` and time `t`.
#[derive(Clone, Debug)]
pub struct State<T: Real> {
    pub v: VectorField2<T>,
    pub d: VectorField3<T>,
    pub t: f64,
}

impl<T: Real> State<T> {
    pub fn new(v: VectorField2<T>, d: VectorField3<T>, t: f64) -> Result<Self> {
        if !Arc::ptr_eq(v.grid(), d.grid()) && v.grid().n() != d.grid().n() {
            return Err(Error::GridMismatch("velocity and director live on different grids".into()));
        }
        v.check_finite("velocity")?;
        d.check_finite("director")?;
        Ok(Self { v, d, t })
    }

    /// Projects and mean-zeroes `v`, renormalizes `d` to unit length.
    pub fn enforced(mut self) -> Result<Self> {
        self.project_velocity();
        renormalize(&mut self.d)?;
        Ok(self)
    }

    pub fn grid(&self) -> &Arc<TorusGrid<T>> {
        self.v.grid()
    }

    pub fn project_velocity(&mut self) {
        let mut s = ops::leray_spec(&self.v.spectrum());
        s.zero_mean();
        self.v = s.inverse();
    }

    /// `max_x ||d(x)| - 1|`.
    pub fn sphere_defect(&self) -> T {
        sphere_defect(&self.d)
    }

    /// Divergence of `v` in spectral max norm.
    pub fn divergence(&self) -> T {
        ops::spectral_divergence_max(&self.v.spectrum())
    }
}

pub fn sphere_defect<T: Real>(d: &VectorField3<T>) -> T {
    (0..d.grid().len()).fold(T::zero(), |m, idx| {
        let [a, b, c] = d.at(idx);
        m.max(((a * a + b * b + c * c).sqrt() - T::one()).abs())
    })
}

pub fn min_length<T: Real>(d: &VectorField3<T>) -> T {
    (0..d.grid().len()).fold(T::infinity(), |m, idx| {
        let [a, b, c] = d.at(idx);
        m.min((a * a + b * b + c * c).sqrt())
    })
}

/// Pointwise `d / |d|`; fails where `|d|` vanishes.
pub fn renormalize<T: Real>(d: &mut VectorField3<T>) -> Result<()> {
    for idx in 0..d.grid().len() {
        let v = d.at(idx);
        let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(l > T::zero()) {
            return Err(Error::NonFinite {
                what: "director length".into(),
                index: idx,
            });
        }
        d.set(idx, v.map(|c| c / l));
    }
    Ok(())
}
