//! Anisotropic energy density of the director and its derivatives.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

pub type Vec3<T> = [T; 3];

#[inline]
pub fn dot3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm3<T: Real>(a: Vec3<T>) -> T {
    dot3(a, a).sqrt()
}

/// Which closed-form potential is active.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum PotentialFamily {
    #[default]
    None,
    /// `phi(n) = 1/2 (|H|^2 - (n.H)^2)`.
    Magnetic {
        #[serde(rename = "H")]
        h: [f64; 3],
    },
    /// `phi(n) = 1/2 |n - xi|^2`.
    Quadratic { xi: [f64; 3] },
}

/// A potential together with its admissibility constants: growth `|phi'(n)| <= M0 (1 + |n|)`,
/// Lipschitz constant `M1` of `phi''`, and bound `|phi''| <= M2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialSpec<T: Real> {
    family: Family<T>,
    pub m0: T,
    pub m1: T,
    pub m2: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Family<T> {
    None,
    Magnetic(Vec3<T>),
    Quadratic(Vec3<T>),
}

impl<T: Real> PotentialSpec<T> {
    pub fn none() -> Self {
        Self {
            family: Family::None,
            m0: T::zero(),
            m1: T::zero(),
            m2: T::zero(),
        }
    }

    pub fn magnetic(h: Vec3<T>) -> Self {
        let h2 = dot3(h, h);
        Self {
            family: Family::Magnetic(h),
            m0: h2,
            m1: T::zero(),
            m2: h2,
        }
    }

    pub fn quadratic(xi: Vec3<T>) -> Self {
        Self {
            family: Family::Quadratic(xi),
            m0: T::one().max(norm3(xi)),
            m1: T::zero(),
            m2: T::one(),
        }
    }

    pub fn from_family(f: &PotentialFamily) -> Self {
        let conv = |a: [f64; 3]| a.map(T::lit);
        match *f {
            PotentialFamily::None => Self::none(),
            PotentialFamily::Magnetic { h } => Self::magnetic(conv(h)),
            PotentialFamily::Quadratic { xi } => Self::quadratic(conv(xi)),
        }
    }

    pub fn family(&self) -> PotentialFamily {
        let conv = |a: Vec3<T>| a.map(|v| v.to_f64_lossy());
        match self.family {
            Family::None => PotentialFamily::None,
            Family::Magnetic(h) => PotentialFamily::Magnetic { h: conv(h) },
            Family::Quadratic(xi) => PotentialFamily::Quadratic { xi: conv(xi) },
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self.family, Family::None)
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.family, Family::Quadratic(_))
    }

    pub fn phi(&self, n: Vec3<T>) -> T {
        let half = T::lit(0.5);
        match self.family {
            Family::None => T::zero(),
            Family::Magnetic(h) => {
                let nh = dot3(n, h);
                half * (dot3(h, h) - nh * nh)
            }
            Family::Quadratic(xi) => {
                let r = [n[0] - xi[0], n[1] - xi[1], n[2] - xi[2]];
                half * dot3(r, r)
            }
        }
    }

    pub fn phi_prime(&self, n: Vec3<T>) -> Vec3<T> {
        match self.family {
            Family::None => [T::zero(); 3],
            Family::Magnetic(h) => {
                let nh = dot3(n, h);
                h.map(|hi| -nh * hi)
            }
            Family::Quadratic(xi) => [n[0] - xi[0], n[1] - xi[1], n[2] - xi[2]],
        }
    }

    /// Hessian of `phi` (constant for both families).
    pub fn phi_second(&self, _n: Vec3<T>) -> [[T; 3]; 3] {
        match self.family {
            Family::None => [[T::zero(); 3]; 3],
            Family::Magnetic(h) => std::array::from_fn(|i| std::array::from_fn(|j| -h[i] * h[j])),
            Family::Quadratic(_) => {
                std::array::from_fn(|i| std::array::from_fn(|j| if i == j { T::one() } else { T::zero() }))
            }
        }
    }

    /// `alpha(n) = phi'(n) . n`.
    pub fn alpha(&self, n: Vec3<T>) -> T {
        dot3(self.phi_prime(n), n)
    }

    /// Director forcing `-phi'(n) + alpha(n) n`, tangent to the sphere at unit `n`.
    pub fn tangential_force(&self, n: Vec3<T>) -> Vec3<T> {
        let len = norm3(n);
        if (len - T::one()).abs() > T::lit(1e-8) {
            log::warn!("tangential_force evaluated off the sphere, |n| = {len}");
        }
        let p = self.phi_prime(n);
        let a = dot3(p, n);
        [a * n[0] - p[0], a * n[1] - p[1], a * n[2] - p[2]]
    }
}
