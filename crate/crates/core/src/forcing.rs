//! Time-dependent external forcing from a closed expression vocabulary.
//!
//! Each component is a sum of modes `poly(t) * a_c * cos(2 pi / L (kx x + ky y) + phase)`,
//! optionally switched on by a `sin^2` window over `[t_on, t_off]`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::TorusGrid;
use crate::scalar::Real;

fn unit_poly() -> Vec<f64> {
    vec![1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigMode {
    /// One amplitude per vector component.
    pub amplitude: Vec<f64>,
    #[serde(default)]
    pub kx: i64,
    #[serde(default)]
    pub ky: i64,
    #[serde(default)]
    pub phase: f64,
    /// Polynomial coefficients in `t`, lowest degree first.
    #[serde(default = "unit_poly")]
    pub poly: Vec<f64>,
}

impl TrigMode {
    /// Spatially constant vector.
    pub fn constant(amplitude: Vec<f64>) -> Self {
        Self {
            amplitude,
            kx: 0,
            ky: 0,
            phase: 0.0,
            poly: unit_poly(),
        }
    }

    fn time_factor(&self, t: f64) -> f64 {
        self.poly.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ForcingExpr {
    #[default]
    Zero,
    Modes { modes: Vec<TrigMode> },
    Pulse { t_on: f64, t_off: f64, modes: Vec<TrigMode> },
}

impl ForcingExpr {
    pub fn is_zero(&self) -> bool {
        match self {
            ForcingExpr::Zero => true,
            ForcingExpr::Modes { modes } | ForcingExpr::Pulse { modes, .. } => modes.is_empty(),
        }
    }

    /// Checks component counts and window ordering; `path` prefixes error messages.
    pub fn validate(&self, components: usize, path: &str) -> Result<()> {
        let modes = match self {
            ForcingExpr::Zero => return Ok(()),
            ForcingExpr::Modes { modes } => modes,
            ForcingExpr::Pulse { t_on, t_off, modes } => {
                if !(t_on.is_finite() && t_off.is_finite() && t_off > t_on) {
                    return Err(Error::param(format!("{path}.t_off"), "pulse window needs t_on < t_off"));
                }
                modes
            }
        };
        for (i, m) in modes.iter().enumerate() {
            if m.amplitude.len() != components {
                return Err(Error::param(
                    format!("{path}.modes[{i}].amplitude"),
                    format!("expected {components} components, got {}", m.amplitude.len()),
                ));
            }
            if m.amplitude.iter().chain(&m.poly).chain([&m.phase]).any(|v| !v.is_finite()) {
                return Err(Error::param(format!("{path}.modes[{i}]"), "non-finite coefficient"));
            }
        }
        Ok(())
    }

    fn window(&self, t: f64) -> f64 {
        match *self {
            ForcingExpr::Pulse { t_on, t_off, .. } => {
                if t < t_on || t > t_off {
                    0.0
                } else {
                    let s = (std::f64::consts::PI * (t - t_on) / (t_off - t_on)).sin();
                    s * s
                }
            }
            _ => 1.0,
        }
    }

    pub fn eval<T: Real, const C: usize>(&self, grid: &Arc<TorusGrid<T>>, t: f64) -> Result<Field<T, C>> {
        let modes = match self {
            ForcingExpr::Zero => return Ok(Field::zeros(grid)),
            ForcingExpr::Modes { modes } | ForcingExpr::Pulse { modes, .. } => modes,
        };
        let w = self.window(t);
        let mut out = Field::<T, C>::zeros(grid);
        if w == 0.0 {
            return Ok(out);
        }
        let n = grid.n();
        let scale = std::f64::consts::TAU / grid.length().to_f64_lossy();
        for m in modes {
            if m.amplitude.len() != C {
                return Err(Error::Forcing {
                    t,
                    reason: format!("mode has {} components, field needs {C}", m.amplitude.len()),
                });
            }
            let tf = w * m.time_factor(t);
            for j in 0..n {
                let y = grid.coord(j).to_f64_lossy();
                for i in 0..n {
                    let x = grid.coord(i).to_f64_lossy();
                    let spatial = (scale * (m.kx as f64 * x + m.ky as f64 * y) + m.phase).cos();
                    let idx = j * n + i;
                    for c in 0..C {
                        let slot = &mut out.comp_mut(c)[idx];
                        *slot = *slot + T::lit(tf * m.amplitude[c] * spatial);
                    }
                }
            }
        }
        if let Some(index) = (0..C).find_map(|c| out.comp(c).iter().position(|v| !v.is_finite())) {
            return Err(Error::Forcing {
                t,
                reason: format!("non-finite value at sample {index}"),
            });
        }
        Ok(out)
    }
}

/// Velocity forcing `f` (2 components) and director forcing `g` (3 components).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    #[serde(default)]
    pub f: ForcingExpr,
    #[serde(default)]
    pub g: ForcingExpr,
}

impl ForcingSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        self.f.validate(2, "forcing.f")?;
        self.g.validate(3, "forcing.g")
    }

    pub fn is_zero(&self) -> bool {
        self.f.is_zero() && self.g.is_zero()
    }

    pub fn f_at<T: Real>(&self, grid: &Arc<TorusGrid<T>>, t: f64) -> Result<Field<T, 2>> {
        self.f.eval(grid, t)
    }

    pub fn g_at<T: Real>(&self, grid: &Arc<TorusGrid<T>>, t: f64) -> Result<Field<T, 3>> {
        self.g.eval(grid, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_window() {
        let g = TorusGrid::<f64>::new(8, 1.0).unwrap();
        let spec = ForcingSpec {
            f: ForcingExpr::Zero,
            g: ForcingExpr::Pulse {
                t_on: 1.0,
                t_off: 3.0,
                modes: vec![TrigMode::constant(vec![0.0, 0.0, 2.0])],
            },
        };
        spec.validate().unwrap();
        assert_eq!(spec.g_at(&g, 0.5).unwrap().max_abs(), 0.0);
        let mid = spec.g_at(&g, 2.0).unwrap();
        assert!((mid.comp(2)[17] - 2.0).abs() < 1e-15);
        assert_eq!(mid.comp(0)[17], 0.0);
        assert_eq!(spec.f_at(&g, 2.0).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn polynomial_trig_mode() {
        let g = TorusGrid::<f64>::new(16, 2.0).unwrap();
        let expr = ForcingExpr::Modes {
            modes: vec![TrigMode {
                amplitude: vec![1.0, -0.5],
                kx: 1,
                ky: 0,
                phase: 0.0,
                poly: vec![1.0, 2.0],
            }],
        };
        let f: Field<f64, 2> = expr.eval(&g, 0.5).unwrap();
        // x = 0.25 at i = 2: cos(pi/2 * ... ) with L = 2 -> cos(pi * 0.25)
        let expect = 2.0 * (std::f64::consts::PI * 0.25).cos();
        assert!((f.comp(0)[2] - expect).abs() < 1e-14);
        assert!((f.comp(1)[2] + 0.5 * expect).abs() < 1e-14);
    }

    #[test]
    fn validation_names_field() {
        let spec = ForcingSpec {
            f: ForcingExpr::Modes {
                modes: vec![TrigMode::constant(vec![1.0])],
            },
            g: ForcingExpr::Zero,
        };
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("forcing.f.modes[0].amplitude"), "{err}");
    }

    #[test]
    fn parses_tagged_toml_like_json() {
        let s = r#"{"f":{"kind":"zero"},"g":{"kind":"modes","modes":[{"amplitude":[0,0,1]}]}}"#;
        let spec: ForcingSpec = serde_json::from_str(s).unwrap();
        spec.validate().unwrap();
        assert!(!spec.is_zero());
    }
}
