//! Initial-data library and seeded random band-limited fields.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{Field, Spectrum, VectorField2, VectorField3};
use crate::forcing::{ForcingExpr, ForcingSpec, TrigMode};
use crate::grid::TorusGrid;
use crate::ops;
use crate::scalar::Real;
use crate::state::{renormalize, State};

pub const SCENARIOS: &[&str] = &[
    "taylor_green",
    "uniform_director_ode",
    "equator_harmonic",
    "director_bubble",
    "forced_rotation",
    "random_flow",
    "zero",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real random field whose spectrum is supported on `|kx|, |ky| <= kmax`, with
/// `|k|^{-1}`-weighted Gaussian-ish amplitudes. The result has zero mean and is
/// scaled so its largest sample is `amplitude`.
pub fn random_band_limited<T: Real, const C: usize>(
    grid: &Arc<TorusGrid<T>>,
    kmax: i64,
    amplitude: f64,
    rng: &mut impl Rng,
) -> Field<T, C> {
    let mut spec = Spectrum::<T, C>::zeros(grid);
    let n2 = grid.len() as f64;
    for c in 0..C {
        for ky in -kmax..=kmax {
            for kx in -kmax..=kmax {
                // fill half the plane, mirror the rest
                if ky < 0 || (ky == 0 && kx <= 0) {
                    continue;
                }
                let k = ((kx * kx + ky * ky) as f64).sqrt();
                let a: f64 = rng.gen_range(-1.0..1.0) / k;
                let b: f64 = rng.gen_range(-1.0..1.0) / k;
                let z = Complex::new(T::lit(a * n2), T::lit(b * n2));
                spec.comp_mut(c)[grid.mode_index(kx, ky)] = z;
                spec.comp_mut(c)[grid.mode_index(-kx, -ky)] = z.conj();
            }
        }
    }
    let mut f = spec.inverse();
    let m = f.max_abs();
    if m > T::zero() {
        f.scale(T::lit(amplitude) / m);
    }
    f
}

/// Divergence-free, mean-zero random velocity with max sample `amplitude`.
pub fn random_divergence_free<T: Real>(
    grid: &Arc<TorusGrid<T>>,
    kmax: i64,
    amplitude: f64,
    rng: &mut impl Rng,
) -> VectorField2<T> {
    let raw: VectorField2<T> = random_band_limited(grid, kmax, 1.0, rng);
    let mut s = ops::leray_spec(&raw.spectrum());
    s.zero_mean();
    let mut v = s.inverse();
    let m = v.max_abs();
    if m > T::zero() {
        v.scale(T::lit(amplitude) / m);
    }
    v
}

/// Unit director `normalize(axis + tilt * random)`; smooth when `tilt < 1`.
pub fn random_unit_director<T: Real>(
    grid: &Arc<TorusGrid<T>>,
    kmax: i64,
    tilt: f64,
    axis: [f64; 3],
    rng: &mut impl Rng,
) -> VectorField3<T> {
    let mut d: VectorField3<T> = random_band_limited(grid, kmax, tilt, rng);
    for idx in 0..grid.len() {
        let cur = d.at(idx);
        d.set(idx, std::array::from_fn(|k| cur[k] + T::lit(axis[k])));
    }
    renormalize(&mut d).expect("tilt below axis length keeps |d| > 0");
    d
}

/// Named scenario parameters; unknown keys fall back to defaults.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub amplitude: Option<f64>,
    pub c0: Option<f64>,
    #[serde(rename = "H")]
    pub h: Option<[f64; 3]>,
    pub k: Option<i64>,
    pub tilt: Option<f64>,
    pub scale: Option<f64>,
    pub center: Option<[f64; 2]>,
    pub g: Option<[f64; 3]>,
    pub director: Option<[f64; 3]>,
    pub kmax: Option<i64>,
}

pub struct Scenario<T: Real> {
    pub state: State<T>,
    pub forcing: ForcingSpec,
}

fn unit(a: [f64; 3]) -> [f64; 3] {
    let l = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    a.map(|c| c / l)
}

/// Builds initial data for scenario `name`.
///
/// * `taylor_green`: `v = A (sin x cos y, -cos x sin y)` (scaled to the period), `d` constant.
/// * `uniform_director_ode`: `v = 0`, uniform `d` with `d . H/|H| = c0`.
/// * `equator_harmonic`: `d = (cos kx, sin kx, 0)` tilted out of plane by `tilt * sin y`.
/// * `director_bubble`: degree-one stereographic bubble of width `scale`, cut off to `e3`.
/// * `forced_rotation`: uniform `d`, constant director forcing `g`.
/// * `random_flow`: seeded random velocity of max `amplitude` and director tilted by `tilt`.
/// * `zero`: `v = 0`, `d = e3`.
pub fn scenario_build<T: Real>(
    name: &str,
    params: &ScenarioParams,
    grid: &Arc<TorusGrid<T>>,
    seed: u64,
) -> Result<Scenario<T>> {
    let l = grid.length().to_f64_lossy();
    let w = std::f64::consts::TAU / l;
    let director = params.director.map(unit).unwrap_or([0.0, 0.0, 1.0]);
    let (state, forcing) = match name {
        "taylor_green" => {
            let a = params.amplitude.unwrap_or(1.0);
            let v = VectorField2::from_fn(grid, |x, y| {
                let (x, y) = (w * x.to_f64_lossy(), w * y.to_f64_lossy());
                [T::lit(a * x.sin() * y.cos()), T::lit(-a * x.cos() * y.sin())]
            });
            let d = VectorField3::uniform(grid, director.map(T::lit));
            (State::new(v, d, 0.0)?, ForcingSpec::zero())
        }
        "uniform_director_ode" => {
            let h = params.h.unwrap_or([0.0, 0.0, 1.0]);
            let c0 = params.c0.unwrap_or(0.1);
            if !(-1.0..=1.0).contains(&c0) {
                return Err(Error::param("scenario.params.c0", "must lie in [-1, 1]"));
            }
            let hu = unit(h);
            // any unit vector orthogonal to H
            let trial = if hu[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let p = {
                let dp = trial[0] * hu[0] + trial[1] * hu[1] + trial[2] * hu[2];
                unit([trial[0] - dp * hu[0], trial[1] - dp * hu[1], trial[2] - dp * hu[2]])
            };
            let s = (1.0 - c0 * c0).sqrt();
            let d0 = std::array::from_fn(|k| c0 * hu[k] + s * p[k]);
            let v = VectorField2::zeros(grid);
            let d = VectorField3::uniform(grid, d0.map(T::lit));
            (State::new(v, d, 0.0)?, ForcingSpec::zero())
        }
        "equator_harmonic" => {
            let k = params.k.unwrap_or(1) as f64;
            let tilt = params.tilt.unwrap_or(0.0);
            let d = VectorField3::from_fn(grid, |x, y| {
                let (x, y) = (w * x.to_f64_lossy(), w * y.to_f64_lossy());
                let beta = tilt * y.sin();
                [
                    T::lit((k * x).cos() * beta.cos()),
                    T::lit((k * x).sin() * beta.cos()),
                    T::lit(beta.sin()),
                ]
            });
            (State::new(VectorField2::zeros(grid), d, 0.0)?, ForcingSpec::zero())
        }
        "director_bubble" => {
            let scale = params.scale.unwrap_or(0.1);
            if scale <= 0.0 {
                return Err(Error::param("scenario.params.scale", "must be positive"));
            }
            let c = params.center.unwrap_or([l / 2.0, l / 2.0]);
            let r_cut = l / 4.0;
            let d = VectorField3::from_fn(grid, |x, y| {
                let (x, y) = (x.to_f64_lossy(), y.to_f64_lossy());
                let dx = periodic_offset(x - c[0], l);
                let dy = periodic_offset(y - c[1], l);
                let r2 = dx * dx + dy * dy;
                // blend the bubble into e3 outside r_cut; the bubble is already near e3 there
                let chi = smooth_cutoff(r2.sqrt() / r_cut);
                let s2 = scale * scale;
                let denom = s2 + r2;
                let bubble = [2.0 * scale * dx / denom, 2.0 * scale * dy / denom, (r2 - s2) / denom];
                [
                    T::lit(chi * bubble[0]),
                    T::lit(chi * bubble[1]),
                    T::lit(chi * bubble[2] + 1.0 - chi),
                ]
            });
            let mut d = d;
            renormalize(&mut d)?;
            (State::new(VectorField2::zeros(grid), d, 0.0)?, ForcingSpec::zero())
        }
        "forced_rotation" => {
            let g = params.g.unwrap_or([0.0, 0.0, 1.0]);
            let d0 = params.director.map(unit).unwrap_or([1.0, 0.0, 0.0]);
            let forcing = ForcingSpec {
                f: ForcingExpr::Zero,
                g: ForcingExpr::Modes {
                    modes: vec![TrigMode::constant(g.to_vec())],
                },
            };
            let d = VectorField3::uniform(grid, d0.map(T::lit));
            (State::new(VectorField2::zeros(grid), d, 0.0)?, forcing)
        }
        "random_flow" => {
            let mut r = rng(seed);
            let kmax = params.kmax.unwrap_or(4);
            let v = random_divergence_free(grid, kmax, params.amplitude.unwrap_or(1.0), &mut r);
            let d = random_unit_director(grid, kmax, params.tilt.unwrap_or(0.5), director, &mut r);
            (State::new(v, d, 0.0)?, ForcingSpec::zero())
        }
        "zero" => {
            let d = VectorField3::uniform(grid, director.map(T::lit));
            (State::new(VectorField2::zeros(grid), d, 0.0)?, ForcingSpec::zero())
        }
        other => {
            return Err(Error::UnknownScenario {
                name: other.to_string(),
                known: SCENARIOS.join(", "),
            })
        }
    };
    Ok(Scenario {
        state: state.enforced()?,
        forcing,
    })
}

fn periodic_offset(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

/// `C^\infty` step: 1 for `s <= 0.5`, 0 for `s >= 1`.
fn smooth_cutoff(s: f64) -> f64 {
    let u = ((s - 0.5) / 0.5).clamp(0.0, 1.0);
    if u <= 0.0 {
        return 1.0;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    b / (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn taylor_green_energy_and_divergence() {
        let g = TorusGrid::<f64>::new(32, TAU).unwrap();
        let s = scenario_build("taylor_green", &ScenarioParams::default(), &g, 0).unwrap();
        assert!(s.state.divergence() < 1e-12);
        let e = 0.5 * ops::l2_sq(&s.state.v);
        assert!((e - PI * PI).abs() < 1e-11);
    }

    #[test]
    fn uniform_director_projection() {
        let g = TorusGrid::<f64>::new(16, TAU).unwrap();
        let p = ScenarioParams {
            c0: Some(0.1),
            h: Some([0.0, 0.0, 1.0]),
            ..Default::default()
        };
        let s = scenario_build("uniform_director_ode", &p, &g, 0).unwrap();
        for idx in 0..g.len() {
            assert!((s.state.d.at(idx)[2] - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn bubble_is_unit_and_concentrated() {
        let g = TorusGrid::<f64>::new(64, TAU).unwrap();
        let p = ScenarioParams {
            scale: Some(0.1),
            ..Default::default()
        };
        let s = scenario_build("director_bubble", &p, &g, 0).unwrap();
        assert!(s.state.sphere_defect() <= 1e-12);
        // far field is e3
        assert!((s.state.d.at(0)[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_scenario_lists_alternatives() {
        let g = TorusGrid::<f64>::new(8, 1.0).unwrap();
        let err = scenario_build::<f64>("nope", &ScenarioParams::default(), &g, 0).err().unwrap();
        assert!(err.to_string().contains("taylor_green"));
    }

    #[test]
    fn random_fields_are_seeded() {
        let g = TorusGrid::<f64>::new(16, TAU).unwrap();
        let a: VectorField2<f64> = random_divergence_free(&g, 3, 1.0, &mut rng(7));
        let b: VectorField2<f64> = random_divergence_free(&g, 3, 1.0, &mut rng(7));
        assert_eq!(a.comp(0), b.comp(0));
        assert!(ops::spectral_divergence_max(&a.spectrum()) < 1e-13);
        assert!((a.max_abs() - 1.0).abs() < 1e-12);
    }
}
