//! Minimal PNG rendering: energy curves and scalar heatmaps. No text is drawn; the
//! file names and the colour legend below carry the meaning.
//!
//! Energy plot colours: total E black, kinetic blue, elastic red, anisotropic green.
//! Heatmaps use a blue-to-yellow ramp between the field's own min and max.

use std::path::Path;

use image::{Rgb, RgbImage};
use nematic_core::energy::EnergyReport;
use nematic_core::snapshot::{self, read_field};
use nematic_core::TorusGrid;

use crate::Failure;

const W: u32 = 800;
const H: u32 = 500;
const MARGIN: u32 = 40;

fn save(img: &RgbImage, path: &Path) -> Result<(), Failure> {
    img.save(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn line(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), c: Rgb<u8>) {
    let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
    for s in 0..=steps {
        let a = s as f64 / steps as f64;
        let (x, y) = (x0 + a * (x1 - x0), y0 + a * (y1 - y0));
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, c);
        }
    }
}

/// Polyline chart of several series sharing the time axis.
pub fn line_chart(path: &Path, t: &[f64], series: &[(&[f64], Rgb<u8>)]) -> Result<(), Failure> {
    let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
    let (x_lo, y_lo) = (MARGIN as f64, (H - MARGIN) as f64);
    let (x_hi, y_hi) = ((W - MARGIN) as f64, MARGIN as f64);
    let axis = Rgb([90, 90, 90]);
    line(&mut img, (x_lo, y_lo), (x_hi, y_lo), axis);
    line(&mut img, (x_lo, y_lo), (x_lo, y_hi), axis);

    let finite = |v: &&f64| v.is_finite();
    let t0 = t.iter().filter(finite).copied().fold(f64::INFINITY, f64::min);
    let t1 = t.iter().filter(finite).copied().fold(f64::NEG_INFINITY, f64::max);
    let vals = series.iter().flat_map(|(s, _)| s.iter()).filter(finite);
    let (mut v0, mut v1) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(t0.is_finite() && v0.is_finite()) {
        return save(&img, path);
    }
    v0 = v0.min(0.0);
    if v1 <= v0 {
        v1 = v0 + 1.0;
    }
    let tspan = if t1 > t0 { t1 - t0 } else { 1.0 };
    let map = |tt: f64, v: f64| {
        (
            x_lo + (tt - t0) / tspan * (x_hi - x_lo),
            y_lo - (v - v0) / (v1 - v0) * (y_lo - y_hi),
        )
    };
    for (s, colour) in series {
        let pts: Vec<_> = t
            .iter()
            .zip(s.iter())
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| map(a, b))
            .collect();
        if pts.len() == 1 {
            line(&mut img, pts[0], pts[0], *colour);
        }
        for w in pts.windows(2) {
            line(&mut img, w[0], w[1], *colour);
        }
    }
    save(&img, path)
}

fn ramp(a: f64) -> Rgb<u8> {
    // dark blue -> teal -> yellow
    let a = a.clamp(0.0, 1.0);
    let stops = [(0.0, [48.0, 18.0, 110.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [250.0, 230.0, 35.0])];
    let (lo, hi) = if a <= 0.5 { (stops[0], stops[1]) } else { (stops[1], stops[2]) };
    let th = (a - lo.0) / (hi.0 - lo.0);
    let c = |k: usize| (lo.1[k] + th * (hi.1[k] - lo.1[k])).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Heatmap of an `n x n` sample array stored y-outer, x-inner; `y` grows upward.
pub fn heatmap(path: &Path, n: usize, values: &[f64]) -> Result<(), Failure> {
    let scale = (256 / n).max(1) as u32;
    let side = n as u32 * scale;
    let lo = values.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let img = RgbImage::from_fn(side, side, |px, py| {
        let i = (px / scale) as usize;
        let j = n - 1 - (py / scale) as usize;
        let v = values[j * n + i];
        if v.is_finite() {
            ramp((v - lo) / span)
        } else {
            Rgb([255, 0, 255])
        }
    });
    save(&img, path)
}

pub fn energy_plot(path: &Path, reports: &[EnergyReport]) -> Result<(), Failure> {
    let t: Vec<f64> = reports.iter().map(|r| r.t).collect();
    let col = |f: fn(&EnergyReport) -> f64| reports.iter().map(f).collect::<Vec<f64>>();
    let (e, k, el, an) = (col(|r| r.energy), col(|r| r.kinetic), col(|r| r.elastic), col(|r| r.anisotropic));
    line_chart(
        path,
        &t,
        &[
            (&e, Rgb([0, 0, 0])),
            (&k, Rgb([30, 80, 220])),
            (&el, Rgb([210, 40, 40])),
            (&an, Rgb([30, 160, 60])),
        ],
    )
}

/// `energy.png` plus `plots/speed_<k>.png` and `plots/d3_<k>.png` for every snapshot.
pub fn render_run(dir: &Path, reports: &[EnergyReport], snapshots: &[(usize, f64)]) -> Result<(), Failure> {
    energy_plot(&dir.join("energy.png"), reports)?;
    if snapshots.is_empty() {
        return Ok(());
    }
    let snap = snapshot::snapshot_dir(dir);
    let grid: std::sync::Arc<TorusGrid<f64>> = snapshot::grid_of(&snap)?;
    let plots = dir.join("plots");
    std::fs::create_dir_all(&plots)?;
    for &(k, _) in snapshots {
        let (vn, dn) = snapshot::state_names(k);
        let (v, _) = read_field::<f64, 2>(&snap, &vn, &grid)?;
        let (d, _) = read_field::<f64, 3>(&snap, &dn, &grid)?;
        heatmap(&plots.join(format!("speed_{k:06}.png")), grid.n(), v.magnitude().values())?;
        heatmap(&plots.join(format!("d3_{k:06}.png")), grid.n(), d.comp(2))?;
    }
    Ok(())
}
