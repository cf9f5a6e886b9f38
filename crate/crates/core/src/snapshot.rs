//! Field snapshots: a JSON header next to a raw little-endian `f64` payload.
//!
//! Samples are stored y-outer, x-inner, component-innermost. A state at index `k` is
//! written as `v_<k>.json/.bin` and `d_<k>.json/.bin`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::TorusGrid;
use crate::scalar::Real;
use crate::state::State;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub components: usize,
    pub dtype: String,
    pub time: f64,
}

pub const DTYPE: &str = "f64-le";

pub fn write_field<T: Real, const C: usize>(dir: &Path, name: &str, field: &Field<T, C>, time: f64) -> Result<()> {
    let g = field.grid();
    let header = SnapshotHeader {
        n: g.n(),
        length: g.length().to_f64_lossy(),
        components: C,
        dtype: DTYPE.to_string(),
        time,
    };
    let mut payload = Vec::with_capacity(g.len() * C * 8);
    for idx in 0..g.len() {
        for v in field.at(idx) {
            payload.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    // payload first, header last: a header on disk implies a complete payload
    fs::write(dir.join(format!("{name}.bin")), payload)?;
    let mut f = fs::File::create(dir.join(format!("{name}.json")))?;
    serde_json::to_writer(&mut f, &header)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_header(path: &Path) -> Result<SnapshotHeader> {
    let h: SnapshotHeader = serde_json::from_slice(&fs::read(path)?)?;
    if h.dtype != DTYPE {
        return Err(Error::Format(format!("{}: unsupported dtype {:?}", path.display(), h.dtype)));
    }
    Ok(h)
}

/// Reads `<name>.json/.bin` onto `grid` (which must match the header).
pub fn read_field<T: Real, const C: usize>(dir: &Path, name: &str, grid: &Arc<TorusGrid<T>>) -> Result<(Field<T, C>, f64)> {
    let hpath = dir.join(format!("{name}.json"));
    let h = read_header(&hpath)?;
    if h.n != grid.n() || (h.length - grid.length().to_f64_lossy()).abs() > 1e-12 * h.length.abs().max(1.0) {
        return Err(Error::GridMismatch(format!("{}: snapshot grid differs", hpath.display())));
    }
    if h.components != C {
        return Err(Error::Format(format!("{}: expected {C} components, found {}", hpath.display(), h.components)));
    }
    let bytes = fs::read(dir.join(format!("{name}.bin")))?;
    let expect = grid.len() * C * 8;
    if bytes.len() != expect {
        return Err(Error::Format(format!(
            "{name}.bin: payload has {} bytes, expected {expect} (truncated?)",
            bytes.len()
        )));
    }
    let mut comps: [Vec<T>; C] = std::array::from_fn(|_| Vec::with_capacity(grid.len()));
    for (k, chunk) in bytes.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        comps[k % C].push(T::lit(v));
    }
    Ok((Field::from_components(grid, comps)?, h.time))
}

pub fn state_names(index: usize) -> (String, String) {
    (format!("v_{index:06}"), format!("d_{index:06}"))
}

pub fn write_state<T: Real>(dir: &Path, index: usize, s: &State<T>) -> Result<()> {
    let (vn, dn) = state_names(index);
    write_field(dir, &vn, &s.v, s.t)?;
    write_field(dir, &dn, &s.d, s.t)
}

/// Snapshot indices present in `dir`, sorted.
pub fn list_states(dir: &Path) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(rest) = name.strip_prefix("v_").and_then(|r| r.strip_suffix(".json")) {
            if let Ok(k) = rest.parse::<usize>() {
                out.push(k);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Grid described by the first velocity snapshot in `dir`.
pub fn grid_of(dir: &Path) -> Result<Arc<TorusGrid<f64>>> {
    let first = *list_states(dir)?
        .first()
        .ok_or_else(|| Error::Format(format!("{}: no snapshots", dir.display())))?;
    let h = read_header(&dir.join(format!("{}.json", state_names(first).0)))?;
    TorusGrid::new(h.n, h.length)
}

/// Loads every stored state in time order.
pub fn read_trajectory<T: Real>(dir: &Path, grid: &Arc<TorusGrid<T>>) -> Result<Vec<State<T>>> {
    let idx = list_states(dir)?;
    if idx.is_empty() {
        return Err(Error::Format(format!("{}: no snapshots", dir.display())));
    }
    let mut out = Vec::with_capacity(idx.len());
    for k in idx {
        let (vn, dn) = state_names(k);
        let (v, t) = read_field::<T, 2>(dir, &vn, grid)?;
        let (d, td) = read_field::<T, 3>(dir, &dn, grid)?;
        if t != td {
            return Err(Error::Format(format!("snapshot {k}: velocity time {t} != director time {td}")));
        }
        out.push(State::new(v, d, t)?);
    }
    Ok(out)
}

pub fn snapshot_dir(out: &Path) -> PathBuf {
    out.join("snapshots")
}
