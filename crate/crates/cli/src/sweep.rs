//! `nematic2d sweep`: independent runs over the values of one config key, executed
//! concurrently. Each run gets `<out>/<index>_<key>=<value>/`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{set_path, ConfigError};
use crate::run::{execute, write_json};
use crate::{exit, out_dir, thread_cap, Failure, Overrides, RunConfig};

#[derive(Debug, Serialize)]
pub struct SweepEntry {
    pub value: String,
    pub dir: PathBuf,
    pub exit_code: i32,
    pub message: Option<String>,
}

fn label(v: &toml::Value) -> String {
    let s = match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

/// Expands the raw document into one validated config per sweep value.
pub fn expand(raw: &toml::Value, overrides: &Overrides) -> Result<Vec<(String, RunConfig)>, Failure> {
    let base = RunConfig::from_value(raw.clone())?;
    let sweep = base.sweep.clone().ok_or_else(|| ConfigError {
        path: "sweep".into(),
        message: "sweep needs a [sweep] section with `param` and `values`".into(),
    })?;
    let root = overrides.out.clone().unwrap_or_else(|| out_dir(&base));
    let mut out = Vec::with_capacity(sweep.values.len());
    for (i, value) in sweep.values.iter().enumerate() {
        let mut doc = raw.clone();
        set_path(&mut doc, &sweep.param, value.clone())?;
        if let Some(t) = doc.as_table_mut() {
            t.remove("sweep");
        }
        let mut cfg = RunConfig::from_value(doc).map_err(|e| ConfigError {
            path: format!("sweep.values[{i}] -> {}", e.path),
            message: e.message,
        })?;
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        let name = format!("{i:03}_{}={}", sweep.param, label(value));
        cfg.output.dir = Some(root.join(&name));
        out.push((label(value), cfg));
    }
    Ok(out)
}

/// Runs every expanded config and returns one entry per run, in sweep order.
pub fn run_all(configs: Vec<(String, RunConfig)>, root: &Path) -> Result<Vec<SweepEntry>, Failure> {
    std::fs::create_dir_all(root)?;
    let work = |(value, cfg): (String, RunConfig)| {
        let dir = out_dir(&cfg);
        let (exit_code, message) = match execute(&cfg) {
            Ok(p) => match p.summary.halted {
                Some(reason) => (exit::DETECTOR_HALT, Some(reason)),
                None => (exit::OK, None),
            },
            Err(e) => (e.code(), Some(e.to_string())),
        };
        SweepEntry {
            value,
            dir,
            exit_code,
            message,
        }
    };
    let threads = thread_cap().unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Input(e.to_string()))?;
    let entries: Vec<SweepEntry> = pool.install(|| configs.into_par_iter().map(work).collect());
    write_json(&root.join("sweep.json"), &entries)?;
    Ok(entries)
}

/// Expands and runs a sweep document; the caller reports the worst exit code.
pub fn cli_sweep(raw: &toml::Value, overrides: &Overrides) -> Result<Vec<SweepEntry>, Failure> {
    let configs = expand(raw, overrides)?;
    let root = configs
        .first()
        .and_then(|(_, c)| out_dir(c).parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("out"));
    run_all(configs, &root)
}
