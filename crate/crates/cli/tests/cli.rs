//! End-to-end checks of the `nematic2d` binary: exit codes, output files and config handling.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nematic2d::RunConfig;

const ENERGY_HEADER: &str = "t,E,kinetic,elastic,anisotropic,diss_v,diss_R,work_f,work_g,residual_eq,slack_ineq,Psi,Xi,ER_sup,ER_argmax_x,ER_argmax_y,detector_fired";

const SMALL_TG: &str = r#"
seed = 1

[grid]
n = 16

[scenario]
name = "taylor_green"

[stepper]
dt = 1e-3
T = 0.02
snapshot_every = 5

[output]
plots = false
"#;

fn bin(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nematic2d"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn workspace_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn run_writes_energy_csv_snapshots_and_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tg.toml", SMALL_TG);
    let out = tmp.path().join("run");
    let o = bin(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(out.join("energy.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(ENERGY_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.split(',').count() == 17));

    let resolved = RunConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(resolved.grid.n, 16);
    assert_eq!(resolved.output.dir.as_deref(), Some(out.as_path()));

    let snaps = out.join("snapshots");
    assert!(snaps.join("v_000000.json").exists());
    assert!(snaps.join("d_000004.bin").exists());
    let bytes = fs::metadata(snaps.join("d_000004.bin")).unwrap().len();
    assert_eq!(bytes, 3 * 16 * 16 * 8);
}

#[test]
fn nonpositive_dt_is_rejected_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    for dt in ["0.0", "-1e-3"] {
        let text = SMALL_TG.replace("dt = 1e-3", &format!("dt = {dt}"));
        let cfg = write_config(tmp.path(), "bad.toml", &text);
        let o = bin(&["run"], &cfg, &tmp.path().join("bad"));
        assert_eq!(o.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&o.stderr).contains("stepper.dt"));
    }
}

#[test]
fn unknown_field_names_its_path() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL_TG.replace("T = 0.02", "T = 0.02\nbogus = 1");
    let cfg = write_config(tmp.path(), "bad.toml", &text);
    let o = bin(&["run"], &cfg, &tmp.path().join("bad"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stepper"));
}

#[test]
fn detector_halt_exits_2_and_logs_fire_event() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("halt");
    let mut text = fs::read_to_string(workspace_config("bubble_halt.toml")).unwrap();
    text = text.replace("n = 64", "n = 32").replace("R = 0.3", "R = 0.4");
    text.push_str("plots = false\n");
    let cfg = write_config(tmp.path(), "halt.toml", &text);
    let o = bin(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let log = fs::read_to_string(out.join("detector.jsonl")).unwrap();
    let first = log.lines().next().expect("no detector event");
    let ev: serde_json::Value = serde_json::from_str(first).unwrap();
    assert_eq!(ev["event"], "fire");
    let sup = ev["ER_sup"].as_f64().unwrap();
    let eps = ev["eps"].as_f64().unwrap();
    assert_eq!(eps, 0.5);
    assert_eq!(ev["R"].as_f64().unwrap(), 0.4);
    assert!(sup > 2.0 * eps * eps);
    assert!(ev["t"].is_number());
}

#[test]
fn verify_passes_on_a_clean_run_and_respects_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tg.toml", SMALL_TG);
    let out = tmp.path().join("run");
    assert_eq!(bin(&["run"], &cfg, &out).status.code(), Some(0));

    let o = Command::new(env!("CARGO_BIN_EXE_nematic2d"))
        .args(["verify", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let verdict: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["passed"], true);
    assert_eq!(verdict["checks"].as_array().unwrap().len(), 6);
    for f in ["pressure.csv", "zcheck.csv", "smalldata.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let only = tmp.path().join("only");
    assert_eq!(bin(&["run"], &cfg, &only).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_nematic2d"))
        .args(["verify", "--only", "zcheck", "--out"])
        .arg(&only)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(only.join("zcheck.csv").exists());
    assert!(!only.join("pressure.csv").exists());
    assert!(!only.join("smalldata.csv").exists());
    let verdict: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(only.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["checks"].as_array().unwrap().len(), 1);
}

#[test]
fn verify_rejects_truncated_snapshot_and_unknown_check() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tg.toml", SMALL_TG);
    let out = tmp.path().join("run");
    assert_eq!(bin(&["run"], &cfg, &out).status.code(), Some(0));

    let o = Command::new(env!("CARGO_BIN_EXE_nematic2d"))
        .args(["verify", "--only", "nonsense", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--only"));

    let bin_path = out.join("snapshots").join("v_000002.bin");
    let bytes = fs::read(&bin_path).unwrap();
    fs::write(&bin_path, &bytes[..bytes.len() - 8]).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nematic2d"))
        .args(["verify", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn picard_converges_on_small_data_and_diverges_on_large() {
    let tmp = tempfile::tempdir().unwrap();
    let small = tmp.path().join("small");
    let o = bin(&["picard"], &workspace_config("picard_small.toml"), &small);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(small.join("picard.csv")).unwrap();
    assert!(csv.starts_with("iteration,distance,factor\n"));

    let large = tmp.path().join("large");
    assert_eq!(bin(&["picard"], &workspace_config("picard_large.toml"), &large).status.code(), Some(4));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(large.join("picard.json")).unwrap()).unwrap();
    assert_eq!(summary["converged"], false);
}

#[test]
fn picard_on_rest_state_converges_in_one_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL_TG.replace("\"taylor_green\"", "\"zero\"");
    let cfg = write_config(tmp.path(), "zero.toml", &text);
    let out = tmp.path().join("zero");
    assert_eq!(bin(&["picard"], &cfg, &out).status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("picard.json")).unwrap()).unwrap();
    assert_eq!(summary["iterations"], 1);
}

#[test]
fn sweep_runs_each_value_in_its_own_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(workspace_config("sweep_dt.toml"))
        .unwrap()
        .replace("n = 32", "n = 16")
        .replace("T = 0.2", "T = 0.02");
    let cfg = write_config(tmp.path(), "sweep.toml", &text);
    let root = tmp.path().join("sweep");
    let o = Command::new(env!("CARGO_BIN_EXE_nematic2d"))
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&root)
        .env("NEMATIC2D_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for (i, v) in ["0.004", "0.002", "0.001"].iter().enumerate() {
        let dir = root.join(format!("{i:03}_stepper.dt={v}"));
        assert!(dir.join("energy.csv").exists(), "{}", dir.display());
        let resolved = RunConfig::load(&dir.join("config.toml")).unwrap();
        assert_eq!(resolved.stepper.dt, v.parse::<f64>().unwrap());
        assert!(resolved.sweep.is_none());
    }
    let entries: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(entries.as_array().unwrap().len(), 3);
}

#[test]
fn config_round_trip_is_idempotent_for_every_shipped_config() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let once = cfg.to_toml();
        let reparsed = RunConfig::from_value(toml::from_str(&once).unwrap()).unwrap();
        assert_eq!(reparsed, cfg, "{}", path.display());
        assert_eq!(reparsed.to_toml(), once, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 6);
}

#[test]
fn json_config_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "tg.json",
        r#"{"grid":{"n":16},"scenario":{"name":"taylor_green"},
            "stepper":{"dt":1e-3,"T":0.005},"output":{"plots":false}}"#,
    );
    let out = tmp.path().join("json");
    let o = bin(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("config.toml").exists());
}

#[test]
fn plots_are_written_when_enabled() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL_TG.replace("plots = false", "plots = true");
    let cfg = write_config(tmp.path(), "tg.toml", &text);
    let out = tmp.path().join("plots");
    assert_eq!(bin(&["run"], &cfg, &out).status.code(), Some(0));
    let png = fs::read(out.join("energy.png")).unwrap();
    assert_eq!(&png[..4], b"\x89PNG");
    let plots: Vec<_> = fs::read_dir(out.join("plots")).unwrap().collect();
    assert!(plots.len() >= 2);
}
