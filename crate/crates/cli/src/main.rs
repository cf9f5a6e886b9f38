use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nematic2d::config::ConfigError;
use nematic2d::{exit, picard, run, sweep, verify, Failure, Overrides, RunConfig, RESOLVED_CONFIG};

#[derive(Parser)]
#[command(name = "nematic2d", version, about = "2D nematic liquid-crystal flow on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML or JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output (or, for verify, run) directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write energy log, snapshots and plots
    Run(Common),
    /// Run post-hoc diagnostics on a finished run directory
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of: pressure, zcheck, smalldata, struwe, apriori, budget
        #[arg(long)]
        only: Option<String>,
    },
    /// Fixed-point iteration on the initial data of a scenario
    Picard(Common),
    /// Run the values of the config's [sweep] section concurrently
    Sweep(Common),
}

fn overrides(c: &Common) -> Overrides {
    Overrides { out: c.out.clone(), seed: c.seed }
}

fn require_config(c: &Common) -> Result<PathBuf, Failure> {
    c.config.clone().ok_or_else(|| {
        Failure::Config(ConfigError {
            path: "--config".into(),
            message: "a configuration file is required".into(),
        })
    })
}

fn load(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&require_config(c)?)?;
    overrides(c).apply(&mut cfg);
    Ok(cfg)
}

fn dispatch(cmd: Command) -> Result<i32, Failure> {
    match cmd {
        Command::Run(c) => {
            let s = run::cli_run(&load(&c)?)?;
            println!("run finished: {} steps to t = {}, output in {}", s.steps, s.t_final, s.out_dir.display());
            Ok(exit::OK)
        }
        Command::Verify { common, only } => {
            // the run directory's own resolved config is the default
            let dir = match (&common.out, &common.config) {
                (Some(d), _) => d.clone(),
                (None, Some(_)) => nematic2d::out_dir(&load(&common)?),
                (None, None) => return Err(require_config(&common).unwrap_err()),
            };
            let cfg = match &common.config {
                Some(_) => load(&common)?,
                None => {
                    let path = dir.join(RESOLVED_CONFIG);
                    if !path.is_file() {
                        return Err(Failure::Input(format!("{}: not a run directory", dir.display())));
                    }
                    RunConfig::load(&path)?
                }
            };
            let v = verify::cli_verify(&cfg, &dir, only.as_deref())?;
            for c in &v.checks {
                println!("{:<10} {}", c.name, if c.passed { "pass" } else { "FAIL" });
            }
            Ok(exit::OK)
        }
        Command::Picard(c) => {
            let s = picard::cli_picard(&load(&c)?)?;
            println!("Picard converged in {} sweeps (max factor {:.3e})", s.iterations, s.max_factor);
            Ok(exit::OK)
        }
        Command::Sweep(c) => {
            let raw = RunConfig::load_value(&require_config(&c)?)?;
            let entries = sweep::cli_sweep(&raw, &overrides(&c))?;
            for e in &entries {
                println!("{:<24} exit {} {}", e.value, e.exit_code, e.dir.display());
            }
            Ok(entries.iter().map(|e| e.exit_code).max().unwrap_or(exit::OK))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("nematic2d: {e}");
            e.code()
        }
    };
    ExitCode::from(code as u8)
}
