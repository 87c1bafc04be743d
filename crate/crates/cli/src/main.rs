//! `isobgk`: command-line driver for the BGK relaxation experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isobgk::config::RunConfig;
use isobgk::experiments::{self, HydroRow};
use isobgk::output::{prepare_out_dir, write_csv, write_json, CsvSink};
use isobgk::Error;
use serde_json::json;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "isobgk",
    version,
    about = "BGK relaxation model of isentropic gas dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat JSON configuration with dotted keys.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output.dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the solver; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Identity suite for the equilibrium and perturbation framework.
    Verify(Common),
    /// Generic simulation: diagnostics CSV and snapshots.
    Run(Common),
    /// Decay run with an exponential fit of the energy functional.
    Decay(Common),
    /// Kinetic-versus-Euler error table over the configured ε list.
    HydroLimit(Common),
}

/// Failure classes mapped to exit codes.
enum Failure {
    Checks(String),
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_runtime_abort() => EXIT_ABORT,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_ABORT,
        _ => EXIT_CONFIG,
    }
}

fn setup(common: &Common, needs_out: bool) -> Result<(RunConfig, Option<PathBuf>), Error> {
    let cfg = RunConfig::from_path(&common.config)?;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(config_error("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_error("--threads", e.to_string()))?;
    }
    let out = common.out.clone().or_else(|| cfg.out_dir.clone());
    match &out {
        Some(dir) => {
            prepare_out_dir(dir, common.overwrite)?;
            std::fs::write(dir.join("config.json"), cfg.to_json_string())?;
        }
        None if needs_out => {
            return Err(config_error(
                "--out",
                "no output directory (pass --out or set output.dir)",
            ));
        }
        None => {}
    }
    Ok((cfg, out))
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn verify(common: &Common) -> Result<(), Failure> {
    let (cfg, out) = setup(common, false)?;
    let report = experiments::verify(&cfg)?;
    for c in &report.checks {
        eprintln!(
            "{:<24} {} measured {:.3e} tolerance {:.1e}  {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.measured,
            c.tolerance,
            c.detail
        );
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(Error::from)?
    );
    if let Some(dir) = out {
        write_json(&dir.join("verify.json"), &report)?;
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(Failure::Checks(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

fn run(common: &Common) -> Result<(), Failure> {
    let (cfg, out) = setup(common, true)?;
    let dir = out.expect("checked in setup");
    let snapshots = dir.join("snapshots");
    std::fs::create_dir_all(&snapshots).map_err(Error::from)?;
    let mut csv = CsvSink::create(
        &dir.join("diagnostics.csv"),
        &experiments::diagnostics_header(&cfg),
    )?;
    let sim = experiments::run(&cfg, &mut csv, &snapshots)?;
    let summary = json!({
        "final_time": sim.final_time,
        "steps": sim.steps,
        "records": sim.records.len(),
        "snapshots": sim.snapshots.iter().map(|p| rel(&dir, p)).collect::<Vec<_>>(),
        "abort": sim.abort.as_ref().map(|e| e.to_string()),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    sim.abort.map_or(Ok(()), |e| Err(e.into()))
}

fn rel(base: &Path, p: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).display().to_string()
}

fn decay(common: &Common) -> Result<(), Failure> {
    let (cfg, out) = setup(common, true)?;
    let dir = out.expect("checked in setup");
    let mut csv = CsvSink::create(
        &dir.join("trajectory.csv"),
        &experiments::diagnostics_header(&cfg),
    )?;
    let outcome = experiments::decay(&cfg, Some(&mut csv))?;
    let sim = &outcome.simulation;
    let (fit, fit_error) = match &outcome.fit {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = json!({
        "fit": fit,
        "fit_error": fit_error,
        "window": [cfg.decay_window.0, cfg.decay_window.1],
        "energy_ratio": outcome.energy_ratio,
        "conservation": outcome.conservation,
        "max_entropy_increase": sim.max_entropy_increase,
        "entropy_violations": sim.entropy_violations,
        "final_time": sim.final_time,
        "steps": sim.steps,
        "abort": sim.abort.as_ref().map(|e| e.to_string()),
    });
    write_json(&dir.join("decay_fit.json"), &summary)?;
    if let Some(e) = outcome.simulation.abort {
        return Err(e.into());
    }
    match &outcome.fit {
        Ok(f) => {
            eprintln!(
                "lambda = {:.6e}, R^2 = {:.6}, {} samples",
                f.lambda, f.r_squared, f.samples
            );
            Ok(())
        }
        Err(e) => Err(Failure::Checks(e.to_string())),
    }
}

fn hydro_limit(common: &Common) -> Result<(), Failure> {
    let (cfg, out) = setup(common, true)?;
    let dir = out.expect("checked in setup");
    let rows = experiments::hydro_limit(&cfg)?;
    let header: Vec<String> = HydroRow::HEADER.iter().map(|s| s.to_string()).collect();
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.epsilon, r.l1_rho, r.l1_u])
        .collect();
    write_csv(&dir.join("hydro_limit.csv"), &header, &table)?;
    for r in &rows {
        eprintln!(
            "epsilon {:.1e}: L1 rho {:.4e}, L1 u {:.4e}",
            r.epsilon, r.l1_rho, r.l1_u
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(c) => verify(c),
        Command::Run(c) => run(c),
        Command::Decay(c) => decay(c),
        Command::HydroLimit(c) => hydro_limit(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
