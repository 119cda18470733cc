//! `fracstab simulate|stability|sweep --config <path> [--out <dir>]`
//!
//! Exit codes: 0 success (or stable), 1 runtime failure, 2 bad invocation or
//! config, 3 simulation stopped by the blowup guard, 4 equilibrium not
//! asymptotically stable, 5 no equilibrium found.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{ConfigError, ScenarioConfig};
use crate::control::{gain_sweep, make_controlled, SweepPoint};
use crate::integrator::{integrate, Trajectory};
use crate::stability::{analyze, find_equilibria, NewtonOptions, StabilityReport, Verdict};
use crate::system::{EquilibriumState, FractionalSystem};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_UNSTABLE: i32 = 4;
pub const EXIT_NO_EQUILIBRIUM: i32 = 5;

pub const THREADS_ENV: &str = "FRACSTAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "fracstab",
    version,
    about = "Stability and feedback control of fractional-order systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the model and write a trajectory CSV.
    Simulate(Args),
    /// Locate equilibria and apply the Matignon test.
    Stability(Args),
    /// Classify a grid of feedback gains.
    Sweep(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    NoEquilibrium(String),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<crate::error::Error> for CliError {
    fn from(e: crate::error::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(&a.config, &a.out),
        Command::Stability(a) => cmd_stability(&a.config, &a.out),
        Command::Sweep(a) => cmd_sweep(&a.config, &a.out),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Config(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(CliError::NoEquilibrium(msg)) => {
            eprintln!("error: {msg}");
            EXIT_NO_EQUILIBRIUM
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn output_path(
    out: &Path,
    configured: Option<&String>,
    default: &str,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out)?;
    Ok(out.join(configured.map(String::as_str).unwrap_or(default)))
}

/// Full-precision decimal text for CSV cells.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a trajectory as `t,x1,...,xn` CSV.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.states.first().map_or(0, Vec::len);
    let mut s = String::from("t");
    for i in 1..=n {
        let _ = write!(s, ",x{i}");
    }
    s.push('\n');
    for (t, x) in traj.times.iter().zip(&traj.states) {
        s.push_str(&fmt_num(*t));
        for v in x {
            s.push(',');
            s.push_str(&fmt_num(*v));
        }
        s.push('\n');
    }
    s
}

/// Renders sweep points as CSV with the listed gain columns, then
/// `verdict,q_tilde`.
pub fn sweep_csv(points: &[SweepPoint], columns: &[usize]) -> String {
    let mut s = String::new();
    for &c in columns {
        let _ = write!(s, "c{},", c + 1);
    }
    s.push_str("verdict,q_tilde\n");
    for p in points {
        for &c in columns {
            s.push_str(&fmt_num(p.gains[c]));
            s.push(',');
        }
        let _ = writeln!(s, "{},{}", p.verdict, fmt_num(p.critical_order));
    }
    s
}

/// Closed-loop system when `gains` are configured, else the model itself.
fn configured_system(cfg: &ScenarioConfig) -> Result<FractionalSystem, CliError> {
    let system = cfg.system()?;
    match cfg.gains(system.dim())? {
        None => Ok(system),
        Some(gains) => {
            let xe = match cfg.family_equilibrium() {
                Some(x) => x,
                None => first_equilibrium(&system, cfg)?,
            };
            let eq = EquilibriumState::certify(&system, xe).map_err(|e| ConfigError {
                field: "gains".into(),
                message: format!("feedback target is not an equilibrium: {e}"),
            })?;
            Ok(make_controlled(&system, &eq, &gains)?.system().clone())
        }
    }
}

fn first_equilibrium(
    system: &FractionalSystem,
    cfg: &ScenarioConfig,
) -> Result<Vec<f64>, CliError> {
    let seeds = cfg.seeds.clone().ok_or_else(|| ConfigError {
        field: "seeds".into(),
        message: "needed to locate the equilibrium".into(),
    })?;
    find_equilibria(system, &seeds, NewtonOptions::default())
        .equilibria
        .into_iter()
        .next()
        .map(|e| e.x)
        .ok_or_else(|| CliError::NoEquilibrium("no equilibrium found from the given seeds".into()))
}

fn cmd_simulate(config: &Path, out: &Path) -> Result<i32, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let q = cfg.order()?;
    let system = configured_system(&cfg)?;
    let x0 = cfg.initial_state(system.dim())?;
    let icfg = cfg.integration()?;
    let traj = integrate(&system, q, &x0, &icfg)?;
    let path = output_path(out, cfg.outputs.trajectory.as_ref(), "trajectory.csv")?;
    fs::write(&path, trajectory_csv(&traj))?;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(
        stdout,
        "simulate: {} rows -> {} (t_last = {}){}",
        traj.len(),
        path.display(),
        traj.last_time(),
        traj.terminated_early
            .map(|t| format!(", stopped early: {t}"))
            .unwrap_or_default()
    );
    Ok(if traj.terminated_early.is_some() {
        EXIT_DIVERGED
    } else {
        EXIT_OK
    })
}

#[derive(Debug, Serialize)]
struct EquilibriumEntry {
    x_e: Vec<f64>,
    residual: f64,
    report: StabilityReport,
}

#[derive(Debug, Serialize)]
struct StabilityDocument {
    model: String,
    params: std::collections::BTreeMap<String, f64>,
    q: f64,
    equilibria: Vec<EquilibriumEntry>,
    all_asymptotically_stable: bool,
}

fn cmd_stability(config: &Path, out: &Path) -> Result<i32, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let q = cfg.order()?;
    let system = configured_system(&cfg)?;

    let equilibria: Vec<EquilibriumState> = match cfg.family_equilibrium() {
        Some(x) => vec![EquilibriumState::certify(&system, x)?],
        None => {
            let seeds = cfg.seeds.clone().ok_or_else(|| ConfigError {
                field: "seeds".into(),
                message: "missing; needed to locate equilibria".into(),
            })?;
            if seeds.iter().any(|s| s.len() != system.dim()) {
                return Err(ConfigError {
                    field: "seeds".into(),
                    message: format!("every seed needs {} entries", system.dim()),
                }
                .into());
            }
            find_equilibria(&system, &seeds, NewtonOptions::default()).equilibria
        }
    };
    if equilibria.is_empty() {
        return Err(CliError::NoEquilibrium(
            "no equilibrium found from the given seeds".into(),
        ));
    }

    let mut entries = Vec::with_capacity(equilibria.len());
    for eq in equilibria {
        let report = analyze(&system, &eq, q)?;
        entries.push(EquilibriumEntry {
            x_e: eq.x,
            residual: eq.residual,
            report,
        });
    }
    let all_stable = entries
        .iter()
        .all(|e| e.report.verdict == Verdict::AsymptoticallyStable);
    let doc = StabilityDocument {
        model: system.name().to_string(),
        params: system.params().clone(),
        q: q.value(),
        equilibria: entries,
        all_asymptotically_stable: all_stable,
    };
    let path = output_path(out, cfg.outputs.report.as_ref(), "report.json")?;
    let mut json =
        serde_json::to_string_pretty(&doc).map_err(|e| CliError::Runtime(e.to_string()))?;
    json.push('\n');
    fs::write(&path, json)?;

    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "model {} q = {}", doc.model, doc.q);
    for e in &doc.equilibria {
        let eigs: Vec<String> = e
            .report
            .eigenvalues
            .iter()
            .map(|z| format!("{}{:+}i", z.re, z.im))
            .collect();
        let _ = writeln!(
            stdout,
            "x_e = {:?}\n  eigenvalues = [{}]\n  |arg| = {:?}\n  q_tilde = {}\n  verdict = {}",
            e.x_e,
            eigs.join(", "),
            e.report.args_abs,
            e.report.critical_order,
            e.report.verdict
        );
    }
    let _ = writeln!(stdout, "report -> {}", path.display());
    Ok(if all_stable { EXIT_OK } else { EXIT_UNSTABLE })
}

fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|t| *t > 0)
}

fn cmd_sweep(config: &Path, out: &Path) -> Result<i32, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let q = cfg.order()?;
    let system = cfg.base_system()?;
    let (grid, columns) = cfg.sweep_grid(system.dim())?;
    let xe = match cfg.family_equilibrium() {
        Some(x) => x,
        None => first_equilibrium(&system, &cfg)?,
    };
    let eq = EquilibriumState::certify(&system, xe)?;
    let points = gain_sweep(&system, &eq, q, &grid, threads_from_env())?;
    let path = output_path(out, cfg.outputs.sweep.as_ref(), "sweep.csv")?;
    fs::write(&path, sweep_csv(&points, &columns))?;
    let stable = points
        .iter()
        .filter(|p| p.verdict == Verdict::AsymptoticallyStable)
        .count();
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(
        stdout,
        "sweep: {} points, {} stabilizing -> {}",
        points.len(),
        stable,
        path.display()
    );
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::Termination;

    #[test]
    fn trajectory_csv_layout() {
        let traj = Trajectory {
            h: 0.5,
            times: vec![0.0, 0.5],
            states: vec![vec![1.0, 2.0], vec![0.1, -3.0]],
            terminated_early: Some(Termination::Divergence),
        };
        let csv = trajectory_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x1,x2"));
        let row: Vec<f64> = lines
            .nth(1)
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(row, vec![0.5, 0.1, -3.0]);
    }

    #[test]
    fn numbers_carry_17_significant_digits() {
        let s = fmt_num(0.1);
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn sweep_header() {
        let csv = sweep_csv(&[], &[0, 1]);
        assert_eq!(csv, "c1,c2,verdict,q_tilde\n");
    }
}
