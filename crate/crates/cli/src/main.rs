//! `stand`: scenario-driven front end for the stand model.
//!
//! Exit codes: 0 ok, 1 configuration or validation error, 2 constraint exit
//! before the horizon, 3 verification failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use stand_core::analysis::{audit_horizon, audit_random_policies, AuditOptions};
use stand_core::config::{load_scenario, parse_levels, parse_policy_spec};
use stand_core::dynamics::{integrate_with, IntegrateOptions, DEFAULT_STEPS};
use stand_core::export::{write_candidates_csv, write_trajectory_csv, EventLog};
use stand_core::optimizer::{brute_force, standard_levels, SearchOptions};
use stand_core::trajectories::{characteristic_times, validity_diagnostic, CharacteristicTimes, ValidityDiagnostic};

const EXIT_CONFIG: u8 = 1;
const EXIT_CONSTRAINT: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "stand", version, about = "Even-aged forest stand growth and thinning model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one thinning policy and export the trajectory.
    Simulate {
        scenario: PathBuf,
        /// zero, max, hold, e0, et:T, esup or pw:FILE (plan relative to the scenario).
        #[arg(long, default_value = "e0")]
        policy: String,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Trajectory CSV path; events go next to it as `<stem>.events.json`.
        /// Without it the CSV is written to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Characteristic times and the validity diagnostic as JSON.
    Times {
        scenario: PathBuf,
        /// Horizon of the terminal-constrained strategy.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force search over piecewise-constant thinning plans.
    Optimize {
        scenario: PathBuf,
        #[arg(long)]
        intervals: Option<usize>,
        /// Comma-separated levels: numbers, `max`, `hold`.
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Only plans ending at the minimum tree count.
        #[arg(long)]
        terminal: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-candidate values as CSV.
        #[arg(long)]
        candidates: Option<PathBuf>,
    },
    /// Audit the envelope bounds on random admissible policies.
    Verify {
        scenario: PathBuf,
        #[arg(long)]
        policies: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Multiplies every basal-area increment of the audited runs.
        #[arg(long, hide = true, default_value_t = 1.0)]
        inject_fault: f64,
    },
}

#[derive(Serialize)]
struct TimesReport {
    times: CharacteristicTimes<f64>,
    validity: ValidityDiagnostic<f64>,
}

fn positive(name: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(anyhow!("--{name} requires a positive value (got {x})")),
        _ => Ok(v),
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn events_path(csv: &Path) -> PathBuf {
    let stem = csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv.with_file_name(format!("{stem}.events.json"))
}

fn simulate(scenario: &Path, policy: &str, step: Option<f64>, horizon: Option<f64>, out: Option<&Path>) -> Result<u8> {
    let file = load_scenario(scenario)?;
    let sc = &file.scenario;
    let horizon = positive("horizon", horizon)?
        .or(file.run.horizon)
        .unwrap_or(sc.params.t_star);
    let step = positive("step", step)?
        .or(file.run.step)
        .unwrap_or(horizon / DEFAULT_STEPS as f64);
    let base = scenario.parent().unwrap_or(Path::new("."));
    let policy = parse_policy_spec(policy, sc, base)?;
    let traj = integrate_with(sc, &policy, horizon, &IntegrateOptions::with_step(step))?;
    let log = EventLog::new(policy.label(), &traj);
    match out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(f);
            write_trajectory_csv(sc, &traj, &mut w)?;
            w.flush()?;
            write_json(&log, Some(&events_path(path)))?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write_trajectory_csv(sc, &traj, &mut w)?;
            w.flush()?;
        }
    }
    if log.constraint_exit() {
        let ev = log.events.last().expect("constraint exit has an event");
        eprintln!("constraint exit before the horizon: {:?} at t = {}", ev.kind, ev.t);
        return Ok(EXIT_CONSTRAINT);
    }
    Ok(0)
}

fn times(scenario: &Path, horizon: Option<f64>, out: Option<&Path>) -> Result<u8> {
    let file = load_scenario(scenario)?;
    let horizon = positive("horizon", horizon)?.or(file.run.horizon);
    let report = TimesReport {
        times: characteristic_times(&file.scenario, horizon),
        validity: validity_diagnostic(&file.scenario),
    };
    write_json(&report, out)?;
    Ok(0)
}

fn optimize(
    scenario: &Path,
    intervals: Option<usize>,
    levels: Option<&str>,
    horizon: Option<f64>,
    terminal: bool,
    out: Option<&Path>,
    candidates: Option<&Path>,
) -> Result<u8> {
    let file = load_scenario(scenario)?;
    let sc = &file.scenario;
    let Some(econ) = file.economics else {
        bail!("{}: optimize requires an [economics] section", scenario.display());
    };
    let e_max = sc.params.e_max;
    let levels = match levels.or(file.run.levels.as_deref()) {
        Some(spec) => parse_levels(spec, e_max)?,
        None => standard_levels(e_max),
    };
    let horizon = positive("horizon", horizon)?
        .or(file.run.horizon)
        .unwrap_or_else(|| audit_horizon(sc));
    let mut options = SearchOptions::new(intervals.unwrap_or(file.run.intervals), levels);
    options.terminal = terminal || file.run.terminal;
    options.keep_candidates = candidates.is_some();
    let mut result = brute_force(sc, &econ, horizon, &options)?;
    if let Some(path) = candidates {
        let rows = result.candidate_values.take().unwrap_or_default();
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        write_candidates_csv(&rows, &mut w)?;
        w.flush()?;
    }
    write_json(&result, out)?;
    Ok(0)
}

fn verify(
    scenario: &Path,
    policies: Option<usize>,
    seed: Option<u64>,
    horizon: Option<f64>,
    out: Option<&Path>,
    fault: f64,
) -> Result<u8> {
    let file = load_scenario(scenario)?;
    let sc = &file.scenario;
    if !(fault > 0.0 && fault.is_finite()) {
        bail!("fault factor must be positive (got {fault})");
    }
    let horizon = positive("horizon", horizon)?
        .or(file.run.horizon)
        .unwrap_or_else(|| audit_horizon(sc));
    let report = audit_random_policies(
        sc,
        horizon,
        policies.unwrap_or(file.run.policies),
        seed.unwrap_or(file.run.seed),
        &AuditOptions::for_scenario(sc),
        fault,
    )?;
    write_json(&report, out)?;
    if report.passed() {
        Ok(0)
    } else {
        eprintln!(
            "{} envelope violations over {} policies",
            report.violation_count, report.policies_audited
        );
        Ok(EXIT_VERIFY)
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate {
            scenario,
            policy,
            step,
            horizon,
            out,
        } => simulate(&scenario, &policy, step, horizon, out.as_deref()),
        Command::Times { scenario, horizon, out } => times(&scenario, horizon, out.as_deref()),
        Command::Optimize {
            scenario,
            intervals,
            levels,
            horizon,
            terminal,
            out,
            candidates,
        } => optimize(
            &scenario,
            intervals,
            levels.as_deref(),
            horizon,
            terminal,
            out.as_deref(),
            candidates.as_deref(),
        ),
        Command::Verify {
            scenario,
            policies,
            seed,
            horizon,
            out,
            inject_fault,
        } => verify(&scenario, policies, seed, horizon, out.as_deref(), inject_fault),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
