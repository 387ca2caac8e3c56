//! Command-line front end. Exit codes: 0 success, 1 usage or input error,
//! 2 solver failure, 3 invariant violation.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::analysis::{convergence_row, oracle_for, sweep_runs, write_convergence_csv, ConvergenceRow};
use crate::audit;
use crate::config::RunConfig;
use crate::error::Error;
use crate::evolution::run_with;
use crate::output::{write_run, RunWriter};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "atfrac", version, about = "Quasi-static phase-field fracture")]
struct Cli {
    /// Seed for randomized experiments; the solvers themselves are deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one evolution and write its log directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every eps of the config and write the convergence table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the sharp-interface energy path for the configured geometry.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a finished run directory.
    Check { run_dir: PathBuf },
}

enum Failure {
    Lib(Error),
    Usage(String),
    Invariant(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged { .. } | Error::SweepCapExceeded { .. } | Error::InfeasibleBox { .. } => EXIT_SOLVER,
        Error::EstimateViolated { .. } => EXIT_INVARIANT,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    if let Some(seed) = cli.seed {
        log::info!("seed {seed}");
    }
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Invariant(lines)) => {
            for line in lines {
                eprintln!("violation: {line}");
            }
            EXIT_INVARIANT
        }
    }
}

fn out_dir(out: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    out.or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out } => run_command(&config, out),
        Command::Sweep { config, out } => sweep_command(&config, out),
        Command::Oracle { config, out } => oracle_command(&config, out),
        Command::Check { run_dir } => check_command(&run_dir),
    }
}

fn run_command(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let config = RunConfig::load(path)?;
    if config.is_sweep() {
        return Err(Failure::Usage(format!(
            "{} lists several eps values; use `sweep`",
            path.display()
        )));
    }
    let dir = out_dir(out, &config);
    let spec = config.members()?.remove(0);
    let mut writer = RunWriter::create(&dir, &spec.config, spec.snapshot_every)?;
    let mut write_error = None;
    let result = run_with(&spec.grid, &spec.schedule, &spec.params, &spec.strategy, |state| {
        if write_error.is_none() {
            if let Err(e) = writer.write(state) {
                write_error = Some(e);
            }
        }
    });
    writer.finish()?;
    if let Some(e) = write_error {
        return Err(e.into());
    }
    let trajectory = result?;
    let row = convergence_row(&spec, &trajectory)?;
    println!("{}", summary(&row));
    for r in trajectory.records() {
        if r.upper_violated || r.lower_violated {
            log::warn!(
                "step {}: energy {} outside [{}, {}]",
                r.step,
                r.total,
                r.lower_bound,
                r.upper_bound
            );
        }
    }
    Ok(())
}

fn summary(row: &ConvergenceRow) -> String {
    let crack = row.crack_time.map_or("none".to_string(), |t| format!("{t:.4}"));
    let gap = row.sup_gap.map_or("n/a".to_string(), |g| format!("{g:.4}"));
    format!(
        "eps={} h={:.5} delta={} crack_time={crack} surface={:.5} elliptic={:.5} sup_gap={gap}",
        row.eps, row.h, row.delta, row.surface_final, row.elliptic_final
    )
}

fn sweep_command(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let config = RunConfig::load(path)?;
    let dir = out_dir(out, &config);
    let eps = config.params.eps.values();
    let runs = sweep_runs(&config, &eps)?;
    fs::create_dir_all(&dir)?;
    let mut rows = Vec::with_capacity(runs.len());
    for (row, (spec, trajectory)) in runs {
        write_run(&dir.join(format!("eps_{}", spec.params.eps)), &spec, &trajectory)?;
        println!("{}", summary(&row));
        rows.push(row);
    }
    write_convergence_csv(&rows, BufWriter::new(File::create(dir.join("convergence.csv"))?))?;
    Ok(())
}

fn oracle_command(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let config = RunConfig::load(path)?;
    let dir = out_dir(out, &config);
    let spec = config.members()?.remove(0);
    let n = spec.schedule.n_steps(spec.params.delta);
    let times: Vec<f64> = (0..=n)
        .map(|i| crate::evolution::step_time(i, spec.params.delta))
        .collect();
    let oracle = oracle_for(&spec, &times)
        .ok_or_else(|| Failure::Usage("no sharp-interface oracle for this geometry".into()))??;
    fs::create_dir_all(&dir)?;
    oracle.write_csv(BufWriter::new(File::create(dir.join("oracle.csv"))?))?;
    match oracle.crack_time {
        Some(t) => println!("crack_time={t}"),
        None => println!("crack_time=none"),
    }
    Ok(())
}

fn check_command(dir: &Path) -> Result<(), Failure> {
    let report = audit::check(dir)?;
    if report.passed() {
        println!("ok: {} steps, {} snapshots", report.steps, report.snapshots);
        Ok(())
    } else {
        Err(Failure::Invariant(
            report.violations.iter().map(ToString::to_string).collect(),
        ))
    }
}
