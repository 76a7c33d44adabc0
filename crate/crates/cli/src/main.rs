//! `noon`: design and simulate NOON-state generators from the command line.
//!
//! Exit codes: 0 on success, 2 for configuration or I/O errors, 3 when the
//! numerics fail (no convergence, design condition violated, ...).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noon_core::sweep::{with_workers, Execution};

use commands::{Context, RunOutput};
use scenario::{ScenarioFile, SystemKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] noon_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "noon", version, about = "NOON-state generator design and simulation")]
struct Cli {
    /// TOML scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV and JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Photon truncation per cavity (overrides the scenario).
    #[arg(long, global = true)]
    n_max: Option<usize>,
    /// Worker threads for sweeps; defaults to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run sweeps on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    /// System to simulate (overrides the scenario).
    #[arg(long, global = true, value_enum)]
    system: Option<SystemKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Analytic two-photon GES on both condition branches.
    DesignN2,
    /// Four-photon design curve over g2/g1.
    Fig9,
    /// cw steady-state tomography along Δ2 with the pump locked to Δ2.
    SweepDelta2,
    /// cw concurrence over κ × Ω.
    ConcurrenceMap,
    /// π-pulse population trace and power–duration map.
    Pulse,
    /// Free decay after a π pulse against the rate-equation oracle.
    Decay,
    /// Windowed coincidence counts and reconstructed concurrence.
    Coincidence,
    /// Detection-rate upper bound in Hz.
    Rate,
    /// Path-counting candidacy test.
    CheckCandidate,
    /// cw concurrence at several truncations.
    Convergence,
    /// cw steady-state tomography matrix.
    Tomography,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::DesignN2 => "design-n2",
            Command::Fig9 => "fig9",
            Command::SweepDelta2 => "sweep-delta2",
            Command::ConcurrenceMap => "concurrence-map",
            Command::Pulse => "pulse",
            Command::Decay => "decay",
            Command::Coincidence => "coincidence",
            Command::Rate => "rate",
            Command::CheckCandidate => "check-candidate",
            Command::Convergence => "convergence",
            Command::Tomography => "tomography",
        }
    }
}

fn load_scenario(path: Option<&PathBuf>) -> Result<ScenarioFile, CliError> {
    let Some(path) = path else {
        return Ok(ScenarioFile::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    ScenarioFile::parse(&text)
}

fn dispatch(cmd: Command, ctx: &Context, exec: Execution) -> Result<RunOutput, CliError> {
    match cmd {
        Command::DesignN2 => commands::design_n2(ctx),
        Command::Fig9 => commands::fig9(ctx),
        Command::SweepDelta2 => commands::sweep_delta2_cmd(ctx, exec),
        Command::ConcurrenceMap => commands::concurrence_map(ctx, exec),
        Command::Pulse => commands::pulse(ctx, exec),
        Command::Decay => commands::decay(ctx),
        Command::Coincidence => commands::coincidence(ctx),
        Command::Rate => commands::rate(ctx),
        Command::CheckCandidate => commands::check_candidate(ctx),
        Command::Convergence => commands::convergence(ctx),
        Command::Tomography => commands::tomography_cmd(ctx),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let scenario = load_scenario(cli.config.as_ref())?;
    let system = cli.system.or(scenario.system).unwrap_or_default();
    let ctx = Context {
        scenario: &scenario,
        n_max: cli.n_max,
        system,
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let cmd = cli.command;
    let result = with_workers(cli.workers, || dispatch(cmd, &ctx, exec))
        .map_err(|e| CliError::Config(e.to_string()))??;
    let header = output::header(cmd.name(), &scenario, &ctx)?;
    for line in &result.summary {
        println!("{line}");
    }
    for path in output::write_all(&cli.out, &header, result)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
