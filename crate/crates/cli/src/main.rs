//! Command-line runner for the kinotaxis solvers.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kinotaxis_cli::config::{ExperimentConfig, SolverKind};
use kinotaxis_cli::presets;
use kinotaxis_cli::runner::{analyze_run, run_experiment, run_sweep, RunFailure};

#[derive(Parser)]
#[command(
    name = "kinotaxis",
    version,
    about = "Nonlocal kinetic cell-migration solvers"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment from a config file.
    Run { config: PathBuf },
    /// Run the Cartesian-product sweep declared in a config file.
    Sweep { config: PathBuf },
    /// Run a built-in preset, or dump its config files with --dump.
    Preset {
        name: String,
        #[arg(long)]
        dump: bool,
    },
    /// Post-process a finished run directory.
    Analyze { run_dir: PathBuf },
    /// Tabulate the effective Hamiltonian declared in a config file.
    Hamiltonian { config: PathBuf },
    /// Run a Hamilton-Jacobi config (solver must be "hj" or "eikonal").
    Hj { config: PathBuf },
    /// Run an aggregate-density config (solver must be "macro").
    Macro { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, RunFailure> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunFailure::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(ExperimentConfig::from_toml(&text)?)
}

fn expect_solver(cfg: &ExperimentConfig, allowed: &[SolverKind]) -> Result<(), RunFailure> {
    if allowed.contains(&cfg.solver) {
        Ok(())
    } else {
        Err(RunFailure::Config(format!(
            "config declares solver {:?}, expected one of {allowed:?}",
            cfg.solver
        )))
    }
}

fn dispatch(cli: &Cli) -> Result<(), RunFailure> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(config)?;
            let out = run_experiment(&cfg, &cli.out, cli.seed)?;
            println!("run complete: {}", out.dir.display());
            Ok(())
        }
        Command::Sweep { config } => {
            let cfg = load(config)?;
            let rows = run_sweep(&cfg, &cli.out, cli.seed, cli.threads)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            println!(
                "sweep complete: {} runs ({failed} failed), summary at {}",
                rows.len(),
                cli.out.join("summary.csv").display()
            );
            Ok(())
        }
        Command::Preset { name, dump } => {
            let variants = presets::preset(name).ok_or_else(|| {
                RunFailure::Config(format!(
                    "unknown preset {name}; available: {}",
                    presets::preset_names().join(", ")
                ))
            })?;
            if *dump {
                fs::create_dir_all(&cli.out).map_err(|e| RunFailure::Solver(format!("io: {e}")))?;
                for (variant, cfg) in variants {
                    let path = cli.out.join(format!("{name}-{variant}.toml"));
                    fs::write(&path, cfg.to_toml())
                        .map_err(|e| RunFailure::Solver(format!("io: {e}")))?;
                    println!("wrote {}", path.display());
                }
                return Ok(());
            }
            for (variant, cfg) in variants {
                if cfg.sweep.is_some() {
                    let rows = run_sweep(
                        &cfg,
                        &cli.out.join(name).join(&variant),
                        cli.seed,
                        cli.threads,
                    )?;
                    println!("preset {name}/{variant}: {} sweep runs", rows.len());
                } else {
                    let out = run_experiment(&cfg, &cli.out.join(name).join(&variant), cli.seed)?;
                    println!("preset {name}/{variant}: {}", out.dir.display());
                }
            }
            Ok(())
        }
        Command::Analyze { run_dir } => {
            let summary = analyze_run(run_dir, &run_dir.join("analysis"))?;
            println!(
                "peaks: {} at {:?}; modal |slope| = {:.4}",
                summary.peak_count, summary.peak_locations, summary.modal_abs_slope
            );
            Ok(())
        }
        Command::Hamiltonian { config } => {
            let cfg = load(config)?;
            expect_solver(&cfg, &[SolverKind::Hamiltonian])?;
            let out = run_experiment(&cfg, &cli.out, cli.seed)?;
            println!("hamiltonian table: {}", out.dir.display());
            Ok(())
        }
        Command::Hj { config } => {
            let cfg = load(config)?;
            expect_solver(&cfg, &[SolverKind::Hj, SolverKind::Eikonal])?;
            let out = run_experiment(&cfg, &cli.out, cli.seed)?;
            println!("hj run: {}", out.dir.display());
            Ok(())
        }
        Command::Macro { config } => {
            let cfg = load(config)?;
            expect_solver(&cfg, &[SolverKind::Macro])?;
            let out = run_experiment(&cfg, &cli.out, cli.seed)?;
            println!("macro run: {}", out.dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunFailure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(RunFailure::Solver(msg)) => {
            eprintln!("solver error: {msg}");
            ExitCode::from(3)
        }
    }
}
