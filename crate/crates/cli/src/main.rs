//! `scarlab` command-line runner.

mod config;
mod tasks;

use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Overrides, Task};
use tasks::{Failure, Run};

/// Environment variable holding the worker count.
const WORKERS_ENV: &str = "SCARLAB_WORKERS";

#[derive(Parser)]
#[command(name = "scarlab", version, about = "Adiabatic scar dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task named on the command line or in the config file.
    Run {
        task: Option<Task>,
        #[command(flatten)]
        o: Overrides,
    },
    /// Eigenpairs, entanglement entropies and level statistics.
    Spectrum(Overrides),
    /// Ramps: fidelity, populations and diagonal entropy.
    Dynamics(Overrides),
    /// v at which the final fidelity crosses a threshold.
    VelocityScan(Overrides),
    /// AGP matrix elements, APT and crossing-leakage predictions.
    Agp(Overrides),
    /// Regularized susceptibilities against perturbation strength.
    Susceptibility(Overrides),
    /// Orthogonality catastrophe and speed-limit bound.
    Qsl(Overrides),
    /// Spectral functions of H⁺ eigenstates in the H⁻ spectrum.
    Kpm(Overrides),
    /// Tower-state catastrophe exponents and energies.
    Tower(Overrides),
}

fn resolve(command: Command) -> Result<(ExperimentConfig, Task), Failure> {
    let (task, o) = match command {
        Command::Run { task, o } => (task, o),
        Command::Spectrum(o) => (Some(Task::Spectrum), o),
        Command::Dynamics(o) => (Some(Task::Dynamics), o),
        Command::VelocityScan(o) => (Some(Task::VelocityScan), o),
        Command::Agp(o) => (Some(Task::Agp), o),
        Command::Susceptibility(o) => (Some(Task::Susceptibility), o),
        Command::Qsl(o) => (Some(Task::Qsl), o),
        Command::Kpm(o) => (Some(Task::Kpm), o),
        Command::Tower(o) => (Some(Task::Tower), o),
    };
    let mut cfg = match &o.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Schema(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text).map_err(|e| Failure::Schema(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    o.apply(&mut cfg).map_err(Failure::Schema)?;
    if o.workers.is_none() {
        if let Ok(w) = std::env::var(WORKERS_ENV) {
            cfg.workers = Some(w.trim().parse().map_err(|_| Failure::Schema(format!("{WORKERS_ENV}={w:?} is not a count")))?);
        }
    }
    let task = task.or(cfg.task).ok_or_else(|| Failure::Schema("no task given on the command line or in the config".into()))?;
    cfg.task = Some(task);
    cfg.validate().map_err(Failure::Schema)?;
    Ok((cfg, task))
}

fn main_inner(command: Command) -> Result<(), Failure> {
    let (cfg, task) = resolve(command)?;
    if let Some(w) = cfg.workers {
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global().map_err(|e| Failure::Io(e.to_string()))?;
    }
    std::fs::create_dir_all(&cfg.out)?;
    let echo = cfg.to_toml().map_err(Failure::Schema)?;
    std::fs::write(cfg.out.join("config.toml"), echo)?;
    let start = Instant::now();
    let mut run = Run::new(cfg.clone(), task);
    let result = tasks::execute(&mut run, task);
    run.meta.wall_time_seconds = start.elapsed().as_secs_f64();
    if let Err(e) = &result {
        let _ = run.meta.note("error", e.to_string());
    }
    run.meta.write(&cfg.out.join("metadata.json")).map_err(Failure::from)?;
    result?;
    eprintln!("{}: wrote {} tables to {}", task.name(), run.meta.tables.len(), cfg.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scarlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
