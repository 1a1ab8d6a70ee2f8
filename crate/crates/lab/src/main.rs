use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kpi_lab::config::{self, OutputFormat};
use kpi_lab::runner::{self, Manifest, RunOptions};
use kpi_lab::LabError;

#[derive(Parser)]
#[command(name = "kpi-lab", version, about = "Observability and control experiments for linear KP-I on the torus")]
struct Cli {
    /// Output root; each run writes one directory per experiment here.
    #[arg(long, global = true, env = "KPI_LAB_OUT", default_value = "kpi-lab-out")]
    out: PathBuf,
    /// Run seed; experiment seeds are derived from it and the experiment id.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the experiment pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Settings {
    /// Experiment keys with TOML values, e.g. `kmax=8 times=[0.1,1]`.
    #[arg(value_name = "KEY=VALUE")]
    assignments: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a TOML configuration.
    Run { config: PathBuf },
    /// Exact spectral evolution with norm tracking.
    Evolve(Settings),
    /// Observability Gramian minima.
    Observe(Settings),
    /// HUM control synthesis and verification.
    Control(Settings),
    /// Wave-packet observability ratios across scales.
    Dichotomy(Settings),
    /// Spectral-inequality constants.
    SpectralConstant(Settings),
    /// Symbol and group-velocity tables.
    Dispersion(Settings),
    /// Gramian block export.
    Gramian(Settings),
    /// Frequency-localized observability scan.
    FrequencyScan(Settings),
    /// Weak observability constants across h.
    WeakObservability(Settings),
}

fn execute(cli: Cli) -> Result<Manifest, LabError> {
    let (cfg, text) = match &cli.command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(config)
                .map_err(|e| LabError::io(format!("reading {}", config.display()), e))?;
            let mut cfg = config::parse(&text, &config.display().to_string())?;
            cfg.base_dir = config.parent().map(PathBuf::from).unwrap_or_default();
            (cfg, text)
        }
        Command::Evolve(s) => runner::direct_config("evolve", &s.assignments)?,
        Command::Observe(s) => runner::direct_config("observe", &s.assignments)?,
        Command::Control(s) => runner::direct_config("control", &s.assignments)?,
        Command::Dichotomy(s) => runner::direct_config("dichotomy", &s.assignments)?,
        Command::SpectralConstant(s) => runner::direct_config("spectral-constant", &s.assignments)?,
        Command::Dispersion(s) => runner::direct_config("dispersion", &s.assignments)?,
        Command::Gramian(s) => runner::direct_config("gramian", &s.assignments)?,
        Command::FrequencyScan(s) => runner::direct_config("frequency-scan", &s.assignments)?,
        Command::WeakObservability(s) => runner::direct_config("weak-observability", &s.assignments)?,
    };
    let opts = RunOptions { out_dir: cli.out, seed: cli.seed, threads: cli.threads, format: cli.format };
    runner::run(&cfg, &text, &opts)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(m) => {
            for e in &m.experiments {
                println!("{:<40} {:>6} {:>9.2}s  {} files", e.id, e.status, e.seconds, e.files.len());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("kpi-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
