//! `cpk`: collection bounds, cavity simulations and photon-data analysis from the command line.
//!
//! Exit codes: 0 success, 2 usage, 3 validation, 4 computation.

mod commands;
mod config;
mod io;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ConfigError, GlobalConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    /// Malformed input data file.
    Input(String),
    Computation(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) | CliError::Input(_) => 3,
            CliError::Computation(_) | CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Computation(m) => write!(f, "computation failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<cpk_core::Error> for CliError {
    fn from(e: cpk_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Computation(e.to_string())
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cpk", version, about = "Single-photon collection toolkit for cavity-coupled trapped ions")]
pub struct Cli {
    /// JSON config; omitted keys take the reference-system defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for outputs and manifest.json.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GridArg {
    Linear,
    Log,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic collection bound, escape and cavity figures of merit.
    Bounds,
    /// Bound versus output-mirror transmission.
    SweepT2 {
        #[arg(long, default_value_t = 10.0)]
        min_ppm: f64,
        #[arg(long, default_value_t = 1000.0)]
        max_ppm: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, value_enum, default_value_t = GridArg::Linear)]
        grid: GridArg,
    },
    /// Pure fractions of the four coupling schemes.
    Schemes,
    /// Bounds for the three improved parameter sets.
    Future,
    /// Master-equation simulation of one photon-generation attempt.
    Simulate(SimulateArgs),
    /// Two-qubit state reconstruction with bootstrap error bars.
    Tomo(TomoArgs),
    /// Photon-train statistics and geometric fit.
    Train(TrainArgs),
    /// Detection wavepacket and efficiency from time tags.
    Wavepacket(WavepacketArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub rabi_mhz: Option<f64>,
    /// Second drive tone; enables the entanglement simulation.
    #[arg(long)]
    pub rabi2_mhz: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub detuning_mhz: Option<f64>,
    #[arg(long)]
    pub duration_us: Option<f64>,
    #[arg(long)]
    pub bin_us: Option<f64>,
    /// Wavepacket CSV; relative paths resolve inside --out-dir.
    #[arg(long, default_value = "wavepacket_sim.csv")]
    pub output: PathBuf,
    /// Also estimate the share of emission that followed a reexcitation.
    #[arg(long)]
    pub reexcitation: bool,
}

#[derive(Debug, Args)]
pub struct TomoArgs {
    /// Count table CSV (`photon_basis, ion_basis, outcome, counts`).
    #[arg(long, conflicts_with = "synthetic_events")]
    pub counts: Option<PathBuf>,
    /// Generate Poisson counts with this mean per setting instead of reading a file.
    #[arg(long)]
    pub synthetic_events: Option<f64>,
    /// White-noise share of the synthetic state.
    #[arg(long, default_value_t = 0.0)]
    pub synthetic_noise: f64,
    /// Phase of the synthetic target state (rad).
    #[arg(long, default_value_t = 0.91)]
    pub synthetic_theta: f64,
    /// Fixed phase for the fidelity; fitted when omitted.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Bootstrap resamples; defaults to analysis.bootstrap_m.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Detected signal per attempt, for the background fidelity ceiling.
    #[arg(long)]
    pub signal_per_attempt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Time-tag CSV (`attempt_index, t_us, detector, pol`).
    #[arg(long, conflicts_with = "synthetic_attempts")]
    pub tags: Option<PathBuf>,
    /// Attempt count k; defaults to one past the largest attempt index.
    #[arg(long)]
    pub attempts: Option<u64>,
    /// Generate independent Bernoulli slots for this many attempts.
    #[arg(long)]
    pub synthetic_attempts: Option<u64>,
    #[arg(long, default_value_t = 0.474)]
    pub synthetic_p: f64,
    /// Also write the synthetic time tags.
    #[arg(long)]
    pub write_tags: bool,
}

#[derive(Debug, Args)]
pub struct WavepacketArgs {
    #[arg(long, conflicts_with = "synthetic_attempts")]
    pub tags: Option<PathBuf>,
    #[arg(long)]
    pub attempts: Option<u64>,
    /// Histogram bin width; defaults to analysis.bin_us.
    #[arg(long)]
    pub bin_us: Option<f64>,
    /// Sample detections from the reduced-model wavepacket for this many attempts.
    #[arg(long)]
    pub synthetic_attempts: Option<u64>,
    #[arg(long)]
    pub write_tags: bool,
}

fn load_config(cli: &Cli) -> Result<GlobalConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => GlobalConfig::load(p)?,
        None => GlobalConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Command::Simulate(a) = &cli.command {
        let d = &mut cfg.drive;
        d.rabi_mhz = a.rabi_mhz.unwrap_or(d.rabi_mhz);
        d.rabi2_mhz = a.rabi2_mhz.or(d.rabi2_mhz);
        d.detuning_mhz = a.detuning_mhz.unwrap_or(d.detuning_mhz);
        d.duration_us = a.duration_us.unwrap_or(d.duration_us);
        d.bin_us = a.bin_us.unwrap_or(d.bin_us);
    }
    if let Command::Wavepacket(a) = &cli.command {
        cfg.analysis.bin_us = a.bin_us.unwrap_or(cfg.analysis.bin_us);
    }
    if let Command::Tomo(a) = &cli.command {
        cfg.analysis.bootstrap_m = a.bootstrap.unwrap_or(cfg.analysis.bootstrap_m);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| CliError::Io(format!("{}: {e}", cli.out_dir.display())))?;
    let started = manifest::timestamp();
    let (name, outputs) = commands::dispatch(&cli.command, &cfg, &cli.out_dir)?;
    let path = manifest::RunManifest::write(name, cfg.hash(), cfg.seed, started, &cli.out_dir, &outputs)?;
    for p in outputs.iter().chain(std::iter::once(&path)) {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cpk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
