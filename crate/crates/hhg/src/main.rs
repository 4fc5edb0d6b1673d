use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hhg::commands::{self, AppError, Mode};
use hhg::config::RunConfig;

/// Complex-trajectory model of high harmonic generation in the 1D Coulomb atom.
#[derive(Parser, Debug)]
#[command(name = "hhg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for trajectory runs.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Run only the split-operator reference.
    #[arg(long, global = true, conflicts_with = "finco_only")]
    quantum_only: bool,
    /// Run only the trajectory reconstruction.
    #[arg(long, global = true)]
    finco_only: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Field-free ground state at multiples of 4 pi.
    GroundState,
    /// Wavefunction snapshots in the laser field.
    StrongField,
    /// Dipole acceleration and harmonic spectrum.
    Spectrum,
    /// Contour, path and loop closure for a single initial point.
    Diagnostics,
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), AppError> {
    let cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = cfg.resolve()?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    Ok((cfg, dir))
}

fn execute(command: Command, cfg: &RunConfig, mode: Mode, dir: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("resolved_config.toml"), cfg.to_toml()?)?;
    match command {
        Command::GroundState => commands::write_ground_state(&commands::ground_state(cfg, mode)?, dir),
        Command::StrongField => commands::write_strong_field(&commands::strong_field(cfg, mode)?, dir),
        Command::Spectrum => commands::write_spectrum(&commands::spectrum(cfg, mode)?, dir),
        Command::Diagnostics => commands::write_diagnostics(&commands::diagnostics(cfg)?, dir),
    }
}

fn run(cli: &Cli) -> Result<(), AppError> {
    let (cfg, dir) = load(&cli.common)?;
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global().map_err(|e| AppError::Compute(e.to_string()))?;
    }
    let mode = match (cli.common.quantum_only, cli.common.finco_only) {
        (true, _) => Mode::QUANTUM_ONLY,
        (_, true) => Mode::FINCO_ONLY,
        _ => Mode::BOTH,
    };
    execute(cli.command, &cfg, mode, &dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
