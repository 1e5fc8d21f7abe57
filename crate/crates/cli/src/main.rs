use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phasestat_cli::config::OUT_ENV;
use phasestat_cli::{commands, CliError, RunConfig};
use phasestat_core::radial::Backend;

/// Phase shifts, pair correlation and arithmetic diagnostics for surfaces of
/// revolution with a cylindrical end.
#[derive(Parser)]
#[command(name = "phasestat", version)]
struct Cli {
    /// JSON run configuration; defaults are used for missing fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config file and PHASESTAT_OUT)
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated λ values
    #[arg(long, global = true, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Width of the gaussian test function
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// model, wkb or exact
    #[arg(long, global = true, value_parser = parse_backend)]
    backend: Option<Backend>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and validate the surface profile, tabulate ψ and Φ
    BuildSurface,
    /// Phase-shift tables for every λ
    PhaseShifts,
    /// Pair correlation by direct and Fourier summation
    Paircorr,
    /// Monte-Carlo scan of the error term over the parameter rectangle
    Scan,
    /// Divisor sums and lattice-point counts
    Arith,
    /// Quantum against classical rotation numbers
    Rotation,
    /// Print the effective configuration as JSON
    ShowConfig,
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse().map_err(|e: phasestat_core::Error| e.to_string())
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        cfg.output_dir = dir.into();
    }
    if let Some(dir) = &cli.out {
        cfg.output_dir = dir.clone();
    }
    if let Some(v) = &cli.lambdas {
        cfg.lambdas = v.clone();
    }
    cfg.eps = cli.eps.unwrap_or(cfg.eps);
    cfg.sigma = cli.sigma.unwrap_or(cfg.sigma);
    cfg.backend = cli.backend.unwrap_or(cfg.backend);
    cfg.samples = cli.samples.unwrap_or(cfg.samples);
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    cfg.threads = cli.threads.unwrap_or(cfg.threads);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = effective_config(&cli)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let files = match cli.command {
        Command::BuildSurface => commands::build_surface(&cfg)?,
        Command::PhaseShifts => commands::phase_shifts(&cfg)?,
        Command::Paircorr => commands::paircorr(&cfg)?,
        Command::Scan => commands::scan(&cfg)?,
        Command::Arith => commands::arith(&cfg)?,
        Command::Rotation => commands::rotation(&cfg)?,
        Command::ShowConfig => {
            println!("{}", cfg.to_json());
            return Ok(());
        }
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version go to stdout and are not errors
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phasestat: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
