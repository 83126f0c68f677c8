//! `specreg`: batch front end for rolling spectra, regime labels,
//! eigenportfolio betas, strategy backtests and synthetic panels.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "specreg", version, about = "Correlation-spectrum regimes and regime-aware portfolios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, env = "SPECREG_OUT")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Rolling top-k eigenvalues, standardized series and MP edge per universe.
    Spectrum(Common),
    /// Crisis indicator and calm/crisis labels per universe.
    Regime(Common),
    /// Regressions of the equal-weight market on eigenportfolio returns.
    Betas(Common),
    /// Strategy backtests with weekly returns, weights and a summary table.
    Backtest(Common),
    /// Seeded two-regime synthetic price panel with its ground-truth labels.
    Synth {
        /// Optional TOML configuration; only `[synth]` and `[output]` are read.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "SPECREG_OUT")]
        out: Option<PathBuf>,
        /// Overrides `[synth] seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spectrum(c) => {
            let cfg = load(&c.config)?;
            commands::spectrum(&cfg, &out_dir(c.out, &cfg))
        }
        Command::Regime(c) => {
            let cfg = load(&c.config)?;
            commands::regime(&cfg, &out_dir(c.out, &cfg))
        }
        Command::Betas(c) => {
            let cfg = load(&c.config)?;
            commands::betas(&cfg, &out_dir(c.out, &cfg))
        }
        Command::Backtest(c) => {
            let cfg = load(&c.config)?;
            commands::backtest(&cfg, &out_dir(c.out, &cfg))
        }
        Command::Synth { config, out, seed } => {
            let cfg = match config {
                Some(p) => load(&p)?,
                None => RunConfig::default(),
            };
            let seed = seed.unwrap_or(cfg.synth.seed);
            commands::synth(&cfg, seed, &out_dir(out, &cfg))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPECREG_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
