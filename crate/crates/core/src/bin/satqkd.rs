use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use satqkd::harness::commands::{self, Overrides, StrategyChoice};
use satqkd::harness::StationPair;
use satqkd::Result;

#[derive(Parser)]
#[command(name = "satqkd", version, about = "Satellite entanglement QKD key-rate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Orbit altitude in meters (repeatable); replaces the config's list.
    #[arg(long = "altitude")]
    altitudes: Vec<f64>,
    /// Station pair `A:B` (repeatable); replaces the config's list.
    #[arg(long = "pair")]
    pairs: Vec<StationPair>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate fidelity traces for every pair and altitude.
    Simulate(Common),
    /// Key length of a stored trace under one strategy.
    Keyrate {
        #[command(flatten)]
        common: Common,
        /// Trace CSV written by `simulate`
        #[arg(long)]
        trace: PathBuf,
        /// non-blockwise, 2-block, 3-block, best, or comma-separated boundaries.
        #[arg(long, default_value = "non-blockwise")]
        strategy: StrategyChoice,
    },
    /// Key length over the threshold x sampling-rate grid of a stored trace.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Trace CSV written by `simulate`
        #[arg(long)]
        trace: PathBuf,
    },
    /// Blockwise against non-blockwise on a stored trace.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Trace CSV written by `simulate`
        #[arg(long)]
        trace: PathBuf,
    },
    /// Full pair x altitude experiment: results CSV and plot data.
    Sweep(Common),
}

fn config(c: &Common) -> Result<satqkd::harness::ExperimentConfig> {
    let overrides = Overrides {
        altitudes: c.altitudes.clone(),
        pairs: c.pairs.clone(),
    };
    commands::resolve_config(c.config.as_deref(), &overrides)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            for path in commands::simulate(&config(&c)?, &c.out)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Keyrate { common, trace, strategy } => {
            let outcome = commands::keyrate(&config(&common)?, &trace, &strategy)?;
            print!("{}", commands::format_outcome(&outcome));
        }
        Command::Optimize { common, trace } => {
            let path = commands::optimize(&config(&common)?, &trace, &common.out)?;
            println!("wrote {}", path.display());
        }
        Command::Compare { common, trace } => {
            let fallback = common.altitudes.first().copied();
            let (cell, path) = commands::compare(&config(&common)?, &trace, fallback, &common.out)?;
            print!("{}", commands::format_outcome(&cell.nonblock));
            for p in &cell.policies {
                print!("{}", commands::format_outcome(p));
            }
            match cell.improvement_pct() {
                Some(pct) => println!("improvement_pct={pct:.4}"),
                None => println!("improvement_pct=NA"),
            }
            println!("wrote {}", path.display());
        }
        Command::Sweep(c) => {
            let out = commands::sweep(&config(&c)?, &c.out)?;
            for (pair, alt, err) in &out.failures {
                eprintln!("cell {pair} @ {alt} m failed: {err}");
            }
            for path in &out.files {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
