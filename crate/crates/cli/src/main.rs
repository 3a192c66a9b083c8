mod commands;
mod config;
mod error;
mod format;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "bertrand-mnl", version, about = "Assortment, pricing and segmentation under MNL price competition")]
struct Cli {
    /// Base seed for simulation replications.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replications per simulated cell.
    #[arg(long, global = true)]
    replications: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Competitive equilibrium of one assortment.
    Equilibrium {
        #[arg(long)]
        catalog: PathBuf,
        /// Comma-separated 1-based item ids; defaults to every item, empty means none.
        #[arg(long)]
        assortment: Option<String>,
        /// Ignore inventory; prices from the one-shot game.
        #[arg(long)]
        perishable: bool,
    },
    /// Offline benchmark LP.
    Opt {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        buyers: usize,
        /// Fixed per-item revenues, in input order.
        #[arg(long, value_delimiter = ',')]
        fixed_revenue: Option<Vec<f64>>,
    },
    /// Monte Carlo comparison of online policies.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tabulate the guarantee curve over a threshold range.
    Gcurve {
        #[arg(long, default_value_t = 0.5)]
        from: f64,
        #[arg(long, default_value_t = 0.99)]
        to: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Price equilibrium on a buyer-seller network.
    Network {
        #[arg(long)]
        market: PathBuf,
        #[arg(long)]
        jacobi: bool,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
    },
    /// Flow-based market segmentation.
    Segment {
        #[arg(long)]
        market: PathBuf,
        /// Also solve the unsegmented market.
        #[arg(long)]
        compare: bool,
        /// Write a per-pool CSV summary here.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
    },
    /// Ratios of wait-then-offer rules on the growing-revenue instance.
    AdversaryDemo {
        #[arg(long, default_value_t = 10.0)]
        base: f64,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
    },
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let output = match cli.command {
        Command::Equilibrium { catalog, assortment, perishable } => {
            let ids = assortment.as_deref().map(commands::parse_ids).transpose()?;
            commands::equilibrium(&catalog, ids.as_deref(), perishable)?
        }
        Command::Opt { catalog, buyers, fixed_revenue } => commands::opt(&catalog, buyers, fixed_revenue.as_deref())?,
        Command::Simulate { config } => commands::simulate(&config, cli.seed, cli.replications)?,
        Command::Gcurve { from, to, step } => commands::gcurve(from, to, step)?,
        Command::Network { market, jacobi, tolerance, max_iters } => {
            commands::network(&market, &commands::solve_options(tolerance, max_iters, jacobi))?
        }
        Command::Segment { market, compare, summary, tolerance, max_iters } => {
            let (out, csv) = commands::segment(&market, compare, &commands::solve_options(tolerance, max_iters, false))?;
            if let Some(path) = summary {
                write_file(&path, &csv)?;
            }
            out
        }
        Command::AdversaryDemo { base, horizon } => commands::adversary_demo(base, horizon, &[1, 2, 3])?,
    };
    for w in &output.warnings {
        eprintln!("{w}");
    }
    match &cli.out {
        Some(path) => write_file(path, &output.body),
        None => io::stdout()
            .lock()
            .write_all(output.body.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.workers {
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Numeric(e.to_string()))
            .and_then(|pool| pool.install(|| run(cli))),
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
