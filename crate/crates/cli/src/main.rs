//! `netfolio` command-line interface.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 clustering non-convergence.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{load_file_config, resolve, ConfigOverrides};

#[derive(Parser)]
#[command(name = "netfolio", version, about = "Network-based portfolio diversification")]
struct Cli {
    /// TOML config file; command-line flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: ConfigOverrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit relational matrices (Cor/MI/cCor/cMI) for one in-sample window
    Matrix {
        /// In-sample start month, `YYYY-MM` (default: first month of data)
        #[arg(long)]
        window: Option<String>,
        /// Which matrices to emit
        #[arg(long, value_delimiter = ',', default_value = "Cor,MI")]
        relations: Vec<String>,
        /// Clusterer for the monthly co-occurrence matrices
        #[arg(long, default_value = "LV")]
        clusterer: String,
    },
    /// Detect communities; export the partition and the annotated MST
    Communities {
        /// In-sample start month, `YYYY-MM` (default: first month of data)
        #[arg(long)]
        window: Option<String>,
        /// LV (Louvain on the inverted-weight MST) or AP (affinity propagation)
        #[arg(long, default_value = "LV")]
        clusterer: String,
        /// Relational matrix to cluster: Cor, MI, cCor, or cMI
        #[arg(long, default_value = "Cor")]
        relation: String,
    },
    /// Run the strategy grid plus RANDOM and index baselines over all windows
    Backtest,
    /// Generate a synthetic block-factor price panel CSV
    Synth {
        /// Blocks as SIZExLOADING[@DRIFT], comma separated
        #[arg(long, default_value = "20x0.9,20x0.9")]
        blocks: String,
        /// Trading days to generate
        #[arg(long, default_value_t = 500)]
        days: usize,
        /// Idiosyncratic volatility
        #[arg(long, default_value_t = 0.3)]
        idio: f64,
        /// Output CSV path (default: <out-dir>/synthetic_prices.csv)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> netfolio::Result<()> {
    let file = load_file_config(cli.config.as_deref())?;
    let needs_prices = !matches!(cli.command, Command::Synth { .. });
    let cfg = resolve(file, &cli.overrides, needs_prices)?;
    match &cli.command {
        Command::Matrix {
            window,
            relations,
            clusterer,
        } => commands::cmd_matrix(&cfg, window.as_deref(), relations, clusterer),
        Command::Communities {
            window,
            clusterer,
            relation,
        } => commands::cmd_communities(&cfg, window.as_deref(), clusterer, relation),
        Command::Backtest => commands::cmd_backtest(&cfg),
        Command::Synth {
            blocks,
            days,
            idio,
            out,
        } => commands::cmd_synth(&cfg, blocks, *days, *idio, out.as_deref()),
    }
}

fn main() -> ExitCode {
    // die quietly when the consumer of a pipe goes away (e.g. `... | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                netfolio::Error::Config(_) => 2,
                netfolio::Error::NonConvergence { .. } => 4,
                _ => 3,
            };
            ExitCode::from(code)
        }
    }
}
