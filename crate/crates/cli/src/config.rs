//! Run configuration: a TOML file plus flag overrides, validated before any
//! output is produced.

use std::path::{Path, PathBuf};

use netfolio::backtest::{expand_strategy_filter, Rebalance, StrategySpec};
use netfolio::community::{ApParams, Preference};
use netfolio::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Universe {
    Stocks,
    Crypto,
    Custom,
}

impl Universe {
    fn default_portfolio_size(&self) -> Option<usize> {
        match self {
            Universe::Stocks => Some(25),
            Universe::Crypto => Some(20),
            Universe::Custom => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RebalanceArg {
    Daily,
    BuyAndHold,
}

impl From<RebalanceArg> for Rebalance {
    fn from(r: RebalanceArg) -> Rebalance {
        match r {
            RebalanceArg::Daily => Rebalance::Daily,
            RebalanceArg::BuyAndHold => Rebalance::BuyAndHold,
        }
    }
}

/// On-disk config schema; every field optional so flags can fill the rest.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub prices: Option<PathBuf>,
    pub caps: Option<PathBuf>,
    pub universe: Option<Universe>,
    pub portfolio_size: Option<usize>,
    pub in_months: Option<usize>,
    pub out_months: Option<usize>,
    pub step_months: Option<usize>,
    pub bins: Option<usize>,
    pub damping: Option<f64>,
    pub preference: Option<f64>,
    pub seed: Option<u64>,
    pub strategies: Option<Vec<String>>,
    pub out_dir: Option<PathBuf>,
    pub top_k: Option<usize>,
    pub coverage: Option<f64>,
    pub rebalance: Option<RebalanceArg>,
}

/// Fully resolved configuration, echoed into the run manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub prices: PathBuf,
    pub caps: Option<PathBuf>,
    pub universe: Universe,
    pub portfolio_size: usize,
    pub in_months: usize,
    pub out_months: usize,
    pub step_months: usize,
    pub bins: usize,
    pub damping: f64,
    pub preference: Option<f64>,
    pub seed: u64,
    pub strategies: Vec<String>,
    pub out_dir: PathBuf,
    pub top_k: usize,
    pub coverage: f64,
    pub rebalance: RebalanceArg,
}

impl RunConfig {
    pub fn ap_params(&self) -> ApParams {
        ApParams {
            damping: self.damping,
            preference: match self.preference {
                Some(v) => Preference::Value(v),
                None => Preference::Median,
            },
            ..ApParams::default()
        }
    }

    pub fn strategy_specs(&self) -> Result<Vec<StrategySpec>> {
        expand_strategy_filter(&self.strategies)
    }
}

/// Flag-level overrides collected by clap; `None` means "not given".
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConfigOverrides {
    /// Price CSV: header `date,SYM1,...`, ISO dates, blank cells missing
    #[arg(long, global = true)]
    pub prices: Option<PathBuf>,
    /// Optional market-cap CSV: header `symbol,cap`
    #[arg(long, global = true)]
    pub caps: Option<PathBuf>,
    /// Asset universe; fixes the default portfolio size (stocks 25, crypto 20)
    #[arg(long, global = true, value_enum)]
    pub universe: Option<Universe>,
    /// Portfolio size P (overrides the universe default)
    #[arg(long, global = true)]
    pub portfolio_size: Option<usize>,
    /// In-sample window length in calendar months
    #[arg(long, global = true)]
    pub in_months: Option<usize>,
    /// Out-of-sample window length in calendar months
    #[arg(long, global = true)]
    pub out_months: Option<usize>,
    /// Window step in calendar months
    #[arg(long, global = true)]
    pub step_months: Option<usize>,
    /// Histogram bins for the mutual-information estimator
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    /// Affinity-propagation damping factor in [0.5, 1)
    #[arg(long, global = true)]
    pub damping: Option<f64>,
    /// Affinity-propagation preference (default: median of similarities)
    #[arg(long, global = true)]
    pub preference: Option<f64>,
    /// Master seed for every stochastic step
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Strategy filter: comma-separated ids, `*` wildcards per field
    /// (e.g. `LV-*-PCA-*,AP-Cor-DegFG-max`)
    #[arg(long, global = true, value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,
    /// Output directory
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// How many strategies each ranking table lists
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
    /// Minimum fraction of dates an asset must cover to be kept
    #[arg(long, global = true)]
    pub coverage: Option<f64>,
    /// Rebalancing policy for all portfolios
    #[arg(long, global = true, value_enum)]
    pub rebalance: Option<RebalanceArg>,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                Error::config(format!("cannot read config {}: {e}", p.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| Error::config(format!("bad config {}: {e}", p.display())))
        }
    }
}

/// Merge file config and flag overrides (flags win), apply defaults, and
/// validate. No filesystem writes happen here, so a config error can never
/// leave partial outputs behind.
pub fn resolve(file: FileConfig, flags: &ConfigOverrides, needs_prices: bool) -> Result<RunConfig> {
    let universe = flags.universe.or(file.universe).unwrap_or(Universe::Stocks);
    let portfolio_size = flags
        .portfolio_size
        .or(file.portfolio_size)
        .or_else(|| universe.default_portfolio_size())
        .ok_or_else(|| {
            Error::config("universe=custom needs an explicit --portfolio-size".to_string())
        })?;
    let prices = match flags.prices.clone().or(file.prices) {
        Some(p) => p,
        None if needs_prices => {
            return Err(Error::config(
                "no price CSV given (set --prices or `prices` in the config)".to_string(),
            ))
        }
        None => PathBuf::new(),
    };
    let config = RunConfig {
        prices,
        caps: flags.caps.clone().or(file.caps),
        universe,
        portfolio_size,
        in_months: flags.in_months.or(file.in_months).unwrap_or(12),
        out_months: flags.out_months.or(file.out_months).unwrap_or(12),
        step_months: flags.step_months.or(file.step_months).unwrap_or(1),
        bins: flags.bins.or(file.bins).unwrap_or(8),
        damping: flags.damping.or(file.damping).unwrap_or(0.9),
        preference: flags.preference.or(file.preference),
        seed: flags.seed.or(file.seed).unwrap_or(0),
        strategies: flags
            .strategies
            .clone()
            .or(file.strategies)
            .unwrap_or_default(),
        out_dir: flags
            .out_dir
            .clone()
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from("netfolio-out")),
        top_k: flags.top_k.or(file.top_k).unwrap_or(10),
        coverage: flags.coverage.or(file.coverage).unwrap_or(0.99),
        rebalance: flags.rebalance.or(file.rebalance).unwrap_or(RebalanceArg::Daily),
    };

    if config.portfolio_size == 0 {
        return Err(Error::config("portfolio size must be >= 1".to_string()));
    }
    if config.in_months == 0 || config.out_months == 0 || config.step_months == 0 {
        return Err(Error::config(
            "window lengths and step must be >= 1 month".to_string(),
        ));
    }
    if !(0.5..1.0).contains(&config.damping) {
        return Err(Error::config(format!(
            "damping must be in [0.5, 1), got {}",
            config.damping
        )));
    }
    if config.bins < 2 {
        return Err(Error::config("bins must be >= 2".to_string()));
    }
    if !(0.0..=1.0).contains(&config.coverage) {
        return Err(Error::config("coverage must be in [0, 1]".to_string()));
    }
    if needs_prices && !config.prices.exists() {
        return Err(Error::config(format!(
            "price file {} does not exist",
            config.prices.display()
        )));
    }
    if let Some(caps) = &config.caps {
        if !caps.exists() {
            return Err(Error::config(format!(
                "caps file {} does not exist",
                caps.display()
            )));
        }
    }
    // the filter must parse and match the grid before anything runs
    config.strategy_specs()?;
    Ok(config)
}
