//! Strategy-grid backtesting: every (clusterer, relation, metric, range) cell
//! is built on in-sample data, its portfolio evaluated out-of-sample, and the
//! results aggregated across sliding windows alongside RANDOM and index
//! baselines.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{ApParams, ClustererKind, ClustererRegistry, Partition};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::graphrep::{build_full_graph, build_mst, distance_matrix, AssetGraph};
use crate::market_data::WindowPair;
use crate::relational::{
    cooccurrence_matrix, correlation_matrix, mutual_information_matrix, RelationKind,
    RelationalMatrix,
};
use crate::selection::{
    select_portfolio, MetricInputs, MetricKind, MetricRegistry, RangeKind, SelectionSpec,
};

pub const RANDOM_BASELINE_ID: &str = "RANDOM";
pub const INDEX_BASELINE_ID: &str = "INDEX";

/// One cell of the strategy grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrategySpec {
    pub clusterer: ClustererKind,
    pub relation: RelationKind,
    pub metric: MetricKind,
    pub range: RangeKind,
}

impl StrategySpec {
    /// Canonical id, e.g. `LV-cCor-DegMST-max`.
    pub fn id(&self) -> String {
        format!(
            "{}-{}-{}-{}",
            self.clusterer, self.relation, self.metric, self.range
        )
    }

    /// Parse an id like `AP-MI-PCA-med`. Each field may be `*` in filter
    /// patterns (see [`expand_strategy_filter`]).
    pub fn parse(s: &str) -> Result<StrategySpec> {
        let parts: Vec<&str> = s.split('-').collect();
        if parts.len() != 4 {
            return Err(Error::config(format!(
                "bad strategy id {s:?}: want CLUSTERER-RELATION-METRIC-RANGE"
            )));
        }
        Ok(StrategySpec {
            clusterer: ClustererKind::parse(parts[0])
                .ok_or_else(|| Error::config(format!("unknown clusterer {:?}", parts[0])))?,
            relation: RelationKind::parse(parts[1])
                .ok_or_else(|| Error::config(format!("unknown relation {:?}", parts[1])))?,
            metric: MetricKind::parse(parts[2])
                .ok_or_else(|| Error::config(format!("unknown metric {:?}", parts[2])))?,
            range: RangeKind::parse(parts[3])
                .ok_or_else(|| Error::config(format!("unknown range {:?}", parts[3])))?,
        })
    }

    /// The full 2 x 4 x 5 x 3 = 120 grid in canonical order.
    pub fn full_grid() -> Vec<StrategySpec> {
        let mut out = Vec::with_capacity(120);
        for clusterer in ClustererKind::ALL {
            for relation in RelationKind::ALL {
                for metric in MetricKind::ALL {
                    for range in RangeKind::ALL {
                        out.push(StrategySpec {
                            clusterer,
                            relation,
                            metric,
                            range,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Expand comma-ready filter patterns (fields may be `*`) against the grid.
/// The result preserves canonical grid order and drops duplicates.
pub fn expand_strategy_filter(patterns: &[String]) -> Result<Vec<StrategySpec>> {
    let grid = StrategySpec::full_grid();
    if patterns.is_empty() {
        return Ok(grid);
    }
    let mut selected = vec![false; grid.len()];
    for pattern in patterns {
        let parts: Vec<&str> = pattern.split('-').collect();
        if parts.len() != 4 {
            return Err(Error::config(format!(
                "bad strategy pattern {pattern:?}: want CLUSTERER-RELATION-METRIC-RANGE with * wildcards"
            )));
        }
        let mut matched = false;
        for (i, spec) in grid.iter().enumerate() {
            let ok = (parts[0] == "*" || ClustererKind::parse(parts[0]) == Some(spec.clusterer))
                && (parts[1] == "*" || RelationKind::parse(parts[1]) == Some(spec.relation))
                && (parts[2] == "*" || MetricKind::parse(parts[2]) == Some(spec.metric))
                && (parts[3] == "*" || RangeKind::parse(parts[3]) == Some(spec.range));
            if ok {
                selected[i] = true;
                matched = true;
            }
        }
        if !matched {
            return Err(Error::config(format!(
                "strategy pattern {pattern:?} matches nothing in the grid"
            )));
        }
    }
    Ok(grid
        .into_iter()
        .zip(selected)
        .filter_map(|(s, keep)| keep.then_some(s))
        .collect())
}

/// Rebalancing policy for multi-asset portfolios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rebalance {
    /// Rebalance to the target weights every day (the default): the portfolio
    /// return is the weighted mean of constituent returns.
    Daily,
    /// Buy at the target weights once and hold.
    BuyAndHold,
}

/// Out-of-sample performance of one portfolio over one window.
#[derive(Debug, Clone)]
pub struct PortfolioResult {
    /// Strategy id or baseline tag.
    pub strategy: String,
    /// Window label (in-sample start date).
    pub window: String,
    pub dates: Vec<NaiveDate>,
    /// Simple daily portfolio returns.
    pub daily_returns: Vec<f64>,
    /// Compounded return over the window, in percent.
    pub cumulative_return: f64,
    /// Population std of the daily returns.
    pub volatility: f64,
    /// cumulative_return / volatility; 0 when both are 0.
    pub ratio: f64,
}

fn ratio_of(cum: f64, vol: f64) -> f64 {
    if vol == 0.0 {
        if cum == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(cum)
        }
    } else {
        cum / vol
    }
}

fn summarize_series(
    strategy: String,
    window: String,
    dates: Vec<NaiveDate>,
    daily: Vec<f64>,
) -> PortfolioResult {
    let cumulative = (daily.iter().fold(1.0, |acc, r| acc * (1.0 + r)) - 1.0) * 100.0;
    let n = daily.len() as f64;
    let mean = daily.iter().sum::<f64>() / n;
    let var = daily.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let vol = var.sqrt();
    PortfolioResult {
        strategy,
        window,
        dates,
        daily_returns: daily,
        cumulative_return: cumulative,
        volatility: vol,
        ratio: ratio_of(cumulative, vol),
    }
}

/// Evaluate a weighted portfolio on the out-of-sample half of a window.
pub fn evaluate_weighted(
    label: &str,
    indices: &[usize],
    weights: &[f64],
    window: &WindowPair,
    rebalance: Rebalance,
) -> Result<PortfolioResult> {
    if indices.is_empty() {
        return Err(Error::data("portfolio has no assets".to_string()));
    }
    let out = &window.out_of_sample;
    let t = out.n_days();
    let daily = match rebalance {
        Rebalance::Daily => (0..t)
            .map(|day| {
                indices
                    .iter()
                    .zip(weights)
                    .map(|(&j, &w)| w * (out.raw_returns[[day, j]].exp() - 1.0))
                    .sum::<f64>()
            })
            .collect::<Vec<f64>>(),
        Rebalance::BuyAndHold => {
            let mut holdings: Vec<f64> = weights.to_vec();
            let mut value = 1.0f64;
            let mut daily = Vec::with_capacity(t);
            for day in 0..t {
                for (h, &j) in holdings.iter_mut().zip(indices) {
                    *h *= out.raw_returns[[day, j]].exp();
                }
                let new_value: f64 = holdings.iter().sum();
                daily.push(new_value / value - 1.0);
                value = new_value;
            }
            daily
        }
    };
    Ok(summarize_series(
        label.to_string(),
        window.label.clone(),
        out.dates.clone(),
        daily,
    ))
}

/// Equal-weight evaluation of a symbol list (daily rebalancing): the daily
/// portfolio return is the mean of the constituents' simple daily returns.
pub fn evaluate_portfolio(
    label: &str,
    symbols: &[String],
    window: &WindowPair,
    rebalance: Rebalance,
) -> Result<PortfolioResult> {
    if symbols.is_empty() {
        return Err(Error::data("portfolio has no assets".to_string()));
    }
    let out = &window.out_of_sample;
    let indices: Vec<usize> = symbols
        .iter()
        .map(|sym| {
            out.assets
                .iter()
                .position(|a| a == sym)
                .ok_or_else(|| {
                    Error::data(format!(
                        "symbol {sym} missing from out-of-sample window {}",
                        window.label
                    ))
                })
        })
        .collect::<Result<_>>()?;
    let w = 1.0 / indices.len() as f64;
    let weights = vec![w; indices.len()];
    evaluate_weighted(label, &indices, &weights, window, rebalance)
}

/// Engine-wide knobs shared by every strategy cell.
#[derive(Debug, Clone)]
pub struct EngineParams {
    pub portfolio_size: usize,
    pub mi_bins: usize,
    pub ap: ApParams,
    pub seed: u64,
    pub rebalance: Rebalance,
    pub random_repetitions: usize,
    /// Months per in-sample window; also the co-occurrence denominator.
    pub in_months: usize,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            portfolio_size: 25,
            mi_bins: 8,
            ap: ApParams::default(),
            seed: 0,
            rebalance: Rebalance::Daily,
            random_repetitions: 100,
            in_months: 12,
        }
    }
}

/// Everything 15 strategy cells share once (clusterer, relation) is fixed.
pub struct GroupContext {
    pub relation: RelationalMatrix,
    pub partition: Partition,
    pub fg: AssetGraph,
    pub mst: AssetGraph,
}

/// One evaluated strategy cell: the portfolio result plus the selection that
/// produced it (symbol, community id, score).
#[derive(Debug, Clone)]
pub struct StrategyOutcome {
    pub result: PortfolioResult,
    pub selection: Vec<(String, usize, f64)>,
}

/// Runs strategy cells against windows, resolving clusterers and metrics by
/// name from its registries.
pub struct StrategyEngine {
    pub clusterers: ClustererRegistry,
    pub metrics: MetricRegistry,
    pub params: EngineParams,
}

fn label_tag(label: &str) -> u64 {
    // FNV-1a over the window label, so sub-seeds do not depend on window order
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl StrategyEngine {
    pub fn new(params: EngineParams) -> Self {
        StrategyEngine {
            clusterers: ClustererRegistry::standard(params.ap),
            metrics: MetricRegistry::standard(),
            params,
        }
    }

    /// Build the shared context for one (clusterer, relation) group.
    pub fn build_group(
        &self,
        clusterer: ClustererKind,
        relation: RelationKind,
        window: &WindowPair,
    ) -> Result<GroupContext> {
        let clusterer_impl = self
            .clusterers
            .get(clusterer.name())
            .ok_or_else(|| Error::config(format!("no clusterer registered as {clusterer}")))?;
        let seed = derive_seed(
            self.params.seed,
            &[clusterer as u64, relation as u64 + 10, label_tag(&window.label)],
        );
        let rel = match relation {
            RelationKind::Cor => correlation_matrix(&window.in_sample)?,
            RelationKind::Mi => mutual_information_matrix(&window.in_sample, self.params.mi_bins)?,
            RelationKind::CCor | RelationKind::CMi => {
                cooccurrence_matrix(
                    &window.in_sample,
                    clusterer_impl.as_ref(),
                    relation.base(),
                    self.params.in_months,
                    self.params.mi_bins,
                    seed,
                )?
                .matrix
            }
        };
        let partition = clusterer_impl.detect(&rel, derive_seed(seed, &[1]))?;
        let distance = distance_matrix(&rel)?;
        let fg = build_full_graph(&distance);
        let mst = build_mst(&distance);
        Ok(GroupContext {
            relation: rel,
            partition,
            fg,
            mst,
        })
    }

    /// Run one cell inside an already-built group.
    pub fn run_cell(
        &self,
        group: &GroupContext,
        spec: &StrategySpec,
        window: &WindowPair,
    ) -> Result<StrategyOutcome> {
        let metric = self
            .metrics
            .get(spec.metric.name())
            .ok_or_else(|| Error::config(format!("no metric registered as {}", spec.metric)))?;
        let scores = metric.scores(&MetricInputs {
            relation: &group.relation,
            fg: &group.fg,
            mst: &group.mst,
            partition: &group.partition,
        })?;
        self.run_cell_with_scores(group, spec, &scores, window)
    }

    fn run_cell_with_scores(
        &self,
        group: &GroupContext,
        spec: &StrategySpec,
        scores: &crate::selection::AssetScores,
        window: &WindowPair,
    ) -> Result<StrategyOutcome> {
        let symbols = select_portfolio(
            &group.partition,
            scores,
            &SelectionSpec {
                metric: spec.metric,
                range: spec.range,
                portfolio_size: self.params.portfolio_size,
            },
        )?;
        let result = evaluate_portfolio(&spec.id(), &symbols, window, self.params.rebalance)?;
        let selection = symbols
            .iter()
            .map(|sym| {
                let idx = group
                    .partition
                    .assets
                    .iter()
                    .position(|a| a == sym)
                    .expect("selected symbol comes from the partition");
                (sym.clone(), group.partition.labels[idx], scores.values[idx])
            })
            .collect();
        Ok(StrategyOutcome { result, selection })
    }

    /// Full pipeline for a single strategy cell on one window.
    pub fn run_strategy(&self, spec: &StrategySpec, window: &WindowPair) -> Result<StrategyOutcome> {
        let ctx = format!("strategy {} window {}", spec.id(), window.label);
        let group = self
            .build_group(spec.clusterer, spec.relation, window)?;
        self.run_cell(&group, spec, window)
            .map_err(|e| e.with_context(&ctx))
    }

    /// Run many strategy cells over many windows. Work is parallel per
    /// (window, clusterer, relation) group; results come back in canonical
    /// (window, grid) order regardless of scheduling.
    pub fn run_grid(
        &self,
        specs: &[StrategySpec],
        windows: &[WindowPair],
    ) -> Result<Vec<StrategyOutcome>> {
        // group cells that share clusterer and relation
        let mut groups: BTreeMap<(ClustererKind, RelationKind), Vec<StrategySpec>> =
            BTreeMap::new();
        for spec in specs {
            groups
                .entry((spec.clusterer, spec.relation))
                .or_default()
                .push(*spec);
        }
        let jobs: Vec<(usize, (ClustererKind, RelationKind), &Vec<StrategySpec>)> = windows
            .iter()
            .enumerate()
            .flat_map(|(wi, _)| groups.iter().map(move |(key, cells)| (wi, *key, cells)))
            .collect();

        let nested: Vec<Vec<StrategyOutcome>> = jobs
            .par_iter()
            .map(|&(wi, (clusterer, relation), cells)| {
                let window = &windows[wi];
                let group = self
                    .build_group(clusterer, relation, window)
                    .map_err(|e| {
                        e.with_context(&format!(
                            "group {clusterer}-{relation} window {}",
                            window.label
                        ))
                    })?;
                // score each metric once; the three ranges share it
                let mut out = Vec::with_capacity(cells.len());
                let mut score_cache: BTreeMap<MetricKind, crate::selection::AssetScores> =
                    BTreeMap::new();
                for spec in cells {
                    if let std::collections::btree_map::Entry::Vacant(e) = score_cache.entry(spec.metric) {
                        let metric = self.metrics.get(spec.metric.name()).ok_or_else(|| {
                            Error::config(format!("no metric registered as {}", spec.metric))
                        })?;
                        let scores = metric
                            .scores(&MetricInputs {
                                relation: &group.relation,
                                fg: &group.fg,
                                mst: &group.mst,
                                partition: &group.partition,
                            })
                            .map_err(|e| {
                                e.with_context(&format!(
                                    "strategy {} window {}",
                                    spec.id(),
                                    window.label
                                ))
                            })?;
                        e.insert(scores);
                    }
                    let outcome = self
                        .run_cell_with_scores(&group, spec, &score_cache[&spec.metric], window)
                        .map_err(|e| {
                            e.with_context(&format!(
                                "strategy {} window {}",
                                spec.id(),
                                window.label
                            ))
                        })?;
                    out.push(outcome);
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;

        let mut flat: Vec<StrategyOutcome> = nested.into_iter().flatten().collect();
        // canonical order: window label, then grid position
        let grid_pos: BTreeMap<String, usize> = StrategySpec::full_grid()
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id(), i))
            .collect();
        flat.sort_by(|a, b| {
            a.result
                .window
                .cmp(&b.result.window)
                .then(grid_pos[&a.result.strategy].cmp(&grid_pos[&b.result.strategy]))
        });
        Ok(flat)
    }

    /// RANDOM baseline: P distinct assets drawn uniformly, equal weights,
    /// averaged over seeded repetitions (cumulative return, volatility, and
    /// the daily series are each averaged; the ratio is recomputed from the
    /// averaged figures).
    pub fn run_random_baseline(&self, window: &WindowPair) -> Result<PortfolioResult> {
        let universe = &window.out_of_sample.assets;
        let n = universe.len();
        let p = self.params.portfolio_size.min(n);
        if p == 0 {
            return Err(Error::data("empty universe for RANDOM baseline".to_string()));
        }
        let reps = self.params.random_repetitions.max(1);
        let mut sum_daily = vec![0.0f64; window.out_of_sample.n_days()];
        let mut sum_cum = 0.0;
        let mut sum_vol = 0.0;
        for rep in 0..reps {
            let seed = derive_seed(
                self.params.seed,
                &[0x7261_6e64, label_tag(&window.label), rep as u64],
            );
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut indices: Vec<usize> = (0..n).collect();
            indices.shuffle(&mut rng);
            indices.truncate(p);
            indices.sort_unstable();
            let weights = vec![1.0 / p as f64; p];
            let result = evaluate_weighted(
                RANDOM_BASELINE_ID,
                &indices,
                &weights,
                window,
                self.params.rebalance,
            )?;
            for (acc, r) in sum_daily.iter_mut().zip(&result.daily_returns) {
                *acc += r;
            }
            sum_cum += result.cumulative_return;
            sum_vol += result.volatility;
        }
        let k = reps as f64;
        let cum = sum_cum / k;
        let vol = sum_vol / k;
        Ok(PortfolioResult {
            strategy: RANDOM_BASELINE_ID.to_string(),
            window: window.label.clone(),
            dates: window.out_of_sample.dates.clone(),
            daily_returns: sum_daily.iter().map(|s| s / k).collect(),
            cumulative_return: cum,
            volatility: vol,
            ratio: ratio_of(cum, vol),
        })
    }

    /// Index baseline: the whole universe weighted by market cap when caps
    /// are given (weights fixed at window start), equal weights otherwise.
    pub fn run_index_baseline(
        &self,
        window: &WindowPair,
        caps: Option<&[f64]>,
    ) -> Result<PortfolioResult> {
        let n = window.out_of_sample.assets.len();
        let indices: Vec<usize> = (0..n).collect();
        let weights = match caps {
            Some(caps) => {
                if caps.len() != n {
                    return Err(Error::data(format!(
                        "caps cover {} assets, universe has {n}",
                        caps.len()
                    )));
                }
                if caps.iter().any(|c| *c < 0.0) {
                    return Err(Error::data("negative market cap".to_string()));
                }
                let total: f64 = caps.iter().sum();
                if total <= 0.0 {
                    return Err(Error::data("market caps sum to zero".to_string()));
                }
                caps.iter().map(|c| c / total).collect::<Vec<f64>>()
            }
            None => vec![1.0 / n as f64; n],
        };
        evaluate_weighted(
            INDEX_BASELINE_ID,
            &indices,
            &weights,
            window,
            self.params.rebalance,
        )
    }
}

/// Mean and standard error of a strategy's figures across windows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategySummary {
    pub id: String,
    pub windows: usize,
    pub mean_return: f64,
    pub se_return: f64,
    pub mean_volatility: f64,
    pub se_volatility: f64,
    /// mean_return / mean_volatility.
    pub ratio: f64,
}

/// Aggregated report: per-strategy summaries, baselines, and the three top-k
/// rankings (return desc, volatility asc, ratio desc).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub strategies: Vec<StrategySummary>,
    pub baselines: Vec<StrategySummary>,
    pub top_by_return: Vec<String>,
    pub top_by_volatility: Vec<String>,
    pub top_by_ratio: Vec<String>,
}

/// Sample standard deviation over the mean: SE = sample-std / sqrt(n),
/// defined as 0 for a single observation.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt() / n.sqrt())
}

fn summarize_group(id: &str, results: &[&PortfolioResult]) -> StrategySummary {
    let returns: Vec<f64> = results.iter().map(|r| r.cumulative_return).collect();
    let vols: Vec<f64> = results.iter().map(|r| r.volatility).collect();
    let (mean_return, se_return) = mean_and_se(&returns);
    let (mean_volatility, se_volatility) = mean_and_se(&vols);
    StrategySummary {
        id: id.to_string(),
        windows: results.len(),
        mean_return,
        se_return,
        mean_volatility,
        se_volatility,
        ratio: ratio_of(mean_return, mean_volatility),
    }
}

/// Aggregate window results per strategy and rank the strategies three ways.
/// Baselines (RANDOM, INDEX) are summarized separately and excluded from the
/// rankings.
pub fn aggregate_and_rank(results: &[PortfolioResult], top_k: usize) -> Result<Report> {
    if results.is_empty() {
        return Err(Error::data("no results to aggregate".to_string()));
    }
    let mut by_id: BTreeMap<&str, Vec<&PortfolioResult>> = BTreeMap::new();
    for r in results {
        by_id.entry(r.strategy.as_str()).or_default().push(r);
    }
    let mut strategies = Vec::new();
    let mut baselines = Vec::new();
    for (id, group) in &by_id {
        let summary = summarize_group(id, group);
        if *id == RANDOM_BASELINE_ID || *id == INDEX_BASELINE_ID {
            baselines.push(summary);
        } else {
            strategies.push(summary);
        }
    }

    let rank = |key: fn(&StrategySummary) -> f64, ascending: bool| -> Vec<String> {
        let mut order: Vec<&StrategySummary> = strategies.iter().collect();
        order.sort_by(|a, b| {
            let cmp = key(a).total_cmp(&key(b));
            (if ascending { cmp } else { cmp.reverse() }).then(a.id.cmp(&b.id))
        });
        order.into_iter().take(top_k).map(|s| s.id.clone()).collect()
    };
    let top_by_return = rank(|s| s.mean_return, false);
    let top_by_volatility = rank(|s| s.mean_volatility, true);
    let top_by_ratio = rank(|s| s.ratio, false);

    Ok(Report {
        strategies,
        baselines,
        top_by_return,
        top_by_volatility,
        top_by_ratio,
    })
}

/// Per-strategy, per-window results CSV:
/// `strategy_id,window_start,cum_return_pct,volatility,ratio`.
pub fn write_results_csv(results: &[PortfolioResult], path: &Path) -> Result<()> {
    let mut rows: Vec<&PortfolioResult> = results.iter().collect();
    rows.sort_by(|a, b| a.strategy.cmp(&b.strategy).then(a.window.cmp(&b.window)));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "strategy_id",
        "window_start",
        "cum_return_pct",
        "volatility",
        "ratio",
    ])?;
    for r in rows {
        w.write_record([
            r.strategy.as_str(),
            r.window.as_str(),
            &format!("{}", r.cumulative_return),
            &format!("{}", r.volatility),
            &format!("{}", r.ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary JSON with per-strategy mean/SE, baselines, and top-k tables.
pub fn write_summary_json(report: &Report, path: &Path) -> Result<()> {
    std::fs::write(
        path,
        serde_json::to_string_pretty(report).map_err(|e| Error::data(e.to_string()))?,
    )?;
    Ok(())
}

/// Value-in-time CSV for chosen strategies on one window:
/// `date,strategy_id,portfolio_value`, value normalized to 1.0 at the window
/// start.
pub fn write_value_in_time_csv(
    results: &[PortfolioResult],
    ids: &[String],
    window: &str,
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "strategy_id", "portfolio_value"])?;
    for id in ids {
        let Some(r) = results
            .iter()
            .find(|r| r.strategy == *id && r.window == window)
        else {
            warn!("no result for {id} in window {window}, skipping value-in-time rows");
            continue;
        };
        let mut value = 1.0f64;
        for (date, ret) in r.dates.iter().zip(&r.daily_returns) {
            value *= 1.0 + ret;
            w.write_record([
                &date.format("%Y-%m-%d").to_string(),
                id.as_str(),
                &format!("{value}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Mean +/- SE summary tables: one row per (metric, range), one column per
/// (clusterer, relation) pair. `field` selects returns or volatilities.
pub fn write_summary_table_csv(
    report: &Report,
    field: fn(&StrategySummary) -> (f64, f64),
    path: &Path,
) -> Result<()> {
    let by_id: BTreeMap<&str, &StrategySummary> = report
        .strategies
        .iter()
        .map(|s| (s.id.as_str(), s))
        .collect();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["metric".to_string(), "range".to_string()];
    for clusterer in ClustererKind::ALL {
        for relation in RelationKind::ALL {
            header.push(format!("{clusterer}-{relation}"));
        }
    }
    w.write_record(&header)?;
    for metric in MetricKind::ALL {
        for range in RangeKind::ALL {
            let mut row = vec![metric.name().to_string(), range.name().to_string()];
            for clusterer in ClustererKind::ALL {
                for relation in RelationKind::ALL {
                    let id = StrategySpec {
                        clusterer,
                        relation,
                        metric,
                        range,
                    }
                    .id();
                    row.push(match by_id.get(id.as_str()) {
                        Some(s) => {
                            let (mean, se) = field(s);
                            format!("{mean:.4} ± {se:.4}")
                        }
                        None => String::new(),
                    });
                }
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
