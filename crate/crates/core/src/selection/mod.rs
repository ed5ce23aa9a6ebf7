//! Asset scoring and portfolio selection.
//!
//! Five interchangeable scoring strategies (PCA plus degree/closeness
//! centrality on FG and MST) sit behind the [`SelectionMetric`] trait and are
//! resolved by name through a [`MetricRegistry`]. Selection draws a quota of
//! assets from every community at one of three ranges (max, med, min).

mod metrics;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::error::{Error, Result};
use crate::graphrep::AssetGraph;
use crate::relational::RelationalMatrix;

pub use metrics::{
    closeness_scores, degree_scores, pca_scores, ClosenessFgMetric, ClosenessMstMetric,
    DegreeFgMetric, DegreeMstMetric, PcaMetric,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    Pca,
    DegFg,
    CloFg,
    DegMst,
    CloMst,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Pca,
        MetricKind::DegFg,
        MetricKind::CloFg,
        MetricKind::DegMst,
        MetricKind::CloMst,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Pca => "PCA",
            MetricKind::DegFg => "DegFG",
            MetricKind::CloFg => "CloFG",
            MetricKind::DegMst => "DegMST",
            MetricKind::CloMst => "CloMST",
        }
    }

    pub fn parse(s: &str) -> Option<MetricKind> {
        match s {
            "PCA" | "pca" => Some(MetricKind::Pca),
            "DegFG" | "degfg" => Some(MetricKind::DegFg),
            "CloFG" | "clofg" => Some(MetricKind::CloFg),
            "DegMST" | "degmst" => Some(MetricKind::DegMst),
            "CloMST" | "clomst" => Some(MetricKind::CloMst),
            _ => None,
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RangeKind {
    Max,
    Med,
    Min,
}

impl RangeKind {
    pub const ALL: [RangeKind; 3] = [RangeKind::Max, RangeKind::Med, RangeKind::Min];

    pub fn name(&self) -> &'static str {
        match self {
            RangeKind::Max => "max",
            RangeKind::Med => "med",
            RangeKind::Min => "min",
        }
    }

    pub fn parse(s: &str) -> Option<RangeKind> {
        match s {
            "max" => Some(RangeKind::Max),
            "med" => Some(RangeKind::Med),
            "min" => Some(RangeKind::Min),
            _ => None,
        }
    }
}

impl std::fmt::Display for RangeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreScope {
    WholeGraph,
    PerCommunity,
}

/// Per-asset scalar scores produced by one metric.
#[derive(Debug, Clone)]
pub struct AssetScores {
    pub metric: MetricKind,
    pub assets: Vec<String>,
    pub values: Vec<f64>,
    pub scope: ScoreScope,
}

/// What to select: which metric, at which range, how many assets.
#[derive(Debug, Clone, Copy)]
pub struct SelectionSpec {
    pub metric: MetricKind,
    pub range: RangeKind,
    pub portfolio_size: usize,
}

/// Everything a scoring strategy may need. PCA reads the relational matrix;
/// degree metrics read a graph plus the partition; closeness metrics read a
/// graph whole.
pub struct MetricInputs<'a> {
    pub relation: &'a RelationalMatrix,
    pub fg: &'a AssetGraph,
    pub mst: &'a AssetGraph,
    pub partition: &'a Partition,
}

/// A pluggable per-asset scoring strategy.
pub trait SelectionMetric: Send + Sync {
    fn kind(&self) -> MetricKind;

    fn name(&self) -> &'static str {
        self.kind().name()
    }

    fn scores(&self, inputs: &MetricInputs) -> Result<AssetScores>;
}

/// Name-keyed registry of scoring strategies.
#[derive(Clone)]
pub struct MetricRegistry {
    entries: BTreeMap<String, Arc<dyn SelectionMetric>>,
}

impl MetricRegistry {
    pub fn empty() -> Self {
        MetricRegistry {
            entries: BTreeMap::new(),
        }
    }

    /// The five metrics used by the strategy grid.
    pub fn standard() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(PcaMetric::default()));
        reg.register(Arc::new(DegreeFgMetric));
        reg.register(Arc::new(ClosenessFgMetric));
        reg.register(Arc::new(DegreeMstMetric));
        reg.register(Arc::new(ClosenessMstMetric));
        reg
    }

    pub fn register(&mut self, metric: Arc<dyn SelectionMetric>) {
        self.entries.insert(metric.name().to_string(), metric);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn SelectionMetric>> {
        self.entries.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(|s| s.as_str()).collect()
    }
}

impl Default for MetricRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

fn median_of(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Pick `k` indices from a score vector: largest for `max`, smallest for
/// `min`, nearest the median for `med`. Ties break by ascending index; the
/// returned order is the selection order (best match first).
pub fn pick_range(values: &[f64], k: usize, range: RangeKind) -> Vec<usize> {
    debug_assert!(k <= values.len());
    let k = k.min(values.len());
    let mut idx: Vec<usize> = (0..values.len()).collect();
    match range {
        RangeKind::Max => {
            idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        }
        RangeKind::Min => {
            idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        }
        RangeKind::Med => {
            let med = median_of(values);
            idx.sort_by(|&a, &b| {
                (values[a] - med)
                    .abs()
                    .total_cmp(&(values[b] - med).abs())
                    .then(a.cmp(&b))
            });
        }
    }
    idx.truncate(k);
    idx
}

/// Draw a portfolio across communities under the quota rule: a base quota of
/// floor(P/Q) per community, the R = P mod Q extras going to the R largest
/// communities (member count, ties by community id). Communities smaller than
/// their quota contribute everything and the deficit passes to the next
/// largest communities with spare capacity.
pub fn select_portfolio(
    partition: &Partition,
    scores: &AssetScores,
    spec: &SelectionSpec,
) -> Result<Vec<String>> {
    let n = partition.assets.len();
    let p = spec.portfolio_size;
    if p == 0 {
        return Err(Error::config("portfolio size must be >= 1".to_string()));
    }
    if scores.values.len() != n {
        return Err(Error::data(format!(
            "scores cover {} assets, partition has {n}",
            scores.values.len()
        )));
    }
    if n <= p {
        if n < p {
            warn!("universe has {n} assets, fewer than portfolio size {p}: taking all");
        }
        return Ok(partition.assets.clone());
    }

    let members = partition.members();
    let q_count = members.len();
    let mut quotas = vec![p / q_count; q_count];
    let mut by_size: Vec<usize> = (0..q_count).collect();
    by_size.sort_by(|&a, &b| members[b].len().cmp(&members[a].len()).then(a.cmp(&b)));
    for &c in by_size.iter().take(p % q_count) {
        quotas[c] += 1;
    }

    // take-all for undersized communities, pass the deficit onward
    let mut deficit = 0usize;
    for c in 0..q_count {
        if quotas[c] > members[c].len() {
            deficit += quotas[c] - members[c].len();
            quotas[c] = members[c].len();
        }
    }
    while deficit > 0 {
        let mut gave = false;
        for &c in &by_size {
            if deficit == 0 {
                break;
            }
            if quotas[c] < members[c].len() {
                quotas[c] += 1;
                deficit -= 1;
                gave = true;
            }
        }
        debug_assert!(gave, "no spare capacity while deficit remains");
        if !gave {
            break;
        }
    }

    let mut picked = Vec::with_capacity(p);
    for (c, member) in members.iter().enumerate() {
        if quotas[c] == 0 {
            continue;
        }
        let local: Vec<f64> = member.iter().map(|&i| scores.values[i]).collect();
        for li in pick_range(&local, quotas[c], spec.range) {
            picked.push(partition.assets[member[li]].clone());
        }
    }
    Ok(picked)
}

/// Export one strategy's selection: `strategy_id,symbol,community_id,score`.
pub fn write_selection_csv(
    rows: &[(String, String, usize, f64)],
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["strategy_id", "symbol", "community_id", "score"])?;
    for (strategy, symbol, community, score) in rows {
        w.write_record([
            strategy.as_str(),
            symbol.as_str(),
            &community.to_string(),
            &format!("{score}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}
