//! The five scoring strategies: PCA on the relational matrix, weighted degree
//! (strength) on per-community sub-graphs, and closeness centrality on the
//! whole graph, each for FG and MST.

use log::warn;
use nalgebra::DMatrix;

use super::{AssetScores, MetricInputs, MetricKind, ScoreScope, SelectionMetric};
use crate::community::Partition;
use crate::error::{Error, Result};
use crate::graphrep::AssetGraph;
use crate::relational::RelationalMatrix;

/// PCA scores: each asset's row of the relational matrix is its feature
/// vector; features are centered; the score is the Euclidean norm of the
/// projection onto the leading `components` principal components.
///
/// When eigenvalues are degenerate at the cut-off the whole tied group is
/// included, which keeps the score basis-independent (an arbitrary rotation
/// inside a tied eigenspace cannot change it). With fewer than `components`
/// nonzero eigenvalues the available ones are used and a warning logged.
pub fn pca_scores(rel: &RelationalMatrix, components: usize) -> Result<AssetScores> {
    let n = rel.n();
    if n < 3 {
        return Err(Error::data(format!(
            "pca needs at least 3 assets, got {n}"
        )));
    }
    // center features (columns)
    let mut centered = rel.values.clone();
    for j in 0..n {
        let mean = centered.column(j).sum() / n as f64;
        for i in 0..n {
            centered[[i, j]] -= mean;
        }
    }
    // feature covariance, exactly symmetric by construction
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let dot: f64 = (0..n).map(|t| centered[[t, i]] * centered[[t, j]]).sum();
            cov[(i, j)] = dot / n as f64;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]].max(0.0);

    // usable rank: eigenvalues meaningfully above zero
    let rank = order
        .iter()
        .take_while(|&&i| eig.eigenvalues[i] > 1e-12 * lambda_max.max(1e-300))
        .count();
    let target = components.min(rank);
    if rank < components {
        warn!(
            "relational matrix has rank {rank} < {components}: using {target} components"
        );
    }
    if target == 0 {
        return Ok(AssetScores {
            metric: MetricKind::Pca,
            assets: rel.assets.clone(),
            values: vec![0.0; n],
            scope: ScoreScope::WholeGraph,
        });
    }
    // extend through eigenvalues tied with the boundary one
    let boundary = eig.eigenvalues[order[target - 1]];
    let mut k = target;
    while k < n && (boundary - eig.eigenvalues[order[k]]).abs() <= 1e-9 * lambda_max {
        k += 1;
    }

    let mut values = vec![0.0f64; n];
    for (i, value) in values.iter_mut().enumerate() {
        let mut sq = 0.0;
        for &c in order.iter().take(k) {
            let proj: f64 = (0..n)
                .map(|j| centered[[i, j]] * eig.eigenvectors[(j, c)])
                .sum();
            sq += proj * proj;
        }
        *value = sq.sqrt();
    }
    Ok(AssetScores {
        metric: MetricKind::Pca,
        assets: rel.assets.clone(),
        values,
        scope: ScoreScope::WholeGraph,
    })
}

/// Weighted degree (strength) inside each community's induced sub-graph:
/// the sum of incident edge distances whose endpoints share the community.
pub fn degree_scores(g: &AssetGraph, partition: &Partition, kind: MetricKind) -> Result<AssetScores> {
    if partition.labels.len() != g.n() {
        return Err(Error::data(format!(
            "partition covers {} nodes, graph has {}",
            partition.labels.len(),
            g.n()
        )));
    }
    let mut values = vec![0.0f64; g.n()];
    for e in &g.edges {
        if partition.labels[e.a] == partition.labels[e.b] {
            values[e.a] += e.weight;
            values[e.b] += e.weight;
        }
    }
    Ok(AssetScores {
        metric: kind,
        assets: g.nodes.clone(),
        values,
        scope: ScoreScope::PerCommunity,
    })
}

/// Single-source shortest-path distances by dense Dijkstra (the graphs here
/// are complete or tree-shaped, so the O(N^2) scan beats a heap).
fn dijkstra(g: &AssetGraph, source: usize) -> Vec<f64> {
    let n = g.n();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[source] = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        let mut best = f64::INFINITY;
        for v in 0..n {
            if !done[v] && dist[v] < best {
                best = dist[v];
                u = v;
            }
        }
        if u == usize::MAX {
            break;
        }
        done[u] = true;
        for &(v, w) in g.neighbors(u) {
            let cand = dist[u] + w;
            if cand < dist[v] {
                dist[v] = cand;
            }
        }
    }
    dist
}

/// Closeness centrality on the whole graph: (N-1) / sum of true shortest-path
/// distances. The direct edge is not assumed shortest on the FG. Nodes whose
/// distance sum is zero (fully degenerate weights) get closeness 0.
pub fn closeness_scores(g: &AssetGraph, kind: MetricKind) -> Result<AssetScores> {
    let n = g.n();
    let mut values = vec![0.0f64; n];
    for (i, value) in values.iter_mut().enumerate() {
        let dist = dijkstra(g, i);
        if dist.iter().any(|d| d.is_infinite()) {
            return Err(Error::data(
                "closeness centrality needs a connected graph".to_string(),
            ));
        }
        let total: f64 = dist.iter().sum();
        if total > 0.0 {
            *value = (n as f64 - 1.0) / total;
        } else if n > 1 {
            warn!("zero-weight degenerate graph: closeness defined as 0");
        }
    }
    Ok(AssetScores {
        metric: kind,
        assets: g.nodes.clone(),
        values,
        scope: ScoreScope::WholeGraph,
    })
}

#[derive(Debug, Clone, Default)]
pub struct PcaMetric {
    pub components: Option<usize>,
}

impl SelectionMetric for PcaMetric {
    fn kind(&self) -> MetricKind {
        MetricKind::Pca
    }

    fn scores(&self, inputs: &MetricInputs) -> Result<AssetScores> {
        pca_scores(inputs.relation, self.components.unwrap_or(3))
    }
}

#[derive(Debug, Clone)]
pub struct DegreeFgMetric;

impl SelectionMetric for DegreeFgMetric {
    fn kind(&self) -> MetricKind {
        MetricKind::DegFg
    }

    fn scores(&self, inputs: &MetricInputs) -> Result<AssetScores> {
        degree_scores(inputs.fg, inputs.partition, MetricKind::DegFg)
    }
}

#[derive(Debug, Clone)]
pub struct DegreeMstMetric;

impl SelectionMetric for DegreeMstMetric {
    fn kind(&self) -> MetricKind {
        MetricKind::DegMst
    }

    fn scores(&self, inputs: &MetricInputs) -> Result<AssetScores> {
        degree_scores(inputs.mst, inputs.partition, MetricKind::DegMst)
    }
}

#[derive(Debug, Clone)]
pub struct ClosenessFgMetric;

impl SelectionMetric for ClosenessFgMetric {
    fn kind(&self) -> MetricKind {
        MetricKind::CloFg
    }

    fn scores(&self, inputs: &MetricInputs) -> Result<AssetScores> {
        closeness_scores(inputs.fg, MetricKind::CloFg)
    }
}

#[derive(Debug, Clone)]
pub struct ClosenessMstMetric;

impl SelectionMetric for ClosenessMstMetric {
    fn kind(&self) -> MetricKind {
        MetricKind::CloMst
    }

    fn scores(&self, inputs: &MetricInputs) -> Result<AssetScores> {
        closeness_scores(inputs.mst, MetricKind::CloMst)
    }
}
