//! Community detection over asset networks.
//!
//! Two interchangeable strategies sit behind the [`Clusterer`] trait and are
//! looked up by name in a [`ClustererRegistry`]:
//!
//! - `LV`: Louvain modularity optimization on the minimal spanning tree with
//!   distance weights inverted into similarities.
//! - `AP`: affinity propagation run directly on the relational matrix.

mod affinity;
mod louvain;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

pub use affinity::{affinity_propagation, ApParams, Preference};
pub use louvain::{louvain, louvain_detailed, LouvainRun};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphrep::{build_mst, distance_matrix, AssetGraph, GraphEdge};
use crate::relational::{RelationKind, RelationalMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClustererKind {
    /// Louvain on the inverted-weight MST.
    Lv,
    /// Affinity propagation on the raw similarity matrix.
    Ap,
}

impl ClustererKind {
    pub const ALL: [ClustererKind; 2] = [ClustererKind::Lv, ClustererKind::Ap];

    pub fn name(&self) -> &'static str {
        match self {
            ClustererKind::Lv => "LV",
            ClustererKind::Ap => "AP",
        }
    }

    pub fn parse(s: &str) -> Option<ClustererKind> {
        match s {
            "LV" | "lv" | "louvain" => Some(ClustererKind::Lv),
            "AP" | "ap" | "affinity" => Some(ClustererKind::Ap),
            _ => None,
        }
    }
}

impl std::fmt::Display for ClustererKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Assignment of every asset to exactly one community.
#[derive(Debug, Clone)]
pub struct Partition {
    pub assets: Vec<String>,
    /// Community ids, contiguous from 0, canonicalized by ascending order of
    /// each community's minimum asset index.
    pub labels: Vec<usize>,
    pub clusterer: ClustererKind,
    pub relation_kind: RelationKind,
    /// Modularity for LV, net similarity for AP.
    pub quality: f64,
    /// Passes for LV, message iterations for AP.
    pub iterations: usize,
}

impl Partition {
    pub fn n_communities(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Member indices per community id.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_communities()];
        for (i, &c) in self.labels.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

/// Remap arbitrary community ids to 0..Q-1 ordered by each community's
/// minimum member index.
pub(crate) fn canonicalize_labels(labels: &[usize]) -> Vec<usize> {
    let mut first_seen: Vec<(usize, usize)> = Vec::new(); // (community, min index)
    for (i, &c) in labels.iter().enumerate() {
        if !first_seen.iter().any(|&(cc, _)| cc == c) {
            first_seen.push((c, i));
        }
    }
    first_seen.sort_by_key(|&(_, min_idx)| min_idx);
    let remap: BTreeMap<usize, usize> = first_seen
        .iter()
        .enumerate()
        .map(|(new, &(old, _))| (old, new))
        .collect();
    labels.iter().map(|c| remap[c]).collect()
}

/// Reflect MST distance weights into similarities: w' = (w_max - w) + eps
/// with eps = 1e-6 * w_max (or 1e-6 when w_max = 0). Edge set unchanged,
/// every new weight strictly positive.
pub fn invert_mst_weights(mst: &AssetGraph) -> AssetGraph {
    let w_max = mst
        .edges
        .iter()
        .map(|e| e.weight)
        .fold(0.0f64, f64::max);
    let eps = if w_max > 0.0 { 1e-6 * w_max } else { 1e-6 };
    let edges: Vec<GraphEdge> = mst
        .edges
        .iter()
        .map(|e| GraphEdge {
            a: e.a,
            b: e.b,
            weight: (w_max - e.weight) + eps,
        })
        .collect();
    AssetGraph::new(mst.shape, mst.nodes.clone(), edges)
}

/// Weighted modularity of a labeling, straight from the definition.
pub fn modularity(g: &AssetGraph, labels: &[usize]) -> f64 {
    let two_m = 2.0 * g.total_weight();
    if two_m == 0.0 {
        return 0.0;
    }
    let n_comms = labels.iter().max().map_or(0, |m| m + 1);
    let mut internal = vec![0.0f64; n_comms];
    let mut strength_tot = vec![0.0f64; n_comms];
    for e in &g.edges {
        if labels[e.a] == labels[e.b] {
            internal[labels[e.a]] += e.weight;
        }
        strength_tot[labels[e.a]] += e.weight;
        strength_tot[labels[e.b]] += e.weight;
    }
    (0..n_comms)
        .map(|c| 2.0 * internal[c] / two_m - (strength_tot[c] / two_m).powi(2))
        .sum()
}

/// A community-detection strategy usable on any relational matrix.
pub trait Clusterer: Send + Sync {
    fn kind(&self) -> ClustererKind;

    fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// Produce a partition with provenance filled in.
    fn detect(&self, relation: &RelationalMatrix, seed: u64) -> Result<Partition>;
}

/// Louvain route: relation -> distance -> MST -> inverted weights -> Louvain.
#[derive(Debug, Default, Clone)]
pub struct LouvainClusterer;

impl Clusterer for LouvainClusterer {
    fn kind(&self) -> ClustererKind {
        ClustererKind::Lv
    }

    fn detect(&self, relation: &RelationalMatrix, seed: u64) -> Result<Partition> {
        let distance = distance_matrix(relation)?;
        let mst = build_mst(&distance);
        let similarity = invert_mst_weights(&mst);
        let run = louvain_detailed(&similarity, seed)?;
        Ok(Partition {
            assets: relation.assets.clone(),
            labels: run.labels,
            clusterer: ClustererKind::Lv,
            relation_kind: relation.kind,
            quality: run.modularity,
            iterations: run.pass_modularity.len(),
        })
    }
}

/// Affinity-propagation route: the relational matrix is fed directly as the
/// similarity matrix, whatever its kind.
#[derive(Debug, Clone)]
#[derive(Default)]
pub struct ApClusterer {
    pub params: ApParams,
}


impl Clusterer for ApClusterer {
    fn kind(&self) -> ClustererKind {
        ClustererKind::Ap
    }

    fn detect(&self, relation: &RelationalMatrix, _seed: u64) -> Result<Partition> {
        // message passing can limit-cycle near preference boundaries; retry
        // with escalated damping before giving up
        let mut params = self.params;
        let run = loop {
            match affinity_propagation(&relation.values, &params) {
                Ok(run) => break run,
                Err(e @ Error::NonConvergence { .. }) => {
                    let next = (1.0 + params.damping) / 2.0;
                    if next >= 0.995 {
                        return Err(e);
                    }
                    log::warn!(
                        "affinity propagation did not settle at damping {}; retrying at {next}",
                        params.damping
                    );
                    params.damping = next;
                }
                Err(e) => return Err(e),
            }
        };
        Ok(Partition {
            assets: relation.assets.clone(),
            labels: run.labels,
            clusterer: ClustererKind::Ap,
            relation_kind: relation.kind,
            quality: run.net_similarity,
            iterations: run.iterations,
        })
    }
}

/// Name-keyed registry of community-detection strategies. The standard
/// registry holds `LV` and `AP`; callers may register alternatives and select
/// them by name at runtime.
#[derive(Clone)]
pub struct ClustererRegistry {
    entries: BTreeMap<String, Arc<dyn Clusterer>>,
}

impl ClustererRegistry {
    pub fn empty() -> Self {
        ClustererRegistry {
            entries: BTreeMap::new(),
        }
    }

    /// The two clusterers used by the strategy grid.
    pub fn standard(ap_params: ApParams) -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(LouvainClusterer));
        reg.register(Arc::new(ApClusterer { params: ap_params }));
        reg
    }

    pub fn register(&mut self, clusterer: Arc<dyn Clusterer>) {
        self.entries
            .insert(clusterer.name().to_string(), clusterer);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Clusterer>> {
        self.entries.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(|s| s.as_str()).collect()
    }
}

impl Default for ClustererRegistry {
    fn default() -> Self {
        Self::standard(ApParams::default())
    }
}

/// Run the clusterer designated by `kind` with default parameters.
pub fn detect_communities(
    relation: &RelationalMatrix,
    kind: ClustererKind,
    seed: u64,
) -> Result<Partition> {
    let registry = ClustererRegistry::default();
    registry
        .get(kind.name())
        .expect("standard registry covers all kinds")
        .detect(relation, seed)
}

/// Sidecar manifest for an exported partition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionManifest {
    pub clusterer: String,
    pub relation: String,
    pub quality: f64,
    pub seed: u64,
    pub iterations: usize,
}

/// Export `symbol,community_id` rows plus a `<path>.manifest.json` sidecar.
pub fn write_partition_csv(p: &Partition, seed: u64, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["symbol", "community_id"])?;
    for (i, sym) in p.assets.iter().enumerate() {
        w.write_record([sym.as_str(), &p.labels[i].to_string()])?;
    }
    w.flush()?;
    let manifest = PartitionManifest {
        clusterer: p.clusterer.name().to_string(),
        relation: p.relation_kind.name().to_string(),
        quality: p.quality,
        seed,
        iterations: p.iterations,
    };
    std::fs::write(
        path.with_extension("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::data(e.to_string()))?,
    )?;
    Ok(())
}
