//! Distance transforms and the two network representations: full graph (FG)
//! and minimal spanning tree (MST).

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::relational::{RelationKind, RelationalMatrix};

/// Symmetric nonnegative distance matrix derived from a relational matrix.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    /// The relational kind the distances came from.
    pub kind: RelationKind,
    pub assets: Vec<String>,
    pub values: Array2<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.assets.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphShape {
    Fg,
    Mst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Weighted undirected graph over assets. Construct via [`build_full_graph`]
/// or [`build_mst`]; those constructors guarantee the shape invariants
/// (FG: N(N-1)/2 edges; MST: N-1 edges, connected, acyclic).
#[derive(Debug, Clone)]
pub struct AssetGraph {
    pub shape: GraphShape,
    pub nodes: Vec<String>,
    pub edges: Vec<GraphEdge>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl AssetGraph {
    pub fn new(shape: GraphShape, nodes: Vec<String>, edges: Vec<GraphEdge>) -> Self {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &edges {
            adjacency[e.a].push((e.b, e.weight));
            adjacency[e.b].push((e.a, e.weight));
        }
        AssetGraph {
            shape,
            nodes,
            edges,
            adjacency,
        }
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }
}

/// Distance from correlation-family matrices.
/// Cor: D = sqrt(2(1 - C)). Co-occurrence kinds: D = 1 - frequency.
pub fn correlation_distance(rel: &RelationalMatrix) -> Result<DistanceMatrix> {
    let n = rel.n();
    let mut values = Array2::<f64>::zeros((n, n));
    match rel.kind {
        RelationKind::Cor => {
            for i in 0..n {
                for j in 0..n {
                    // clamp tiny negative arguments from float noise near C = 1
                    values[[i, j]] = (2.0 * (1.0 - rel.values[[i, j]])).max(0.0).sqrt();
                }
            }
        }
        RelationKind::CCor | RelationKind::CMi => {
            for i in 0..n {
                for j in 0..n {
                    values[[i, j]] = 1.0 - rel.values[[i, j]];
                }
            }
        }
        RelationKind::Mi => {
            return Err(Error::config(
                "correlation_distance does not apply to MI matrices; use mi_distance".to_string(),
            ))
        }
    }
    for i in 0..n {
        values[[i, i]] = 0.0;
    }
    Ok(DistanceMatrix {
        kind: rel.kind,
        assets: rel.assets.clone(),
        values,
    })
}

/// Distance from a mutual-information matrix: D_ij = |M_ij - m| with m the
/// maximum off-diagonal MI. The diagonal is forced to zero; self-distances
/// are never used by the MST or centrality code.
pub fn mi_distance(rel: &RelationalMatrix) -> Result<DistanceMatrix> {
    let n = rel.n();
    if n < 2 {
        return Err(Error::data(
            "mi_distance needs at least one off-diagonal entry".to_string(),
        ));
    }
    let mut max_off = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                max_off = max_off.max(rel.values[[i, j]]);
            }
        }
    }
    let mut values = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            values[[i, j]] = if i == j {
                0.0
            } else {
                (rel.values[[i, j]] - max_off).abs()
            };
        }
    }
    Ok(DistanceMatrix {
        kind: RelationKind::Mi,
        assets: rel.assets.clone(),
        values,
    })
}

/// Dispatch to the distance transform appropriate for the relation kind.
pub fn distance_matrix(rel: &RelationalMatrix) -> Result<DistanceMatrix> {
    match rel.kind {
        RelationKind::Mi => mi_distance(rel),
        _ => correlation_distance(rel),
    }
}

/// Complete graph with edge weight d[i][j].
pub fn build_full_graph(d: &DistanceMatrix) -> AssetGraph {
    let n = d.n();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push(GraphEdge {
                a: i,
                b: j,
                weight: d.values[[i, j]],
            });
        }
    }
    AssetGraph::new(GraphShape::Fg, d.assets.clone(), edges)
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            self.parent[x] = self.find(self.parent[x]);
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal MST with the deterministic tie-break (weight, min index, max index).
pub fn build_mst(d: &DistanceMatrix) -> AssetGraph {
    let n = d.n();
    let mut candidates: Vec<GraphEdge> = Vec::with_capacity(n.saturating_mul(n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            candidates.push(GraphEdge {
                a: i,
                b: j,
                weight: d.values[[i, j]],
            });
        }
    }
    candidates.sort_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    let mut ds = DisjointSet::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for e in candidates {
        if ds.union(e.a, e.b) {
            edges.push(e);
            if edges.len() + 1 == n {
                break;
            }
        }
    }
    AssetGraph::new(GraphShape::Mst, d.assets.clone(), edges)
}

/// DOT export: one node per symbol, undirected edges carrying a `weight`
/// attribute.
pub fn write_dot(g: &AssetGraph, path: &Path, community: Option<&[usize]>) -> Result<()> {
    let mut out = String::from("graph assets {\n");
    for (i, sym) in g.nodes.iter().enumerate() {
        match community {
            Some(labels) => out.push_str(&format!(
                "  \"{sym}\" [community={}];\n",
                labels[i]
            )),
            None => out.push_str(&format!("  \"{sym}\";\n")),
        }
    }
    for e in &g.edges {
        out.push_str(&format!(
            "  \"{}\" -- \"{}\" [weight={}];\n",
            g.nodes[e.a], g.nodes[e.b], e.weight
        ));
    }
    out.push_str("}\n");
    std::fs::write(path, out)?;
    Ok(())
}

/// Edge-list CSV export: `i,j,weight` with symbols for i and j.
pub fn write_edge_list(g: &AssetGraph, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "j", "weight"])?;
    for e in &g.edges {
        w.write_record([
            g.nodes[e.a].as_str(),
            g.nodes[e.b].as_str(),
            &format!("{}", e.weight),
        ])?;
    }
    w.flush()?;
    Ok(())
}
