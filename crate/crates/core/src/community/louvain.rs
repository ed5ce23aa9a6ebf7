//! Louvain modularity optimization with seeded sweep order.
//!
//! The classic two-phase scheme: greedy single-node moves until no move
//! improves modularity, then aggregation of communities into super-nodes,
//! repeated until the partition stops changing. A final refinement sweep runs
//! on the original graph so the returned partition is locally maximal with
//! respect to single-node moves there, not just on the coarsened graph.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{canonicalize_labels, modularity};
use crate::error::{Error, Result};
use crate::graphrep::AssetGraph;

/// Result of a Louvain run, including the modularity trace used to assert the
/// non-decreasing-per-pass invariant.
#[derive(Debug, Clone)]
pub struct LouvainRun {
    pub labels: Vec<usize>,
    pub modularity: f64,
    /// Modularity on the original graph after each pass.
    pub pass_modularity: Vec<f64>,
}

/// Working graph for one aggregation level. Adjacency excludes self-loops,
/// which are tracked separately (a self-loop of weight w contributes w to the
/// node's strength and to the community's internal weight).
struct LevelGraph {
    n: usize,
    adj: Vec<Vec<(usize, f64)>>,
    self_weight: Vec<f64>,
    strength: Vec<f64>,
    two_m: f64,
}

impl LevelGraph {
    fn from_asset_graph(g: &AssetGraph) -> Self {
        let n = g.n();
        let mut adj = vec![Vec::new(); n];
        for e in &g.edges {
            adj[e.a].push((e.b, e.weight));
            adj[e.b].push((e.a, e.weight));
        }
        let self_weight = vec![0.0; n];
        let strength: Vec<f64> = (0..n)
            .map(|i| adj[i].iter().map(|&(_, w)| w).sum::<f64>())
            .collect();
        let two_m = strength.iter().sum();
        LevelGraph {
            n,
            adj,
            self_weight,
            strength,
            two_m,
        }
    }

    /// One full greedy phase. Returns the node->community map and whether any
    /// move happened.
    fn local_move(&self, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let mut comm: Vec<usize> = (0..self.n).collect();
        // community totals count full node degrees, self-loops included
        let mut sigma_tot: Vec<f64> = (0..self.n)
            .map(|i| self.strength[i] + self.self_weight[i])
            .collect();
        let mut order: Vec<usize> = (0..self.n).collect();
        order.shuffle(rng);

        let mut moved_any = false;
        let mut neighbor_weight = vec![0.0f64; self.n];
        // move threshold scales with total weight: inverted-MST graphs carry
        // epsilon-sized edges whose legitimate gains are epsilon^2 / 2m
        let tol = 1e-12 * self.two_m;
        loop {
            let mut moved_this_sweep = false;
            for &node in &order {
                let current = comm[node];
                let k = self.strength[node] + self.self_weight[node];

                let mut touched: Vec<usize> = Vec::new();
                for &(nb, w) in &self.adj[node] {
                    let c = comm[nb];
                    if neighbor_weight[c] == 0.0 && !touched.contains(&c) {
                        touched.push(c);
                    }
                    neighbor_weight[c] += w;
                }
                touched.sort_unstable();

                sigma_tot[current] -= k;
                let mut best = current;
                let mut best_gain = neighbor_weight[current] - sigma_tot[current] * k / self.two_m;
                for &c in &touched {
                    if c == current {
                        continue;
                    }
                    let gain = neighbor_weight[c] - sigma_tot[c] * k / self.two_m;
                    if gain > best_gain + tol {
                        best_gain = gain;
                        best = c;
                    }
                }
                sigma_tot[best] += k;
                if best != current {
                    comm[node] = best;
                    moved_this_sweep = true;
                    moved_any = true;
                }
                for &c in &touched {
                    neighbor_weight[c] = 0.0;
                }
            }
            if !moved_this_sweep {
                break;
            }
        }
        (comm, moved_any)
    }

    /// Collapse communities into super-nodes. `comm` must use contiguous ids.
    fn aggregate(&self, comm: &[usize]) -> LevelGraph {
        let n_new = comm.iter().max().map_or(0, |m| m + 1);
        let mut self_weight = vec![0.0f64; n_new];
        let mut pair_weight: std::collections::BTreeMap<(usize, usize), f64> =
            std::collections::BTreeMap::new();
        for node in 0..self.n {
            let a = comm[node];
            self_weight[a] += self.self_weight[node];
            for &(nb, w) in &self.adj[node] {
                if nb < node {
                    continue; // each undirected edge once
                }
                let b = comm[nb];
                if a == b {
                    self_weight[a] += 2.0 * w;
                } else {
                    let key = (a.min(b), a.max(b));
                    *pair_weight.entry(key).or_insert(0.0) += w;
                }
            }
        }
        let mut adj = vec![Vec::new(); n_new];
        for (&(a, b), &w) in &pair_weight {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        let strength: Vec<f64> = (0..n_new)
            .map(|i| adj[i].iter().map(|&(_, w)| w).sum::<f64>())
            .collect();
        LevelGraph {
            n: n_new,
            adj,
            self_weight,
            strength,
            two_m: self.two_m,
        }
    }
}

/// Full Louvain with per-pass modularity instrumentation.
pub fn louvain_detailed(g: &AssetGraph, seed: u64) -> Result<LouvainRun> {
    if g.edges.iter().any(|e| e.weight.is_nan() || e.weight <= 0.0) {
        return Err(Error::data(
            "louvain requires strictly positive similarity weights".to_string(),
        ));
    }
    let n = g.n();
    if n == 0 {
        return Err(Error::data("louvain on an empty graph".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // degenerate graphs: every node its own community, modularity 0
    if g.edges.is_empty() {
        return Ok(LouvainRun {
            labels: (0..n).collect(),
            modularity: 0.0,
            pass_modularity: vec![0.0],
        });
    }

    let mut level = LevelGraph::from_asset_graph(g);
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    loop {
        let (comm, improved) = level.local_move(&mut rng);
        let comm = canonicalize_labels(&comm);
        for label in assignment.iter_mut() {
            *label = comm[*label];
        }
        trace.push(modularity(g, &assignment));
        if !improved {
            break;
        }
        let next = level.aggregate(&comm);
        if next.n == level.n {
            break;
        }
        level = next;
    }

    // refinement on the original graph: guarantees no single-node move improves
    let original = LevelGraph::from_asset_graph(g);
    let refined = refine(&original, &assignment, &mut rng);
    if refined != assignment {
        assignment = refined;
        trace.push(modularity(g, &assignment));
    }

    let labels = canonicalize_labels(&assignment);
    let q = modularity(g, &labels);
    Ok(LouvainRun {
        labels,
        modularity: q,
        pass_modularity: trace,
    })
}

/// Greedy single-node sweeps starting from an existing assignment.
fn refine(level: &LevelGraph, start: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut comm = start.to_vec();
    let n_comms = comm.iter().max().map_or(0, |m| m + 1);
    let mut sigma_tot = vec![0.0f64; n_comms];
    for i in 0..level.n {
        sigma_tot[comm[i]] += level.strength[i] + level.self_weight[i];
    }
    let mut order: Vec<usize> = (0..level.n).collect();
    order.shuffle(rng);
    let mut neighbor_weight = vec![0.0f64; n_comms];
    let tol = 1e-12 * level.two_m;
    loop {
        let mut moved = false;
        for &node in &order {
            let current = comm[node];
            let k = level.strength[node] + level.self_weight[node];
            let mut touched: Vec<usize> = Vec::new();
            for &(nb, w) in &level.adj[node] {
                let c = comm[nb];
                if neighbor_weight[c] == 0.0 && !touched.contains(&c) {
                    touched.push(c);
                }
                neighbor_weight[c] += w;
            }
            touched.sort_unstable();
            sigma_tot[current] -= k;
            let mut best = current;
            let mut best_gain = neighbor_weight[current] - sigma_tot[current] * k / level.two_m;
            for &c in &touched {
                if c == current {
                    continue;
                }
                let gain = neighbor_weight[c] - sigma_tot[c] * k / level.two_m;
                if gain > best_gain + tol {
                    best_gain = gain;
                    best = c;
                }
            }
            sigma_tot[best] += k;
            if best != current {
                comm[node] = best;
                moved = true;
            }
            for &c in &touched {
                neighbor_weight[c] = 0.0;
            }
        }
        if !moved {
            break;
        }
    }
    canonicalize_labels(&comm)
}

/// Convenience wrapper returning labels and final modularity only.
pub fn louvain(g: &AssetGraph, seed: u64) -> Result<(Vec<usize>, f64)> {
    let run = louvain_detailed(g, seed)?;
    Ok((run.labels, run.modularity))
}
