//! Relational matrices between assets: Pearson correlation, mutual
//! information, and their monthly co-occurrence variants.

use std::path::Path;

use log::warn;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::community::{Clusterer, Partition};
use crate::error::{Error, Result};
use crate::market_data::ReturnPanel;

/// Which relationship a matrix encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationKind {
    /// Pearson correlation, entries in [-1, 1].
    Cor,
    /// Mutual information in nats, entries >= 0.
    Mi,
    /// Monthly co-occurrence frequency built on correlation communities.
    CCor,
    /// Monthly co-occurrence frequency built on mutual-information communities.
    CMi,
}

impl RelationKind {
    pub const ALL: [RelationKind; 4] = [
        RelationKind::Cor,
        RelationKind::Mi,
        RelationKind::CCor,
        RelationKind::CMi,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RelationKind::Cor => "Cor",
            RelationKind::Mi => "MI",
            RelationKind::CCor => "cCor",
            RelationKind::CMi => "cMI",
        }
    }

    pub fn parse(s: &str) -> Option<RelationKind> {
        match s {
            "Cor" | "cor" | "COR" => Some(RelationKind::Cor),
            "MI" | "mi" | "Mi" => Some(RelationKind::Mi),
            "cCor" | "ccor" | "CCOR" => Some(RelationKind::CCor),
            "cMI" | "cmi" | "cMi" => Some(RelationKind::CMi),
            _ => None,
        }
    }

    /// The plain relation a co-occurrence kind is built from.
    pub fn base(&self) -> RelationKind {
        match self {
            RelationKind::CCor => RelationKind::Cor,
            RelationKind::CMi => RelationKind::Mi,
            other => *other,
        }
    }

    pub fn is_cooccurrence(&self) -> bool {
        matches!(self, RelationKind::CCor | RelationKind::CMi)
    }
}

impl std::fmt::Display for RelationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Symmetric N x N similarity matrix over assets.
#[derive(Debug, Clone)]
pub struct RelationalMatrix {
    pub kind: RelationKind,
    pub assets: Vec<String>,
    pub values: Array2<f64>,
    pub source_window: String,
}

impl RelationalMatrix {
    pub fn n(&self) -> usize {
        self.assets.len()
    }
}

/// Pearson correlation matrix (two-pass, exact symmetry, unit diagonal).
/// Pairs involving a zero-variance column get 0 off-diagonal.
pub fn correlation_matrix(panel: &ReturnPanel) -> Result<RelationalMatrix> {
    let t = panel.n_days();
    let n = panel.n_assets();
    if t < 2 {
        return Err(Error::data(format!(
            "need at least 2 observations for correlation, got {t}"
        )));
    }
    let means: Vec<f64> = (0..n)
        .map(|j| panel.returns.column(j).sum() / t as f64)
        .collect();
    let mut centered = panel.returns.clone();
    for j in 0..n {
        for i in 0..t {
            centered[[i, j]] -= means[j];
        }
    }
    let norms: Vec<f64> = (0..n)
        .map(|j| centered.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut values = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        values[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let c = if norms[i] > 0.0 && norms[j] > 0.0 {
                let dot: f64 = centered
                    .column(i)
                    .iter()
                    .zip(centered.column(j).iter())
                    .map(|(a, b)| a * b)
                    .sum();
                dot / (norms[i] * norms[j])
            } else {
                0.0
            };
            values[[i, j]] = c;
            values[[j, i]] = c;
        }
    }
    Ok(RelationalMatrix {
        kind: RelationKind::Cor,
        assets: panel.assets.clone(),
        values,
        source_window: panel
            .dates
            .first()
            .map(|d| d.format("%Y-%m-%d").to_string())
            .unwrap_or_default(),
    })
}

/// Equal-frequency (quantile) bin assignment for one column. Ties at bin
/// boundaries are broken by stable index order so the assignment is
/// deterministic and invariant under strictly monotone transforms.
pub fn quantile_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let t = values.len();
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut assignment = vec![0usize; t];
    for (rank, &idx) in order.iter().enumerate() {
        assignment[idx] = rank * bins / t;
    }
    assignment
}

/// Shannon entropy in nats of a discrete assignment with `bins` symbols.
fn entropy(assignment: &[usize], bins: usize) -> f64 {
    let t = assignment.len() as f64;
    let mut counts = vec![0usize; bins];
    for &b in assignment {
        counts[b] += 1;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information of two assignments via the shared joint histogram,
/// I(X;Y) = H(X) + H(Y) - H(X,Y). Exactly symmetric in its arguments.
pub fn mutual_information_pair(a: &[usize], b: &[usize], bins: usize) -> f64 {
    let t = a.len() as f64;
    let mut joint = vec![0usize; bins * bins];
    for (&x, &y) in a.iter().zip(b.iter()) {
        joint[x * bins + y] += 1;
    }
    let h_joint: f64 = joint
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.ln()
        })
        .sum();
    entropy(a, bins) + entropy(b, bins) - h_joint
}

/// Plug-in histogram MI matrix on quantile bins. Diagonal holds the per-asset
/// binned entropy. Zero-variance columns are treated as uninformative: zero
/// entropy and zero MI against everything.
pub fn mutual_information_matrix(panel: &ReturnPanel, bins: usize) -> Result<RelationalMatrix> {
    let t = panel.n_days();
    let n = panel.n_assets();
    if bins < 2 {
        return Err(Error::config(format!("bins must be >= 2, got {bins}")));
    }
    if t < bins {
        return Err(Error::data(format!(
            "need at least {bins} observations for {bins}-bin MI, got {t}"
        )));
    }
    let assignments: Vec<Option<Vec<usize>>> = (0..n)
        .map(|j| {
            if panel.zero_variance[j] {
                None
            } else {
                let col: Vec<f64> = panel.returns.column(j).to_vec();
                Some(quantile_bins(&col, bins))
            }
        })
        .collect();
    let mut values = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        values[[i, i]] = match &assignments[i] {
            Some(a) => entropy(a, bins),
            None => 0.0,
        };
        for j in (i + 1)..n {
            let mi = match (&assignments[i], &assignments[j]) {
                (Some(a), Some(b)) => mutual_information_pair(a, b, bins),
                _ => 0.0,
            };
            values[[i, j]] = mi;
            values[[j, i]] = mi;
        }
    }
    Ok(RelationalMatrix {
        kind: RelationKind::Mi,
        assets: panel.assets.clone(),
        values,
        source_window: panel
            .dates
            .first()
            .map(|d| d.format("%Y-%m-%d").to_string())
            .unwrap_or_default(),
    })
}

/// Co-occurrence matrix plus the monthly partitions it was counted from.
pub struct CooccurrenceRun {
    pub matrix: RelationalMatrix,
    pub monthly_partitions: Vec<Partition>,
    pub months_used: usize,
}

/// Frequency of two assets landing in the same community across the panel's
/// months. Each month is clustered independently with `clusterer` on the
/// `base_kind` relation; months where clustering fails are skipped with a
/// warning and the denominator reduced.
pub fn cooccurrence_matrix(
    panel: &ReturnPanel,
    clusterer: &dyn Clusterer,
    base_kind: RelationKind,
    months: usize,
    mi_bins: usize,
    seed: u64,
) -> Result<CooccurrenceRun> {
    let month_keys = panel.months();
    if month_keys.len() != months {
        return Err(Error::data(format!(
            "co-occurrence needs exactly {months} calendar months, panel has {}",
            month_keys.len()
        )));
    }
    let n = panel.n_assets();
    let mut monthly_partitions = Vec::new();
    for (m_idx, &m) in month_keys.iter().enumerate() {
        let slice = panel.slice_months(m, 1)?;
        if slice.n_days() < 15 {
            return Err(Error::data(format!(
                "month {m} has only {} trading days, need >= 15",
                slice.n_days()
            )));
        }
        let base = match base_kind.base() {
            RelationKind::Cor => correlation_matrix(&slice)?,
            RelationKind::Mi => mutual_information_matrix(&slice, mi_bins)?,
            other => {
                return Err(Error::config(format!(
                    "co-occurrence base must be Cor or MI, got {other}"
                )))
            }
        };
        let month_seed = crate::derive_seed(seed, &[0x636f_6f63, m_idx as u64]);
        match clusterer.detect(&base, month_seed) {
            Ok(p) => monthly_partitions.push(p),
            Err(Error::NonConvergence { iterations, .. }) => {
                warn!(
                    "skipping month {m}: {} failed to converge after {iterations} iterations",
                    clusterer.name()
                );
            }
            Err(e) => return Err(e),
        }
    }
    let used = monthly_partitions.len();
    if used == 0 {
        return Err(Error::data(
            "co-occurrence: clustering failed in every month".to_string(),
        ));
    }
    if used >= 2 {
        if let Ok(overlap) = yearly_overlap_coefficient(&monthly_partitions) {
            log::info!(
                "monthly community overlap coefficient: {:.1}% over {used} months ({} on {base_kind})",
                overlap * 100.0,
                clusterer.name()
            );
        }
    }
    let mut values = Array2::<f64>::zeros((n, n));
    for p in &monthly_partitions {
        for i in 0..n {
            for j in (i + 1)..n {
                if p.labels[i] == p.labels[j] {
                    values[[i, j]] += 1.0;
                }
            }
        }
    }
    for i in 0..n {
        values[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let f = values[[i, j]] / used as f64;
            values[[i, j]] = f;
            values[[j, i]] = f;
        }
    }
    let kind = match base_kind.base() {
        RelationKind::Cor => RelationKind::CCor,
        _ => RelationKind::CMi,
    };
    Ok(CooccurrenceRun {
        matrix: RelationalMatrix {
            kind,
            assets: panel.assets.clone(),
            values,
            source_window: panel
                .dates
                .first()
                .map(|d| d.format("%Y-%m-%d").to_string())
                .unwrap_or_default(),
        },
        monthly_partitions,
        months_used: used,
    })
}

/// Mean, over consecutive partition pairs, of the fraction of co-membered
/// pairs whose status survives from one partition to the next (Jaccard of
/// same-community pair sets). Diagnostic only.
pub fn yearly_overlap_coefficient(partitions: &[Partition]) -> Result<f64> {
    if partitions.len() < 2 {
        return Err(Error::data(
            "overlap coefficient needs at least 2 partitions".to_string(),
        ));
    }
    let n = partitions[0].labels.len();
    for p in partitions {
        if p.labels.len() != n {
            return Err(Error::data(
                "overlap coefficient: partitions cover different asset sets".to_string(),
            ));
        }
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for pair in partitions.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let mut both = 0usize;
        let mut either = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                let in_a = a.labels[i] == a.labels[j];
                let in_b = b.labels[i] == b.labels[j];
                if in_a || in_b {
                    either += 1;
                    if in_a && in_b {
                        both += 1;
                    }
                }
            }
        }
        acc += if either == 0 {
            1.0
        } else {
            both as f64 / either as f64
        };
        count += 1;
    }
    Ok(acc / count as f64)
}

/// Sidecar metadata written next to an exported matrix CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixManifest {
    pub kind: String,
    pub window: String,
    pub assets: usize,
}

/// Export a matrix as CSV (symbol header row and column) plus a sidecar
/// `<path>.manifest.json` carrying kind and window label.
pub fn write_matrix_csv(m: &RelationalMatrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![String::new()];
    header.extend(m.assets.iter().cloned());
    w.write_record(&header)?;
    for i in 0..m.n() {
        let mut row = vec![m.assets[i].clone()];
        for j in 0..m.n() {
            row.push(format!("{}", m.values[[i, j]]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    let manifest = MatrixManifest {
        kind: m.kind.name().to_string(),
        window: m.source_window.clone(),
        assets: m.n(),
    };
    let manifest_path = path.with_extension("manifest.json");
    std::fs::write(
        manifest_path,
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::data(e.to_string()))?,
    )?;
    Ok(())
}

/// Re-load a matrix CSV written by [`write_matrix_csv`].
pub fn read_matrix_csv(path: &Path) -> Result<RelationalMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let assets: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
    let n = assets.len();
    let mut values = Array2::<f64>::zeros((n, n));
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        for j in 0..n {
            values[[i, j]] = record[j + 1]
                .parse()
                .map_err(|e| Error::data(format!("bad matrix cell [{i},{j}]: {e}")))?;
        }
    }
    let manifest_path = path.with_extension("manifest.json");
    let (kind, window) = if manifest_path.exists() {
        let manifest: MatrixManifest =
            serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)
                .map_err(|e| Error::data(e.to_string()))?;
        (
            RelationKind::parse(&manifest.kind)
                .ok_or_else(|| Error::data(format!("unknown matrix kind {}", manifest.kind)))?,
            manifest.window,
        )
    } else {
        (RelationKind::Cor, String::new())
    };
    Ok(RelationalMatrix {
        kind,
        assets,
        values,
        source_window: window,
    })
}
