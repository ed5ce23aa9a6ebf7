//! Affinity propagation: exemplar-based clustering by responsibility and
//! availability message passing on a similarity matrix. Handles negative
//! similarities, so correlation and mutual-information matrices are used in
//! their original forms.

use ndarray::Array2;

use super::canonicalize_labels;
use crate::error::{Error, Result};

/// Self-similarity assigned to every point before message passing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preference {
    /// Median of the off-diagonal similarities (the default).
    Median,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApParams {
    /// Damping factor in [0.5, 1).
    pub damping: f64,
    pub preference: Preference,
    pub max_iter: usize,
    /// Iterations the exemplar set must stay unchanged to declare convergence.
    pub stable_iter: usize,
}

impl Default for ApParams {
    fn default() -> Self {
        ApParams {
            damping: 0.9,
            preference: Preference::Median,
            max_iter: 1000,
            stable_iter: 100,
        }
    }
}

/// Raw output of a converged run.
#[derive(Debug, Clone)]
pub struct ApRun {
    /// Canonical community labels (0..Q-1).
    pub labels: Vec<usize>,
    /// Indices of the exemplars, ascending.
    pub exemplars: Vec<usize>,
    pub iterations: usize,
    /// Sum of similarities of every point to its exemplar, preferences
    /// included for the exemplars themselves.
    pub net_similarity: f64,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Run affinity propagation on a symmetric similarity matrix.
pub fn affinity_propagation(similarity: &Array2<f64>, params: &ApParams) -> Result<ApRun> {
    let n = similarity.nrows();
    if n == 0 || similarity.ncols() != n {
        return Err(Error::data(
            "affinity propagation needs a nonempty square similarity matrix".to_string(),
        ));
    }
    if !(0.5..1.0).contains(&params.damping) {
        return Err(Error::config(format!(
            "damping must be in [0.5, 1), got {}",
            params.damping
        )));
    }
    if n == 1 {
        return Ok(ApRun {
            labels: vec![0],
            exemplars: vec![0],
            iterations: 0,
            net_similarity: match params.preference {
                Preference::Median => 0.0,
                Preference::Value(v) => v,
            },
        });
    }

    let mut off = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off.push(similarity[[i, j]]);
            }
        }
    }
    let pref = match params.preference {
        Preference::Value(v) => v,
        Preference::Median => median(off.clone()),
    };
    let range = off.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v))
        - off.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if range == 0.0 {
        // structureless input: every partition has the same net similarity,
        // so resolve to a single cluster with the first point as exemplar
        return Ok(ApRun {
            labels: vec![0; n],
            exemplars: vec![0],
            iterations: 0,
            net_similarity: pref + (n as f64 - 1.0) * off[0],
        });
    }
    let mut s = similarity.clone();
    // index-graded preference perturbation: breaks exact ties between
    // otherwise indistinguishable candidate exemplars (lowest index wins).
    // Scaled by the similarity range, so a constant shift of all
    // similarities leaves the perturbation unchanged.
    let tie_eps = 1e-9 * range / n as f64;
    for k in 0..n {
        s[[k, k]] = pref - tie_eps * (k as f64 + 1.0);
    }

    let lambda = params.damping;
    let mut r = Array2::<f64>::zeros((n, n));
    let mut a = Array2::<f64>::zeros((n, n));
    let mut exemplars: Vec<usize> = Vec::new();
    let mut stable = 0usize;
    let mut iterations = 0usize;

    for it in 1..=params.max_iter {
        iterations = it;

        // responsibilities: r(i,k) = s(i,k) - max_{k' != k} [a(i,k') + s(i,k')]
        for i in 0..n {
            let mut max1 = f64::NEG_INFINITY;
            let mut max1_idx = usize::MAX;
            let mut max2 = f64::NEG_INFINITY;
            for k in 0..n {
                let v = a[[i, k]] + s[[i, k]];
                if v > max1 {
                    max2 = max1;
                    max1 = v;
                    max1_idx = k;
                } else if v > max2 {
                    max2 = v;
                }
            }
            for k in 0..n {
                let competing = if k == max1_idx { max2 } else { max1 };
                let fresh = s[[i, k]] - competing;
                r[[i, k]] = lambda * r[[i, k]] + (1.0 - lambda) * fresh;
            }
        }

        // availabilities: a(i,k) = min(0, r(k,k) + sum_{i' not in {i,k}} max(0, r(i',k)))
        //                 a(k,k) = sum_{i' != k} max(0, r(i',k))
        for k in 0..n {
            let mut positive_sum = 0.0;
            for i in 0..n {
                if i != k {
                    positive_sum += r[[i, k]].max(0.0);
                }
            }
            for i in 0..n {
                let fresh = if i == k {
                    positive_sum
                } else {
                    (r[[k, k]] + positive_sum - r[[i, k]].max(0.0)).min(0.0)
                };
                a[[i, k]] = lambda * a[[i, k]] + (1.0 - lambda) * fresh;
            }
        }

        let current: Vec<usize> = (0..n).filter(|&k| r[[k, k]] + a[[k, k]] > 0.0).collect();
        if !current.is_empty() && current == exemplars {
            stable += 1;
            if stable >= params.stable_iter {
                return Ok(finish(&s, &current, it, pref));
            }
        } else {
            stable = if current.is_empty() { 0 } else { 1 };
            exemplars = current;
        }
    }

    Err(Error::NonConvergence {
        iterations,
        last_exemplars: exemplars,
        context: String::new(),
    })
}

fn finish(s: &Array2<f64>, exemplars: &[usize], iterations: usize, pref: f64) -> ApRun {
    let n = s.nrows();
    let mut labels = vec![0usize; n];
    let mut net_similarity = 0.0;
    for i in 0..n {
        if exemplars.contains(&i) {
            labels[i] = i;
            net_similarity += pref;
            continue;
        }
        let mut best = exemplars[0];
        let mut best_sim = s[[i, exemplars[0]]];
        for &k in &exemplars[1..] {
            if s[[i, k]] > best_sim {
                best_sim = s[[i, k]];
                best = k;
            }
        }
        labels[i] = best;
        net_similarity += best_sim;
    }
    ApRun {
        labels: canonicalize_labels(&labels),
        exemplars: exemplars.to_vec(),
        iterations,
        net_similarity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference implementation written directly from the update equations,
    /// one message at a time, with exclusion sums taken in index order. Kept
    /// deliberately independent of the production code path.
    pub(crate) fn reference_ap(
        similarity: &Array2<f64>,
        params: &ApParams,
    ) -> Option<(Vec<usize>, Vec<usize>)> {
        let n = similarity.nrows();
        let mut off = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off.push(similarity[[i, j]]);
                }
            }
        }
        let pref = match params.preference {
            Preference::Value(v) => v,
            Preference::Median => {
                let mut sorted = off.clone();
                sorted.sort_by(f64::total_cmp);
                let m = sorted.len();
                if m % 2 == 1 {
                    sorted[m / 2]
                } else {
                    0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
                }
            }
        };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &off {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo == 0.0 {
            return Some((vec![0; n], vec![0]));
        }
        let mut s = similarity.clone();
        let tie_eps = 1e-9 * (hi - lo) / n as f64;
        for k in 0..n {
            s[[k, k]] = pref - tie_eps * (k as f64 + 1.0);
        }
        let mut r = Array2::<f64>::zeros((n, n));
        let mut a = Array2::<f64>::zeros((n, n));
        let mut exemplars: Vec<usize> = Vec::new();
        let mut stable = 0usize;
        for _ in 0..params.max_iter {
            let mut r_new = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for k in 0..n {
                    let mut m = f64::NEG_INFINITY;
                    for kp in 0..n {
                        if kp != k {
                            m = m.max(a[[i, kp]] + s[[i, kp]]);
                        }
                    }
                    r_new[[i, k]] = s[[i, k]] - m;
                }
            }
            for i in 0..n {
                for k in 0..n {
                    r[[i, k]] = params.damping * r[[i, k]] + (1.0 - params.damping) * r_new[[i, k]];
                }
            }
            let mut a_new = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for k in 0..n {
                    if i == k {
                        let mut sum = 0.0;
                        for ip in 0..n {
                            if ip != k {
                                sum += r[[ip, k]].max(0.0);
                            }
                        }
                        a_new[[k, k]] = sum;
                    } else {
                        let mut sum = 0.0;
                        for ip in 0..n {
                            if ip != i && ip != k {
                                sum += r[[ip, k]].max(0.0);
                            }
                        }
                        a_new[[i, k]] = (r[[k, k]] + sum).min(0.0);
                    }
                }
            }
            for i in 0..n {
                for k in 0..n {
                    a[[i, k]] = params.damping * a[[i, k]] + (1.0 - params.damping) * a_new[[i, k]];
                }
            }
            let current: Vec<usize> = (0..n).filter(|&k| r[[k, k]] + a[[k, k]] > 0.0).collect();
            if !current.is_empty() && current == exemplars {
                stable += 1;
                if stable >= params.stable_iter {
                    let mut labels = vec![0usize; n];
                    for i in 0..n {
                        if current.contains(&i) {
                            labels[i] = i;
                            continue;
                        }
                        let mut best = current[0];
                        for &k in &current[1..] {
                            if s[[i, k]] > s[[i, best]] {
                                best = k;
                            }
                        }
                        labels[i] = best;
                    }
                    return Some((canonicalize_labels(&labels), current));
                }
            } else {
                stable = if current.is_empty() { 0 } else { 1 };
                exemplars = current;
            }
        }
        None
    }

    /// Two well-separated blobs encoded as negative squared distance.
    pub(crate) fn two_blob_similarity(
        sizes: (usize, usize),
        separation: f64,
        jitter: &[f64],
    ) -> Array2<f64> {
        let n = sizes.0 + sizes.1;
        let mut points = Vec::with_capacity(n);
        for i in 0..sizes.0 {
            points.push(jitter[i % jitter.len()]);
        }
        for i in 0..sizes.1 {
            points.push(separation + jitter[(i + 1) % jitter.len()]);
        }
        let mut s = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                s[[i, j]] = -(points[i] - points[j]).powi(2);
            }
        }
        s
    }

    #[test]
    fn single_point_is_its_own_exemplar() {
        let s = Array2::<f64>::zeros((1, 1));
        let run = affinity_propagation(&s, &ApParams::default()).unwrap();
        assert_eq!(run.labels, vec![0]);
        assert_eq!(run.exemplars, vec![0]);
    }

    #[test]
    fn splits_two_blobs_and_matches_reference() {
        let jitter = [0.0, 0.25, -0.25, 0.125];
        let params = ApParams::default();
        let s = two_blob_similarity((5, 6), 10.0, &jitter);
        let run = affinity_propagation(&s, &params).unwrap();
        assert_eq!(run.labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
        let (ref_labels, ref_exemplars) = reference_ap(&s, &params).unwrap();
        assert_eq!(run.labels, ref_labels);
        assert_eq!(run.exemplars, ref_exemplars);
    }

    #[test]
    fn identical_rows_collapse_to_one_cluster() {
        let n = 6;
        let mut s = Array2::<f64>::from_elem((n, n), 1.0);
        for k in 0..n {
            s[[k, k]] = 0.0; // overwritten by the median preference anyway
        }
        let params = ApParams::default();
        let run = affinity_propagation(&s, &params).unwrap();
        assert_eq!(run.labels, vec![0; n]);
        let (ref_labels, _) = reference_ap(&s, &params).unwrap();
        assert_eq!(run.labels, ref_labels);
    }

    #[test]
    fn translation_invariance_under_constant_shift() {
        // dyadic similarities and shift keep all float operations exact
        let jitter = [0.0, 0.5, -0.5, 0.25];
        let s = two_blob_similarity((4, 5), 8.0, &jitter);
        let params = ApParams {
            preference: Preference::Value(-64.0),
            ..ApParams::default()
        };
        let run = affinity_propagation(&s, &params).unwrap();
        let shifted = s.mapv(|v| v + 16.0);
        let shifted_params = ApParams {
            preference: Preference::Value(-64.0 + 16.0),
            ..params
        };
        let run_shifted = affinity_propagation(&shifted, &shifted_params).unwrap();
        assert_eq!(run.labels, run_shifted.labels);
        assert_eq!(run.exemplars, run_shifted.exemplars);
    }

    #[test]
    fn non_convergence_reports_last_exemplars() {
        let jitter = [0.0, 0.25];
        let s = two_blob_similarity((3, 3), 5.0, &jitter);
        let params = ApParams {
            max_iter: 3,
            ..ApParams::default()
        };
        match affinity_propagation(&s, &params) {
            Err(Error::NonConvergence { iterations, .. }) => assert_eq!(iterations, 3),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let jitter = [0.0, 0.3, -0.2];
        let s = two_blob_similarity((6, 4), 7.0, &jitter);
        let params = ApParams::default();
        let a = affinity_propagation(&s, &params).unwrap();
        let b = affinity_propagation(&s, &params).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.net_similarity, b.net_similarity);
        assert_eq!(a.iterations, b.iterations);
    }
}
