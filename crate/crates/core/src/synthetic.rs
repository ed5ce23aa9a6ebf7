//! Synthetic price panels with known community structure, generated from a
//! one-factor-per-block model. Asset i in block b has log-return
//! r_i(t) = drift_b + beta_b * f_b(t) + idio * eps_i(t) with f_b and eps_i
//! independent standard normals, so the intra-block correlation converges to
//! beta^2 / (beta^2 + idio^2) and the block partition is the ground truth.

use chrono::{Datelike, NaiveDate};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::market_data::PricePanel;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockSpec {
    pub size: usize,
    /// Factor loading beta in [0, 1].
    pub loading: f64,
    /// Daily drift of the block's log-returns.
    #[serde(default)]
    pub drift: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorModelSpec {
    pub blocks: Vec<BlockSpec>,
    /// Number of trading days (price rows).
    pub days: usize,
    /// Idiosyncratic volatility multiplier.
    pub idiosyncratic_vol: f64,
    pub seed: u64,
}

impl FactorModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::config("factor model needs at least one block".to_string()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.size == 0 {
                return Err(Error::config(format!("block {i} has size 0")));
            }
            if !(0.0..=1.0).contains(&b.loading) {
                return Err(Error::config(format!(
                    "block {i} loading {} outside [0, 1]",
                    b.loading
                )));
            }
        }
        if self.days < 30 {
            return Err(Error::config(format!(
                "need at least 30 days, got {}",
                self.days
            )));
        }
        Ok(())
    }

    /// Ground-truth community labels, block by block.
    pub fn true_labels(&self) -> Vec<usize> {
        let mut labels = Vec::new();
        for (b, block) in self.blocks.iter().enumerate() {
            labels.extend(std::iter::repeat_n(b, block.size));
        }
        labels
    }
}

/// Weekday dates starting 2019-01-01.
fn trading_dates(days: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(days);
    let mut d = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    while out.len() < days {
        if d.weekday().num_days_from_monday() < 5 {
            out.push(d);
        }
        d = d + chrono::Days::new(1);
    }
    out
}

/// Generate a price panel from the factor model. Prices start at 100 and
/// compound; factor and idiosyncratic streams get independent seeded RNGs so
/// the panel is bit-identical for a given spec regardless of scheduling.
pub fn generate_block_panel(spec: &FactorModelSpec) -> Result<PricePanel> {
    spec.validate()?;
    let n: usize = spec.blocks.iter().map(|b| b.size).sum();
    let t_prices = spec.days;
    let t_returns = t_prices - 1;

    // per-block factor streams
    let factors: Vec<Vec<f64>> = (0..spec.blocks.len())
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[1, b as u64]));
            (0..t_returns).map(|_| rng.sample(StandardNormal)).collect()
        })
        .collect();

    let mut prices = Array2::<f64>::zeros((t_prices, n));
    let mut assets = Vec::with_capacity(n);
    let mut col = 0usize;
    for (b, block) in spec.blocks.iter().enumerate() {
        for a in 0..block.size {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[2, b as u64, a as u64]));
            assets.push(format!("B{}A{:02}", b, a));
            prices[[0, col]] = 100.0;
            for t in 0..t_returns {
                let eps: f64 = rng.sample(StandardNormal);
                let r = block.drift + block.loading * factors[b][t]
                    + spec.idiosyncratic_vol * eps;
                prices[[t + 1, col]] = prices[[t, col]] * r.exp();
            }
            col += 1;
        }
    }

    Ok(PricePanel {
        dates: trading_dates(t_prices),
        assets,
        prices,
        caps: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::compute_returns;

    fn sample_corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut da = 0.0;
        let mut db = 0.0;
        for (x, y) in a.iter().zip(b.iter()) {
            num += (x - ma) * (y - mb);
            da += (x - ma) * (x - ma);
            db += (y - mb) * (y - mb);
        }
        num / (da.sqrt() * db.sqrt())
    }

    #[test]
    fn pure_factor_block_is_perfectly_correlated() {
        let spec = FactorModelSpec {
            blocks: vec![BlockSpec {
                size: 3,
                loading: 1.0,
                drift: 0.0,
            }],
            days: 60,
            idiosyncratic_vol: 0.0,
            seed: 5,
        };
        let panel = generate_block_panel(&spec).unwrap();
        let ret = compute_returns(&panel).unwrap();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let a: Vec<f64> = ret.raw_returns.column(i).to_vec();
                let b: Vec<f64> = ret.raw_returns.column(j).to_vec();
                assert!((sample_corr(&a, &b) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_loading_gives_near_zero_correlation() {
        let t = 2000;
        let spec = FactorModelSpec {
            blocks: vec![BlockSpec {
                size: 4,
                loading: 0.0,
                drift: 0.0,
            }],
            days: t,
            idiosyncratic_vol: 0.02,
            seed: 9,
        };
        let panel = generate_block_panel(&spec).unwrap();
        let ret = compute_returns(&panel).unwrap();
        let bound = 4.0 / ((t - 1) as f64).sqrt();
        for i in 0..4 {
            for j in (i + 1)..4 {
                let a: Vec<f64> = ret.raw_returns.column(i).to_vec();
                let b: Vec<f64> = ret.raw_returns.column(j).to_vec();
                assert!(sample_corr(&a, &b).abs() < bound);
            }
        }
    }

    #[test]
    fn intra_block_correlation_converges_to_theory() {
        let beta: f64 = 0.8;
        let idio: f64 = 0.4;
        let spec = FactorModelSpec {
            blocks: vec![BlockSpec {
                size: 2,
                loading: beta,
                drift: 0.0,
            }],
            days: 5000,
            idiosyncratic_vol: idio,
            seed: 31,
        };
        let panel = generate_block_panel(&spec).unwrap();
        let ret = compute_returns(&panel).unwrap();
        let a: Vec<f64> = ret.raw_returns.column(0).to_vec();
        let b: Vec<f64> = ret.raw_returns.column(1).to_vec();
        let expect = beta * beta / (beta * beta + idio * idio);
        assert!((sample_corr(&a, &b) - expect).abs() < 0.05);
    }

    #[test]
    fn same_spec_and_seed_is_bit_identical() {
        let spec = FactorModelSpec {
            blocks: vec![
                BlockSpec {
                    size: 3,
                    loading: 0.7,
                    drift: 0.001,
                },
                BlockSpec {
                    size: 2,
                    loading: 0.5,
                    drift: -0.001,
                },
            ],
            days: 50,
            idiosyncratic_vol: 0.3,
            seed: 77,
        };
        let a = generate_block_panel(&spec).unwrap();
        let b = generate_block_panel(&spec).unwrap();
        assert_eq!(a.prices, b.prices);
        assert_eq!(a.dates, b.dates);
        assert_eq!(a.assets, b.assets);
    }

    #[test]
    fn two_block_panel_recovers_partition_via_lv_pipeline() {
        // block size 4: small enough that the 2-block split is the modularity
        // optimum on the MST (large blocks get refined into sub-communities)
        let spec = FactorModelSpec {
            blocks: vec![
                BlockSpec {
                    size: 4,
                    loading: 0.9,
                    drift: 0.0,
                },
                BlockSpec {
                    size: 4,
                    loading: 0.9,
                    drift: 0.0,
                },
            ],
            days: 500,
            idiosyncratic_vol: 0.3,
            seed: 13,
        };
        let panel = generate_block_panel(&spec).unwrap();
        let ret = compute_returns(&panel).unwrap();
        let rel = crate::relational::correlation_matrix(&ret).unwrap();
        let p =
            crate::community::detect_communities(&rel, crate::community::ClustererKind::Lv, 1)
                .unwrap();
        assert_eq!(p.labels, spec.true_labels());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = FactorModelSpec {
            blocks: vec![BlockSpec {
                size: 2,
                loading: 0.5,
                drift: 0.0,
            }],
            days: 10,
            idiosyncratic_vol: 0.1,
            seed: 0,
        };
        assert!(generate_block_panel(&spec).is_err()); // too few days
        spec.days = 60;
        spec.blocks[0].loading = 1.5;
        assert!(generate_block_panel(&spec).is_err()); // loading out of range
    }
}
