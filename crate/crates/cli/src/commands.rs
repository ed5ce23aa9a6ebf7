//! Subcommand implementations. Each command validates configuration before
//! touching the output directory, then writes a run manifest, the cleaned
//! panel, and its own artifacts under `--out-dir`.

use std::path::{Path, PathBuf};

use log::info;
use netfolio::backtest::{
    aggregate_and_rank, write_results_csv, write_summary_json, write_summary_table_csv,
    write_value_in_time_csv, EngineParams, PortfolioResult, Report, StrategyEngine,
    INDEX_BASELINE_ID, RANDOM_BASELINE_ID,
};
use netfolio::community::{write_partition_csv, ClustererKind};
use netfolio::graphrep::{build_mst, distance_matrix, write_dot, write_edge_list};
use netfolio::market_data::{
    compute_returns, load_caps, load_price_panel, make_windows, PricePanel, ReturnPanel,
};
use netfolio::relational::{
    cooccurrence_matrix, correlation_matrix, mutual_information_matrix, write_matrix_csv,
    RelationKind, RelationalMatrix,
};
use netfolio::selection::write_selection_csv;
use netfolio::synthetic::{generate_block_panel, BlockSpec, FactorModelSpec};
use netfolio::{derive_seed, Error, Result};
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a RunConfig,
}

fn write_manifest(config: &RunConfig, command: &str) -> Result<()> {
    let manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        config,
    };
    std::fs::write(
        config.out_dir.join("run_manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::data(e.to_string()))?,
    )?;
    Ok(())
}

/// Load prices (and caps when given), emit the cleaned audit panel, and
/// compute returns.
fn prepare(config: &RunConfig, command: &str) -> Result<(PricePanel, ReturnPanel)> {
    let mut panel = load_price_panel(&config.prices, config.coverage)?;
    if let Some(caps_path) = &config.caps {
        load_caps(caps_path, &mut panel)?;
    }
    std::fs::create_dir_all(&config.out_dir)?;
    write_manifest(config, command)?;
    panel.write_csv(&config.out_dir.join("cleaned_panel.csv"))?;
    let returns = compute_returns(&panel)?;
    info!(
        "loaded {} assets x {} dates ({} return days)",
        panel.n_assets(),
        panel.n_dates(),
        returns.n_days()
    );
    Ok((panel, returns))
}

/// Parse `YYYY-MM` into the internal month key.
fn parse_month(s: &str) -> Result<i32> {
    let (y, m) = s
        .split_once('-')
        .ok_or_else(|| Error::config(format!("bad window {s:?}: want YYYY-MM")))?;
    let year: i32 = y
        .parse()
        .map_err(|_| Error::config(format!("bad window year in {s:?}")))?;
    let month: u32 = m
        .parse()
        .map_err(|_| Error::config(format!("bad window month in {s:?}")))?;
    if !(1..=12).contains(&month) {
        return Err(Error::config(format!("month out of range in {s:?}")));
    }
    Ok(year * 12 + month as i32 - 1)
}

fn month_label(key: i32) -> String {
    format!("{:04}-{:02}", key.div_euclid(12), key.rem_euclid(12) + 1)
}

/// Slice the in-sample span starting at `window` (default: first month).
fn window_slice(
    config: &RunConfig,
    returns: &ReturnPanel,
    window: Option<&str>,
) -> Result<(ReturnPanel, String)> {
    let months = returns.months();
    let start = match window {
        Some(w) => parse_month(w)?,
        None => *months
            .first()
            .ok_or_else(|| Error::data("panel has no months".to_string()))?,
    };
    let slice = returns.slice_months(start, config.in_months)?;
    Ok((slice, month_label(start)))
}

fn build_relation(
    config: &RunConfig,
    slice: &ReturnPanel,
    kind: RelationKind,
    clusterer: ClustererKind,
) -> Result<RelationalMatrix> {
    match kind {
        RelationKind::Cor => correlation_matrix(slice),
        RelationKind::Mi => mutual_information_matrix(slice, config.bins),
        RelationKind::CCor | RelationKind::CMi => {
            let registry =
                netfolio::community::ClustererRegistry::standard(config.ap_params());
            let implementation = registry
                .get(clusterer.name())
                .ok_or_else(|| Error::config(format!("no clusterer {clusterer}")))?;
            let seed = derive_seed(config.seed, &[0x6d61_7472, kind as u64]);
            Ok(cooccurrence_matrix(
                slice,
                implementation.as_ref(),
                kind.base(),
                config.in_months,
                config.bins,
                seed,
            )?
            .matrix)
        }
    }
}

/// `matrix`: emit the requested relational matrices for one window.
pub fn cmd_matrix(
    config: &RunConfig,
    window: Option<&str>,
    relations: &[String],
    clusterer: &str,
) -> Result<()> {
    let kinds: Vec<RelationKind> = relations
        .iter()
        .map(|r| {
            RelationKind::parse(r)
                .ok_or_else(|| Error::config(format!("unknown relation {r:?}")))
        })
        .collect::<Result<_>>()?;
    let clusterer = ClustererKind::parse(clusterer)
        .ok_or_else(|| Error::config(format!("unknown clusterer {clusterer:?}")))?;
    let (_panel, returns) = prepare(config, "matrix")?;
    let (slice, label) = window_slice(config, &returns, window)?;
    for kind in kinds {
        let matrix = build_relation(config, &slice, kind, clusterer)?;
        let path = config.out_dir.join(format!("matrix_{kind}_{label}.csv"));
        write_matrix_csv(&matrix, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// `communities`: partition CSV plus a DOT export of the MST annotated with
/// community ids.
pub fn cmd_communities(
    config: &RunConfig,
    window: Option<&str>,
    clusterer: &str,
    relation: &str,
) -> Result<()> {
    let clusterer = ClustererKind::parse(clusterer)
        .ok_or_else(|| Error::config(format!("unknown clusterer {clusterer:?}")))?;
    let relation = RelationKind::parse(relation)
        .ok_or_else(|| Error::config(format!("unknown relation {relation:?}")))?;
    let (_panel, returns) = prepare(config, "communities")?;
    let (slice, label) = window_slice(config, &returns, window)?;
    let rel = build_relation(config, &slice, relation, clusterer)?;
    let registry = netfolio::community::ClustererRegistry::standard(config.ap_params());
    let implementation = registry
        .get(clusterer.name())
        .ok_or_else(|| Error::config(format!("no clusterer {clusterer}")))?;
    let seed = derive_seed(config.seed, &[0x636f_6d6d, relation as u64]);
    let partition = implementation.detect(&rel, seed)?;
    info!(
        "{clusterer} on {relation}: {} communities, quality {:.6}",
        partition.n_communities(),
        partition.quality
    );

    let stem = format!("{clusterer}_{relation}_{label}");
    let partition_path = config.out_dir.join(format!("partition_{stem}.csv"));
    write_partition_csv(&partition, seed, &partition_path)?;
    let distance = distance_matrix(&rel)?;
    let mst = build_mst(&distance);
    let dot_path = config.out_dir.join(format!("mst_{stem}.dot"));
    write_dot(&mst, &dot_path, Some(&partition.labels))?;
    let edges_path = config.out_dir.join(format!("mst_edges_{stem}.csv"));
    write_edge_list(&mst, &edges_path)?;
    println!(
        "wrote {}, {}, {}",
        partition_path.display(),
        dot_path.display(),
        edges_path.display()
    );
    Ok(())
}

fn print_ranking(title: &str, ids: &[String], report: &Report) {
    println!("{title}");
    for (rank, id) in ids.iter().enumerate() {
        let s = report
            .strategies
            .iter()
            .find(|s| &s.id == id)
            .expect("ranked id is summarized");
        println!(
            "  {:>2}. {:<22} return {:>9.4}% ± {:<9.4} volatility {:.6} ± {:.6}  ratio {:.2}",
            rank + 1,
            s.id,
            s.mean_return,
            s.se_return,
            s.mean_volatility,
            s.se_volatility,
            s.ratio
        );
    }
}

/// `backtest`: the (possibly filtered) strategy grid plus both baselines over
/// every sliding window; writes the report files and prints the top-k tables.
pub fn cmd_backtest(config: &RunConfig) -> Result<()> {
    let specs = config.strategy_specs()?;
    let (panel, returns) = prepare(config, "backtest")?;
    let windows = make_windows(
        &returns,
        config.in_months,
        config.out_months,
        config.step_months,
    )?;
    if windows.is_empty() {
        return Err(Error::data(format!(
            "panel spans {} months, need {} for one window",
            returns.months().len(),
            config.in_months + config.out_months
        )));
    }
    info!(
        "running {} strategies over {} windows",
        specs.len(),
        windows.len()
    );

    let engine = StrategyEngine::new(EngineParams {
        portfolio_size: config.portfolio_size,
        mi_bins: config.bins,
        ap: config.ap_params(),
        seed: config.seed,
        rebalance: config.rebalance.into(),
        random_repetitions: 100,
        in_months: config.in_months,
    });
    let outcomes = engine.run_grid(&specs, &windows)?;

    let mut results: Vec<PortfolioResult> =
        outcomes.iter().map(|o| o.result.clone()).collect();
    for window in &windows {
        results.push(engine.run_random_baseline(window)?);
        results.push(engine.run_index_baseline(window, panel.caps.as_deref())?);
    }

    write_results_csv(&results, &config.out_dir.join("results.csv"))?;
    let report = aggregate_and_rank(&results, config.top_k)?;
    write_summary_json(&report, &config.out_dir.join("summary.json"))?;
    write_summary_table_csv(
        &report,
        |s| (s.mean_return, s.se_return),
        &config.out_dir.join("summary_table_return.csv"),
    )?;
    write_summary_table_csv(
        &report,
        |s| (s.mean_volatility, s.se_volatility),
        &config.out_dir.join("summary_table_volatility.csv"),
    )?;

    // per-window exports: selection detail and value-in-time for the top
    // ratio strategies plus both baselines
    let mut vit_ids = report.top_by_ratio.clone();
    vit_ids.push(RANDOM_BASELINE_ID.to_string());
    vit_ids.push(INDEX_BASELINE_ID.to_string());
    for window in &windows {
        let rows: Vec<(String, String, usize, f64)> = outcomes
            .iter()
            .filter(|o| o.result.window == window.label)
            .flat_map(|o| {
                o.selection.iter().map(|(sym, community, score)| {
                    (o.result.strategy.clone(), sym.clone(), *community, *score)
                })
            })
            .collect();
        write_selection_csv(
            &rows,
            &config.out_dir.join(format!("selections_{}.csv", window.label)),
        )?;
        write_value_in_time_csv(
            &results,
            &vit_ids,
            &window.label,
            &config
                .out_dir
                .join(format!("value_in_time_{}.csv", window.label)),
        )?;
    }

    println!(
        "{} strategies x {} windows -> {}",
        specs.len(),
        windows.len(),
        config.out_dir.display()
    );
    print_ranking(
        &format!("Top {} by return:", report.top_by_return.len()),
        &report.top_by_return,
        &report,
    );
    print_ranking(
        &format!("Top {} by volatility (lowest):", report.top_by_volatility.len()),
        &report.top_by_volatility,
        &report,
    );
    print_ranking(
        &format!("Top {} by return/volatility:", report.top_by_ratio.len()),
        &report.top_by_ratio,
        &report,
    );
    for b in &report.baselines {
        println!(
            "baseline {:<8} return {:>9.4}% ± {:<9.4} volatility {:.6}",
            b.id, b.mean_return, b.se_return, b.mean_volatility
        );
    }
    Ok(())
}

/// Parse a block list like `20x0.9@0.001,20x0.85`.
fn parse_blocks(s: &str) -> Result<Vec<BlockSpec>> {
    s.split(',')
        .map(|part| {
            let (size_str, rest) = part
                .split_once('x')
                .ok_or_else(|| Error::config(format!("bad block {part:?}: want SIZExLOADING[@DRIFT]")))?;
            let (loading_str, drift_str) = match rest.split_once('@') {
                Some((l, d)) => (l, Some(d)),
                None => (rest, None),
            };
            Ok(BlockSpec {
                size: size_str
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad block size in {part:?}")))?,
                loading: loading_str
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad loading in {part:?}")))?,
                drift: match drift_str {
                    Some(d) => d
                        .trim()
                        .parse()
                        .map_err(|_| Error::config(format!("bad drift in {part:?}")))?,
                    None => 0.0,
                },
            })
        })
        .collect()
}

/// `synth`: write a synthetic price panel in the standard CSV format.
pub fn cmd_synth(
    config: &RunConfig,
    blocks: &str,
    days: usize,
    idio: f64,
    out: Option<&Path>,
) -> Result<()> {
    let spec = FactorModelSpec {
        blocks: parse_blocks(blocks)?,
        days,
        idiosyncratic_vol: idio,
        seed: config.seed,
    };
    let panel = generate_block_panel(&spec)?;
    std::fs::create_dir_all(&config.out_dir)?;
    write_manifest(config, "synth")?;
    let path: PathBuf = match out {
        Some(p) => p.to_path_buf(),
        None => config.out_dir.join("synthetic_prices.csv"),
    };
    panel.write_csv(&path)?;
    println!(
        "wrote {} ({} assets x {} days)",
        path.display(),
        panel.n_assets(),
        panel.n_dates()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn month_parsing_round_trips() {
        let key = parse_month("2019-01").unwrap();
        assert_eq!(month_label(key), "2019-01");
        let key = parse_month("2020-12").unwrap();
        assert_eq!(month_label(key), "2020-12");
        assert!(parse_month("2020-13").is_err());
        assert!(parse_month("2020").is_err());
    }

    #[test]
    fn block_list_parsing() {
        let blocks = parse_blocks("20x0.9@0.001,5x0.5").unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].size, 20);
        assert_eq!(blocks[0].loading, 0.9);
        assert_eq!(blocks[0].drift, 0.001);
        assert_eq!(blocks[1].drift, 0.0);
        assert!(parse_blocks("20").is_err());
        assert!(parse_blocks("ax0.9").is_err());
    }
}
