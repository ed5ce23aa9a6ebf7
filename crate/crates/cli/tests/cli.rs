//! End-to-end tests of the `netfolio` binary: file formats, exit codes, and
//! byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn netfolio() -> Command {
    Command::new(env!("CARGO_BIN_EXE_netfolio"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    netfolio()
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Generate a synthetic block panel and return its path.
fn synth_blocks(dir: &Path, blocks: &str, days: usize, seed: &str) -> PathBuf {
    let out = run(
        &[
            "--out-dir",
            "synthout",
            "--seed",
            seed,
            "synth",
            "--blocks",
            blocks,
            "--days",
            &days.to_string(),
            "--idio",
            "0.006",
            "--out",
            "prices.csv",
        ],
        dir,
    );
    assert_ok(&out);
    dir.join("prices.csv")
}

/// The default two-block, 12-asset panel used by most tests.
fn synth_panel(dir: &Path, days: usize, seed: &str) -> PathBuf {
    synth_blocks(dir, "6x0.012@0.0004,6x0.012@-0.0002", days, seed)
}

#[test]
fn matrix_emits_symmetric_csv_with_unit_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    synth_panel(dir.path(), 120, "5");
    let out = run(
        &[
            "--prices",
            "prices.csv",
            "--out-dir",
            "out",
            "--universe",
            "custom",
            "--portfolio-size",
            "4",
            "--in-months",
            "3",
            "matrix",
            "--relations",
            "Cor",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let text = std::fs::read_to_string(dir.path().join("out/matrix_Cor_2019-01.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 13); // blank corner + 12 symbols
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 12);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], header[i + 1]); // symbol column mirrors header
        let diag: f64 = row[i + 1].parse().unwrap();
        assert_eq!(diag, 1.0);
        for (j, other) in rows.iter().enumerate() {
            let a: f64 = row[j + 1].parse().unwrap();
            let b: f64 = other[i + 1].parse().unwrap();
            assert_eq!(a, b);
        }
    }
    // sidecar manifest carries kind and window
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/matrix_Cor_2019-01.manifest.json"))
            .unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["kind"], "Cor");
}

#[test]
fn cooccurrence_without_full_year_names_the_shortfall() {
    let dir = tempfile::tempdir().unwrap();
    synth_panel(dir.path(), 120, "6"); // ~6 months, far short of 12
    let out = run(
        &[
            "--prices",
            "prices.csv",
            "--out-dir",
            "out",
            "--universe",
            "custom",
            "--portfolio-size",
            "4",
            "matrix",
            "--relations",
            "cCor",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("months"), "stderr: {stderr}");
}

#[test]
fn communities_exports_partition_and_annotated_mst() {
    let dir = tempfile::tempdir().unwrap();
    // 4-node blocks: small enough for Louvain on the MST to keep them whole
    synth_blocks(dir.path(), "4x0.012,4x0.012", 300, "7");
    let out = run(
        &[
            "--prices",
            "prices.csv",
            "--out-dir",
            "out",
            "--universe",
            "custom",
            "--portfolio-size",
            "4",
            "communities",
            "--clusterer",
            "LV",
            "--relation",
            "Cor",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let partition =
        std::fs::read_to_string(dir.path().join("out/partition_LV_Cor_2019-01.csv")).unwrap();
    assert!(partition.starts_with("symbol,community_id\n"));
    assert_eq!(partition.lines().count(), 9); // header + 8 assets
    // two planted blocks must come out as two communities
    let mut communities = std::collections::BTreeMap::new();
    for line in partition.lines().skip(1) {
        let (sym, comm) = line.split_once(',').unwrap();
        communities
            .entry(comm.to_string())
            .or_insert_with(Vec::new)
            .push(sym.to_string());
    }
    assert_eq!(communities.len(), 2);
    let dot = std::fs::read_to_string(dir.path().join("out/mst_LV_Cor_2019-01.dot")).unwrap();
    assert_eq!(dot.matches(" -- ").count(), 7); // N-1 MST edges
    assert_eq!(dot.matches("community=").count(), 8); // every node annotated
}

#[test]
fn backtest_row_counts_and_strategy_filter() {
    let dir = tempfile::tempdir().unwrap();
    synth_panel(dir.path(), 560, "8"); // ~26 months -> 3 windows at 12/12/1
    let base = [
        "--prices",
        "prices.csv",
        "--universe",
        "custom",
        "--portfolio-size",
        "4",
        "--seed",
        "9",
    ];

    // single strategy: 1 row per window plus 2 baseline rows per window
    let mut args = base.to_vec();
    args.extend(["--out-dir", "one", "--strategies", "LV-Cor-PCA-max", "backtest"]);
    assert_ok(&run(&args, dir.path()));
    let text = std::fs::read_to_string(dir.path().join("one/results.csv")).unwrap();
    let windows = 3;
    assert_eq!(text.lines().count(), 1 + windows + 2 * windows);

    // full grid: 120 rows per window plus baselines
    let mut args = base.to_vec();
    args.extend(["--out-dir", "full", "backtest"]);
    assert_ok(&run(&args, dir.path()));
    let text = std::fs::read_to_string(dir.path().join("full/results.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 120 * windows + 2 * windows);
    // every grid id appears
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("full/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["strategies"].as_array().unwrap().len(), 120);
    assert_eq!(summary["baselines"].as_array().unwrap().len(), 2);
    assert_eq!(summary["top_by_ratio"].as_array().unwrap().len(), 10);

    // value-in-time and selections exist per window with the right schemas
    let vit = std::fs::read_to_string(
        dir.path().join("full/value_in_time_2019-01-02.csv"),
    )
    .unwrap();
    assert!(vit.starts_with("date,strategy_id,portfolio_value\n"));
    assert!(vit.contains("RANDOM"));
    assert!(vit.contains("INDEX"));
    let selections =
        std::fs::read_to_string(dir.path().join("full/selections_2019-01-02.csv")).unwrap();
    assert!(selections.starts_with("strategy_id,symbol,community_id,score\n"));
    assert_eq!(selections.lines().count(), 1 + 120 * 4); // P=4 rows per strategy

    // summary tables: 15 rows x (2 + 8) columns, every cell filled
    let table =
        std::fs::read_to_string(dir.path().join("full/summary_table_return.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 16);
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 10);
        assert!(line.contains('±'));
    }
}

#[test]
fn backtest_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    synth_panel(dir.path(), 560, "11");
    let args = |out: &str| {
        vec![
            "--prices".to_string(),
            "prices.csv".to_string(),
            "--universe".to_string(),
            "custom".to_string(),
            "--portfolio-size".to_string(),
            "4".to_string(),
            "--seed".to_string(),
            "21".to_string(),
            "--strategies".to_string(),
            "*-Cor-CloMST-*".to_string(),
            "--out-dir".to_string(),
            out.to_string(),
            "backtest".to_string(),
        ]
    };
    let a1 = args("run");
    let out = netfolio()
        .args(&a1)
        .current_dir(dir.path())
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert_ok(&out);
    let mut snapshots = std::collections::BTreeMap::new();
    for entry in std::fs::read_dir(dir.path().join("run")).unwrap() {
        let path = entry.unwrap().path();
        snapshots.insert(
            path.file_name().unwrap().to_string_lossy().to_string(),
            std::fs::read(&path).unwrap(),
        );
    }
    // second run into the same directory name (config identical)
    std::fs::remove_dir_all(dir.path().join("run")).unwrap();
    let out = netfolio()
        .args(&a1)
        .current_dir(dir.path())
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert_ok(&out);
    for entry in std::fs::read_dir(dir.path().join("run")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(
            Some(&bytes),
            snapshots.get(&name),
            "file {name} differs between identical runs"
        );
    }
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    synth_panel(dir.path(), 560, "13");
    std::fs::write(
        dir.path().join("run.toml"),
        "prices = \"prices.csv\"\nuniverse = \"custom\"\nportfolio_size = 4\n\
         seed = 33\nstrategies = [\"LV-Cor-PCA-max\"]\nout_dir = \"cfgout\"\n",
    )
    .unwrap();
    let out = run(
        &["--config", "run.toml", "--seed", "44", "backtest"],
        dir.path(),
    );
    assert_ok(&out);
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("cfgout/run_manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 44); // flag beat the file
    assert_eq!(manifest["config"]["portfolio_size"], 4);
}

#[test]
fn invalid_config_exits_2_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    synth_panel(dir.path(), 120, "15");
    let out = run(
        &[
            "--prices",
            "prices.csv",
            "--out-dir",
            "never",
            "--universe",
            "custom",
            "--portfolio-size",
            "4",
            "--damping",
            "1.5",
            "backtest",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("never").exists());

    // missing price file is also a config error caught before any writes
    let out = run(
        &[
            "--prices",
            "missing.csv",
            "--out-dir",
            "never2",
            "--universe",
            "custom",
            "--portfolio-size",
            "4",
            "backtest",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("never2").exists());
}

#[test]
fn data_too_short_for_windows_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    synth_panel(dir.path(), 200, "17"); // ~9 months < 24
    let out = run(
        &[
            "--prices",
            "prices.csv",
            "--out-dir",
            "short",
            "--universe",
            "custom",
            "--portfolio-size",
            "4",
            "backtest",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn emitted_matrix_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    synth_panel(dir.path(), 300, "19");
    let out = run(
        &[
            "--prices",
            "prices.csv",
            "--out-dir",
            "out",
            "--universe",
            "custom",
            "--portfolio-size",
            "4",
            "--in-months",
            "6",
            "matrix",
            "--relations",
            "Cor,MI",
        ],
        dir.path(),
    );
    assert_ok(&out);
    for kind in ["Cor", "MI"] {
        let path = dir.path().join(format!("out/matrix_{kind}_2019-01.csv"));
        let matrix = netfolio::relational::read_matrix_csv(&path).unwrap();
        // write it again elsewhere: bytes must agree (round-trip fidelity)
        let copy = dir.path().join(format!("copy_{kind}.csv"));
        netfolio::relational::write_matrix_csv(&matrix, &copy).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&copy).unwrap()
        );
    }
}
