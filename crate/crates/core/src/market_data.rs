//! Price-panel ingestion, return computation, and sliding-window slicing.
//!
//! The input format is a wide CSV with a `date` column (ISO-8601) followed
//! by one column per asset symbol. Blank cells are treated as missing and
//! forward-filled from the previous price when possible.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use log::warn;
use ndarray::Array2;

use crate::error::{Error, Result};

/// Aligned date-by-asset matrix of raw prices.
#[derive(Debug, Clone)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    /// T x N, strictly positive.
    pub prices: Array2<f64>,
    /// Optional market capitalizations, aligned with `assets`.
    pub caps: Option<Vec<f64>>,
}

/// Per-asset normalized log-returns plus the raw log-returns they came from.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    /// Return dates: each return is dated by the later of its two price dates.
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    /// (T-1) x N z-scored log-returns (population-std convention).
    pub returns: Array2<f64>,
    /// (T-1) x N log-returns ln(p_t / p_{t-1}).
    pub raw_returns: Array2<f64>,
    /// Columns whose raw returns had zero variance; their z-scores are all zero.
    pub zero_variance: Vec<bool>,
}

/// One in-sample / out-of-sample split. The out-of-sample panel starts on the
/// trading day after the in-sample panel ends.
#[derive(Debug, Clone)]
pub struct WindowPair {
    pub in_sample: ReturnPanel,
    pub out_of_sample: ReturnPanel,
    /// First in-sample return date, ISO formatted.
    pub label: String,
}

/// Load a price CSV, dropping assets below the coverage threshold and
/// forward-filling isolated gaps.
pub fn load_price_panel(path: &Path, coverage_threshold: f64) -> Result<PricePanel> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers[0].trim() != "date" {
        return Err(Error::data(format!(
            "{}: first header column must be 'date', got {:?}",
            path.display(),
            headers.get(0).unwrap_or("")
        )));
    }
    let symbols: Vec<String> = headers.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if symbols.is_empty() {
        return Err(Error::data(format!("{}: no asset columns", path.display())));
    }

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let date = NaiveDate::parse_from_str(record[0].trim(), "%Y-%m-%d").map_err(|e| {
            Error::data(format!("{}: bad date {:?}: {e}", path.display(), &record[0]))
        })?;
        if let Some(last) = dates.last() {
            if date <= *last {
                return Err(Error::data(format!(
                    "{}: dates must be strictly increasing ({last} then {date})",
                    path.display()
                )));
            }
        }
        let mut row = Vec::with_capacity(symbols.len());
        for (i, field) in record.iter().skip(1).enumerate() {
            let field = field.trim();
            if field.is_empty() {
                row.push(None);
            } else {
                let v: f64 = field.parse().map_err(|e| {
                    Error::data(format!(
                        "{}: bad price for {} on {date}: {e}",
                        path.display(),
                        symbols[i]
                    ))
                })?;
                row.push(Some(v));
            }
        }
        dates.push(date);
        cells.push(row);
    }
    if dates.is_empty() {
        return Err(Error::data(format!("{}: no data rows", path.display())));
    }

    let n_dates = dates.len();
    // Coverage filter, then forward-fill. Assets whose first cell is missing
    // cannot be filled and are dropped with a warning.
    let mut kept: Vec<usize> = Vec::new();
    for (j, sym) in symbols.iter().enumerate() {
        let present = cells.iter().filter(|row| row[j].is_some()).count();
        let coverage = present as f64 / n_dates as f64;
        if coverage < coverage_threshold {
            warn!(
                "dropping {sym}: coverage {coverage:.4} below threshold {coverage_threshold}"
            );
            continue;
        }
        if cells[0][j].is_none() {
            warn!("dropping {sym}: first price missing, cannot forward-fill");
            continue;
        }
        kept.push(j);
    }
    if kept.is_empty() {
        return Err(Error::data(format!(
            "{}: no asset survives the coverage filter",
            path.display()
        )));
    }

    let assets: Vec<String> = kept.iter().map(|&j| symbols[j].clone()).collect();
    let mut prices = Array2::<f64>::zeros((n_dates, kept.len()));
    for (col, &j) in kept.iter().enumerate() {
        let mut prev = f64::NAN;
        for t in 0..n_dates {
            let v = match cells[t][j] {
                Some(v) => v,
                None => prev,
            };
            if v.is_nan() || v <= 0.0 {
                return Err(Error::data(format!(
                    "{}: non-positive price {v} for {} on {}",
                    path.display(),
                    assets[col],
                    dates[t]
                )));
            }
            prices[[t, col]] = v;
            prev = v;
        }
    }

    Ok(PricePanel {
        dates,
        assets,
        prices,
        caps: None,
    })
}

/// Load a `symbol,cap` CSV and attach caps to the panel, matched by symbol.
pub fn load_caps(path: &Path, panel: &mut PricePanel) -> Result<()> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut caps: BTreeMap<String, f64> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let sym = record[0].trim().to_string();
        let cap: f64 = record[1].trim().parse().map_err(|e| {
            Error::data(format!("{}: bad cap for {sym}: {e}", path.display()))
        })?;
        if cap < 0.0 {
            return Err(Error::data(format!(
                "{}: negative market cap for {sym}",
                path.display()
            )));
        }
        caps.insert(sym, cap);
    }
    let mut vals = Vec::with_capacity(panel.assets.len());
    for sym in &panel.assets {
        match caps.get(sym) {
            Some(&c) => vals.push(c),
            None => {
                return Err(Error::data(format!(
                    "{}: no market cap for {sym}",
                    path.display()
                )))
            }
        }
    }
    panel.caps = Some(vals);
    Ok(())
}

impl PricePanel {
    /// Emit the panel in the input CSV format (audit copy). Prices are written
    /// with round-trip precision so re-loading reproduces the panel exactly.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["date".to_string()];
        header.extend(self.assets.iter().cloned());
        w.write_record(&header)?;
        for (t, date) in self.dates.iter().enumerate() {
            let mut row = vec![date.format("%Y-%m-%d").to_string()];
            for j in 0..self.assets.len() {
                row.push(format!("{}", self.prices[[t, j]]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }
}

/// z-score columns in place using the population-std convention (divide by n).
/// Zero-variance columns become all-zero and are reported in the returned mask.
fn zscore_columns(m: &mut Array2<f64>) -> Vec<bool> {
    let (t, n) = m.dim();
    let mut degenerate = vec![false; n];
    for j in 0..n {
        let mean = (0..t).map(|i| m[[i, j]]).sum::<f64>() / t as f64;
        let var = (0..t).map(|i| (m[[i, j]] - mean).powi(2)).sum::<f64>() / t as f64;
        let std = var.sqrt();
        if std > 0.0 {
            for i in 0..t {
                m[[i, j]] = (m[[i, j]] - mean) / std;
            }
        } else {
            degenerate[j] = true;
            for i in 0..t {
                m[[i, j]] = 0.0;
            }
        }
    }
    degenerate
}

/// Log-returns plus per-column z-scores.
pub fn compute_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    if panel.n_dates() < 3 {
        return Err(Error::data(format!(
            "need at least 3 dates to compute returns, got {}",
            panel.n_dates()
        )));
    }
    let t = panel.n_dates() - 1;
    let n = panel.n_assets();
    let mut raw = Array2::<f64>::zeros((t, n));
    for i in 0..t {
        for j in 0..n {
            raw[[i, j]] = (panel.prices[[i + 1, j]] / panel.prices[[i, j]]).ln();
        }
    }
    let mut normalized = raw.clone();
    let zero_variance = zscore_columns(&mut normalized);
    for (j, flag) in zero_variance.iter().enumerate() {
        if *flag {
            warn!("constant price series for {}: z-scores set to zero", panel.assets[j]);
        }
    }
    Ok(ReturnPanel {
        dates: panel.dates[1..].to_vec(),
        assets: panel.assets.clone(),
        returns: normalized,
        raw_returns: raw,
        zero_variance,
    })
}

/// Month key used for calendar slicing.
fn month_index(d: &NaiveDate) -> i32 {
    d.year() * 12 + d.month0() as i32
}

impl ReturnPanel {
    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    /// Distinct calendar months covered, in order.
    pub fn months(&self) -> Vec<i32> {
        let mut out = Vec::new();
        for d in &self.dates {
            let m = month_index(d);
            if out.last() != Some(&m) {
                out.push(m);
            }
        }
        out
    }

    /// Slice a contiguous range of return rows and re-normalize within the slice.
    pub fn slice_rows(&self, start: usize, end: usize) -> ReturnPanel {
        let raw = self.raw_returns.slice(ndarray::s![start..end, ..]).to_owned();
        let mut normalized = raw.clone();
        let zero_variance = zscore_columns(&mut normalized);
        ReturnPanel {
            dates: self.dates[start..end].to_vec(),
            assets: self.assets.clone(),
            returns: normalized,
            raw_returns: raw,
            zero_variance,
        }
    }

    /// Slice `n_months` calendar months starting at the month containing no
    /// earlier month than `start_month` (a value from [`ReturnPanel::months`]).
    pub fn slice_months(&self, start_month: i32, n_months: usize) -> Result<ReturnPanel> {
        let months = self.months();
        let pos = months
            .iter()
            .position(|&m| m == start_month)
            .ok_or_else(|| Error::data(format!("month {start_month} not present in panel")))?;
        if pos + n_months > months.len() {
            return Err(Error::data(format!(
                "requested {n_months} months from position {pos} but only {} months available",
                months.len() - pos
            )));
        }
        let wanted = &months[pos..pos + n_months];
        let start = self
            .dates
            .iter()
            .position(|d| month_index(d) == wanted[0])
            .unwrap();
        let end = self
            .dates
            .iter()
            .rposition(|d| month_index(d) == wanted[n_months - 1])
            .unwrap()
            + 1;
        Ok(self.slice_rows(start, end))
    }
}

/// Build sliding in/out-of-sample window pairs over calendar months.
///
/// Returns an empty list (with a warning) when the panel is too short.
pub fn make_windows(
    panel: &ReturnPanel,
    in_months: usize,
    out_months: usize,
    step_months: usize,
) -> Result<Vec<WindowPair>> {
    if step_months == 0 {
        return Err(Error::config("step_months must be >= 1".to_string()));
    }
    let months = panel.months();
    for w in months.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(Error::data(format!(
                "calendar months are not contiguous: gap between {} and {}",
                w[0], w[1]
            )));
        }
    }
    let total = in_months + out_months;
    if months.len() < total {
        warn!(
            "panel spans {} months, need {total} for one window: no windows produced",
            months.len()
        );
        return Ok(Vec::new());
    }

    // Per-month row ranges.
    let mut bounds: Vec<(usize, usize)> = Vec::with_capacity(months.len());
    let mut start = 0usize;
    for &m in &months {
        let end = panel
            .dates
            .iter()
            .rposition(|d| month_index(d) == m)
            .unwrap()
            + 1;
        bounds.push((start, end));
        start = end;
    }

    let mut windows = Vec::new();
    let mut k = 0usize;
    while k + total <= months.len() {
        let in_start = bounds[k].0;
        let in_end = bounds[k + in_months - 1].1;
        let out_start = bounds[k + in_months].0;
        let out_end = bounds[k + total - 1].1;
        debug_assert_eq!(in_end, out_start);
        let in_sample = panel.slice_rows(in_start, in_end);
        let out_of_sample = panel.slice_rows(out_start, out_end);
        let label = in_sample.dates[0].format("%Y-%m-%d").to_string();
        windows.push(WindowPair {
            in_sample,
            out_of_sample,
            label,
        });
        k += step_months;
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_full_coverage_passes_through() {
        let f = write_temp(
            "date,AAA,BBB,CCC\n\
             2020-01-01,1.0,2.0,3.0\n\
             2020-01-02,1.1,2.1,3.1\n\
             2020-01-03,1.2,2.2,3.2\n",
        );
        let panel = load_price_panel(f.path(), 0.99).unwrap();
        assert_eq!(panel.assets, vec!["AAA", "BBB", "CCC"]);
        assert_eq!(panel.n_dates(), 3);
        assert_eq!(panel.prices[[1, 2]], 3.1);
    }

    #[test]
    fn load_drops_low_coverage_asset() {
        let f = write_temp(
            "date,AAA,BBB,CCC\n\
             2020-01-01,1.0,2.0,3.0\n\
             2020-01-02,1.1,,3.1\n\
             2020-01-03,1.2,,3.2\n\
             2020-01-04,1.3,2.3,3.3\n",
        );
        let panel = load_price_panel(f.path(), 0.99).unwrap();
        assert_eq!(panel.assets, vec!["AAA", "CCC"]);
    }

    #[test]
    fn load_forward_fills_interior_gap() {
        let f = write_temp(
            "date,AAA,BBB\n\
             2020-01-01,1.0,5.0\n\
             2020-01-02,1.1,\n\
             2020-01-03,1.2,5.2\n\
             2020-01-06,1.3,5.3\n",
        );
        let panel = load_price_panel(f.path(), 0.5).unwrap();
        // the missing BBB cell takes the prior day's price
        assert_eq!(panel.prices[[1, 1]], 5.0);
        assert_eq!(panel.prices[[2, 1]], 5.2);
    }

    #[test]
    fn load_rejects_nonpositive_price() {
        let f = write_temp(
            "date,AAA\n2020-01-01,1.0\n2020-01-02,-2.0\n2020-01-03,1.0\n",
        );
        assert!(load_price_panel(f.path(), 0.5).is_err());
    }

    #[test]
    fn load_errors_when_nothing_survives() {
        let f = write_temp(
            "date,AAA\n2020-01-01,\n2020-01-02,1.0\n2020-01-03,\n",
        );
        assert!(load_price_panel(f.path(), 0.99).is_err());
    }

    fn panel_from_prices(prices: &[&[f64]], assets: &[&str]) -> PricePanel {
        let t = prices.len();
        let n = assets.len();
        let mut m = Array2::<f64>::zeros((t, n));
        for (i, row) in prices.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m[[i, j]] = *v;
            }
        }
        let dates: Vec<NaiveDate> = (0..t as u32)
            .map(|i| NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(i as u64))
            .collect();
        PricePanel {
            dates,
            assets: assets.iter().map(|s| s.to_string()).collect(),
            prices: m,
            caps: None,
        }
    }

    #[test]
    fn constant_log_return_is_flagged() {
        let e = std::f64::consts::E;
        let panel = panel_from_prices(&[&[1.0], &[e], &[e * e]], &["AAA"]);
        let ret = compute_returns(&panel).unwrap();
        assert!((ret.raw_returns[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((ret.raw_returns[[1, 0]] - 1.0).abs() < 1e-12);
        assert_eq!(ret.returns[[0, 0]], 0.0);
        assert_eq!(ret.returns[[1, 0]], 0.0);
        assert!(ret.zero_variance[0]);
    }

    #[test]
    fn two_point_zscores_are_plus_minus_one() {
        let panel = panel_from_prices(&[&[1.0], &[2.0], &[1.0]], &["AAA"]);
        let ret = compute_returns(&panel).unwrap();
        // raw returns are ln 2 and -ln 2; population std makes them exactly +-1
        assert!((ret.returns[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((ret.returns[[1, 0]] + 1.0).abs() < 1e-12);
        assert!(!ret.zero_variance[0]);
    }

    #[test]
    fn zscore_contract_mean_zero_std_one() {
        let panel = panel_from_prices(
            &[&[1.0], &[2.0], &[1.0], &[2.0], &[1.0]],
            &["AAA"],
        );
        let ret = compute_returns(&panel).unwrap();
        let t = ret.n_days() as f64;
        let mean: f64 = ret.returns.column(0).sum() / t;
        let var: f64 = ret.returns.column(0).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
        assert!(mean.abs() < 1e-9);
        assert!((var.sqrt() - 1.0).abs() < 1e-9);
    }

    /// Build a synthetic return panel spanning exactly `n_months` full
    /// calendar months of weekday dates.
    fn monthly_panel(n_months: usize) -> ReturnPanel {
        let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        let first = month_index(&start);
        let mut dates = Vec::new();
        let mut d = start;
        while month_index(&d) - first < n_months as i32 {
            if d.weekday().num_days_from_monday() < 5 {
                dates.push(d);
            }
            d = d + chrono::Days::new(1);
        }
        let t = dates.len();
        let mut prices = Array2::<f64>::zeros((t, 2));
        for i in 0..t {
            prices[[i, 0]] = 100.0 * (1.0 + 0.001 * i as f64);
            prices[[i, 1]] = 50.0 * (1.0 + 0.002 * (i % 7) as f64);
        }
        let panel = PricePanel {
            dates,
            assets: vec!["AAA".into(), "BBB".into()],
            prices,
            caps: None,
        };
        compute_returns(&panel).unwrap()
    }

    #[test]
    fn window_counts_match_month_arithmetic() {
        let panel = monthly_panel(45);
        assert_eq!(panel.months().len(), 45);
        let windows = make_windows(&panel, 12, 12, 1).unwrap();
        assert_eq!(windows.len(), 22);

        let panel = monthly_panel(24);
        let windows = make_windows(&panel, 12, 12, 1).unwrap();
        assert_eq!(windows.len(), 1);

        let panel = monthly_panel(33);
        let windows = make_windows(&panel, 12, 12, 3).unwrap();
        assert_eq!(windows.len(), 4);
    }

    #[test]
    fn too_short_span_yields_empty_list() {
        let panel = monthly_panel(10);
        let windows = make_windows(&panel, 12, 12, 1).unwrap();
        assert!(windows.is_empty());
    }

    #[test]
    fn windows_are_contiguous_and_ordered() {
        let panel = monthly_panel(30);
        let windows = make_windows(&panel, 12, 12, 1).unwrap();
        assert_eq!(windows.len(), 7);
        for w in &windows {
            assert_eq!(w.in_sample.months().len(), 12);
            assert_eq!(w.out_of_sample.months().len(), 12);
            // out-of-sample starts on the trading day after in-sample ends
            let last_in = *w.in_sample.dates.last().unwrap();
            let first_out = w.out_of_sample.dates[0];
            assert!(first_out > last_in);
            // contiguity in the parent panel: no parent date falls between them
            let gap = panel
                .dates
                .iter()
                .filter(|d| **d > last_in && **d < first_out)
                .count();
            assert_eq!(gap, 0);
        }
        for pair in windows.windows(2) {
            assert!(pair[0].label < pair[1].label);
        }
    }

    #[test]
    fn panel_csv_round_trips_bit_identically() {
        let f = write_temp(
            "date,AAA,BBB\n\
             2020-01-01,1.0123456789012345,2.5\n\
             2020-01-02,1.1,2.625\n\
             2020-01-03,1.2000000000000002,2.75\n",
        );
        let panel = load_price_panel(f.path(), 0.99).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        panel.write_csv(out.path()).unwrap();
        let reloaded = load_price_panel(out.path(), 0.99).unwrap();
        assert_eq!(panel.dates, reloaded.dates);
        assert_eq!(panel.assets, reloaded.assets);
        assert_eq!(panel.prices, reloaded.prices);
    }

    #[test]
    fn zscoring_is_idempotent() {
        let panel = monthly_panel(3);
        let mut once = panel.returns.clone();
        let flags = zscore_columns(&mut once);
        assert!(flags.iter().all(|f| !f));
        for j in 0..once.ncols() {
            for i in 0..once.nrows() {
                assert!((once[[i, j]] - panel.returns[[i, j]]).abs() < 1e-9);
            }
        }
    }
}
