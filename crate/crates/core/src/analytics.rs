//! Campaign analytics over the event store.
//!
//! Every function here is a pure function of the store rows: shuffling row
//! order never changes an output. Outputs are plot-ready tables; no
//! plotting engine is included.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::Ipv4Addr;
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::store::{list_partitions, read_store, EventRow, StoreError};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("store holds no events{0}")]
    EmptyStore(String),
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("storage unavailable: {0}")]
    StorageUnavailable(#[from] std::io::Error),
}

/// Inclusive date range, e.g. an exclusion window.
pub type DateRange = (NaiveDate, NaiveDate);

fn in_ranges(date: NaiveDate, ranges: &[DateRange]) -> bool {
    ranges.iter().any(|(a, b)| date >= *a && date <= *b)
}

/// Per-date exploit event counts for one vantage, zero-filled over the
/// vantage's observation span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailySeries {
    pub vantage_id: String,
    pub points: Vec<(NaiveDate, u64)>,
    pub exclusion_windows: Vec<DateRange>,
}

pub fn daily_series(rows: &[EventRow], vantage: &str) -> Result<DailySeries, AnalyticsError> {
    let mut counts: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.vantage_id == vantage) {
        *counts.entry(row.partition_date).or_insert(0) += 1;
    }
    let (Some(first), Some(last)) = (
        counts.keys().next().copied(),
        counts.keys().next_back().copied(),
    ) else {
        return Err(AnalyticsError::EmptyStore(format!(
            " for vantage {vantage}"
        )));
    };
    let mut points = Vec::new();
    let mut date = first;
    while date <= last {
        points.push((date, counts.get(&date).copied().unwrap_or(0)));
        date = date.succ_opt().expect("date in range");
    }
    Ok(DailySeries {
        vantage_id: vantage.to_string(),
        points,
        exclusion_windows: Vec::new(),
    })
}

/// Sample Pearson correlation over the paired dates of two series, after
/// dropping excluded dates and intersecting the date sets.
///
/// Mean-centered two-pass formula, with an exact ±1 fast path so perfectly
/// (anti)correlated inputs return ±1.0 without rounding residue.
pub fn pearson(
    a: &DailySeries,
    b: &DailySeries,
    exclusions: &[DateRange],
) -> Result<f64, AnalyticsError> {
    let b_map: HashMap<NaiveDate, u64> = b.points.iter().copied().collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (date, x) in &a.points {
        if in_ranges(*date, exclusions) {
            continue;
        }
        if let Some(y) = b_map.get(date) {
            xs.push(*x as f64);
            ys.push(*y as f64);
        }
    }
    if xs.len() < 3 {
        return Err(AnalyticsError::DegenerateSeries(format!(
            "{} paired dates after exclusion, need at least 3",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mean_x: f64 = xs.iter().sum::<f64>() / n;
    let mean_y: f64 = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalyticsError::DegenerateSeries(
            "zero variance on one side".to_string(),
        ));
    }
    if sxy * sxy == sxx * syy {
        return Ok(if sxy >= 0.0 { 1.0 } else { -1.0 });
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Destination-coverage statistics for one vantage.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageStats {
    /// (scanner, distinct destinations contacted), sorted by scanner.
    pub per_scanner: Vec<(Ipv4Addr, u64)>,
    /// Nearest-rank median of the per-scanner counts.
    pub median: u64,
    pub mean: f64,
    /// Nearest-rank 75th percentile.
    pub p75: u64,
    /// Scanners whose distinct-destination count equals the pool size.
    pub full_coverage: Vec<Ipv4Addr>,
}

fn nearest_rank(sorted: &[u64], p: f64) -> u64 {
    debug_assert!(!sorted.is_empty());
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn coverage_stats(
    rows: &[EventRow],
    vantage: &str,
    pool_size: u64,
) -> Result<CoverageStats, AnalyticsError> {
    let mut dests: BTreeMap<Ipv4Addr, BTreeSet<Ipv4Addr>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.vantage_id == vantage) {
        dests.entry(row.src_ip).or_default().insert(row.dst_ip);
    }
    if dests.is_empty() {
        return Err(AnalyticsError::EmptyStore(format!(
            " for vantage {vantage}"
        )));
    }
    let per_scanner: Vec<(Ipv4Addr, u64)> = dests
        .iter()
        .map(|(ip, set)| (*ip, set.len() as u64))
        .collect();
    let mut counts: Vec<u64> = per_scanner.iter().map(|(_, c)| *c).collect();
    counts.sort_unstable();
    let full_coverage = per_scanner
        .iter()
        .filter(|(_, c)| *c == pool_size)
        .map(|(ip, _)| *ip)
        .collect();
    Ok(CoverageStats {
        median: nearest_rank(&counts, 0.5),
        mean: counts.iter().sum::<u64>() as f64 / counts.len() as f64,
        p75: nearest_rank(&counts, 0.75),
        per_scanner,
        full_coverage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Scanner,
    Server,
}

/// Country shares of exploit traffic, descending, ties broken
/// alphabetically.
///
/// Scanner side counts exploit events by source country; server side counts
/// backend-endpoint occurrences by server country. Events exposing no
/// backend contribute nothing to the server side.
pub fn rank_countries(rows: &[EventRow], side: Side, k: usize) -> Vec<(String, f64)> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    for row in rows {
        match side {
            Side::Scanner => {
                *counts.entry(row.src_country.clone()).or_insert(0) += 1;
                total += 1;
            }
            Side::Server => {
                for b in &row.backends {
                    *counts.entry(b.country.clone()).or_insert(0) += 1;
                    total += 1;
                }
            }
        }
    }
    if total == 0 {
        return Vec::new();
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
        .into_iter()
        .take(k)
        .map(|(country, c)| (country, c as f64 / total as f64))
        .collect()
}

/// One scanner-country row of the coupling matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRow {
    pub scanner_country: String,
    /// (server country, event-endpoint count, row share, unique server IPs).
    pub cells: Vec<(String, u64, f64, u64)>,
}

/// Scanner-to-backend coupling.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CouplingMatrix {
    pub rows: Vec<CouplingRow>,
    /// Scanner countries whose events exposed no resolvable backend, with
    /// the affected event counts.
    pub no_backend: Vec<(String, u64)>,
}

pub fn coupling(rows: &[EventRow]) -> CouplingMatrix {
    let mut pair_events: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut pair_ips: BTreeMap<(String, String), BTreeSet<Ipv4Addr>> = BTreeMap::new();
    let mut no_backend: BTreeMap<String, u64> = BTreeMap::new();
    for row in rows {
        if row.backends.is_empty() {
            *no_backend.entry(row.src_country.clone()).or_insert(0) += 1;
            continue;
        }
        for b in &row.backends {
            let key = (row.src_country.clone(), b.country.clone());
            *pair_events.entry(key.clone()).or_insert(0) += 1;
            pair_ips.entry(key).or_default().insert(b.ip);
        }
    }
    let mut row_totals: BTreeMap<String, u64> = BTreeMap::new();
    for ((scanner, _), count) in &pair_events {
        *row_totals.entry(scanner.clone()).or_insert(0) += count;
    }
    let mut matrix_rows = Vec::new();
    for (scanner, row_total) in &row_totals {
        let cells = pair_events
            .iter()
            .filter(|((s, _), _)| s == scanner)
            .map(|((_, server), count)| {
                let unique = pair_ips[&(scanner.clone(), server.clone())].len() as u64;
                (
                    server.clone(),
                    *count,
                    *count as f64 / *row_total as f64,
                    unique,
                )
            })
            .collect();
        matrix_rows.push(CouplingRow {
            scanner_country: scanner.clone(),
            cells,
        });
    }
    CouplingMatrix {
        rows: matrix_rows,
        no_backend: no_backend.into_iter().collect(),
    }
}

/// Cumulative distinct source IPs and ASNs by first-seen date, one point
/// per date across the observation span. Both curves are non-decreasing and
/// end at the store-wide distinct counts.
pub fn growth_curves(rows: &[EventRow]) -> Vec<(NaiveDate, u64, u64)> {
    let mut first_ip: HashMap<Ipv4Addr, NaiveDate> = HashMap::new();
    let mut first_asn: HashMap<u32, NaiveDate> = HashMap::new();
    for row in rows {
        first_ip
            .entry(row.src_ip)
            .and_modify(|d| *d = (*d).min(row.partition_date))
            .or_insert(row.partition_date);
        if let Some(asn) = row.src_asn {
            first_asn
                .entry(asn)
                .and_modify(|d| *d = (*d).min(row.partition_date))
                .or_insert(row.partition_date);
        }
    }
    let Some(first) = rows.iter().map(|r| r.partition_date).min() else {
        return Vec::new();
    };
    let last = rows
        .iter()
        .map(|r| r.partition_date)
        .max()
        .expect("nonempty");
    let mut ip_by_date: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    for d in first_ip.values() {
        *ip_by_date.entry(*d).or_insert(0) += 1;
    }
    let mut asn_by_date: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    for d in first_asn.values() {
        *asn_by_date.entry(*d).or_insert(0) += 1;
    }
    let mut out = Vec::new();
    let mut cum_ip = 0u64;
    let mut cum_asn = 0u64;
    let mut date = first;
    while date <= last {
        cum_ip += ip_by_date.get(&date).copied().unwrap_or(0);
        cum_asn += asn_by_date.get(&date).copied().unwrap_or(0);
        out.push((date, cum_ip, cum_asn));
        date = date.succ_opt().expect("date in range");
    }
    out
}

/// Weeks-by-ports matrix of per-week max-normalized intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct PortHeatmap {
    /// Top-k ports by total exploit volume (count desc, port asc).
    pub ports: Vec<u16>,
    /// Week bin start dates, 7-day bins anchored at the first event date.
    pub weeks: Vec<NaiveDate>,
    /// `cells[week][port]`, each in [0,1]; a week with any traffic on the
    /// selected ports has at least one cell exactly 1.0.
    pub cells: Vec<Vec<f64>>,
}

pub fn port_heatmap(rows: &[EventRow], k: usize) -> PortHeatmap {
    assert!(k >= 1, "top-k must be at least 1");
    let Some(first) = rows.iter().map(|r| r.partition_date).min() else {
        return PortHeatmap {
            ports: Vec::new(),
            weeks: Vec::new(),
            cells: Vec::new(),
        };
    };
    let last = rows
        .iter()
        .map(|r| r.partition_date)
        .max()
        .expect("nonempty");
    let week_count = ((last - first).num_days() / 7 + 1) as usize;

    let mut port_totals: BTreeMap<u16, u64> = BTreeMap::new();
    for row in rows {
        *port_totals.entry(row.dst_port).or_insert(0) += 1;
    }
    let mut ranked: Vec<(u16, u64)> = port_totals.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let ports: Vec<u16> = ranked.into_iter().take(k).map(|(p, _)| p).collect();
    let port_idx: HashMap<u16, usize> = ports.iter().enumerate().map(|(i, p)| (*p, i)).collect();

    let mut week_counts = vec![vec![0u64; ports.len()]; week_count];
    for row in rows {
        if let Some(col) = port_idx.get(&row.dst_port) {
            let week = ((row.partition_date - first).num_days() / 7) as usize;
            week_counts[week][*col] += 1;
        }
    }
    let cells = week_counts
        .iter()
        .map(|counts| {
            let week_max = counts.iter().copied().max().unwrap_or(0);
            counts
                .iter()
                .map(|c| {
                    if week_max == 0 {
                        0.0
                    } else {
                        *c as f64 / week_max as f64
                    }
                })
                .collect()
        })
        .collect();
    let weeks = (0..week_count)
        .map(|w| first + chrono::Days::new(7 * w as u64))
        .collect();
    PortHeatmap {
        ports,
        weeks,
        cells,
    }
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Top-k for the country rankings and port heatmap.
    pub top_k: usize,
    /// Pool size per vantage for coverage tables; vantages missing here get
    /// no coverage table.
    pub vantage_pools: Vec<(String, u64)>,
    pub exclusions: Vec<DateRange>,
}

impl Default for ReportOptions {
    fn default() -> ReportOptions {
        ReportOptions {
            top_k: 15,
            vantage_pools: Vec::new(),
            exclusions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportManifest {
    pub tool_version: String,
    pub row_count: u64,
    pub top_k: usize,
    pub vantage_pools: Vec<(String, u64)>,
    pub exclusions: Vec<String>,
    /// (partition file name, SHA-256 of its bytes), in date order.
    pub input_digests: Vec<(String, String)>,
    /// Output files written, in write order.
    pub outputs: Vec<String>,
}

fn write_deterministic(path: &Path, contents: &str) -> Result<(), AnalyticsError> {
    std::fs::write(path, contents)?;
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    // Shortest round-trip formatting; stable for equal inputs.
    format!("{v}")
}

/// Emits every analytics table as CSV plus a run manifest. Output bytes are
/// identical across repeated runs over the same store.
pub fn report(
    store_root: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    opts: &ReportOptions,
) -> Result<ReportManifest, AnalyticsError> {
    let store_root = store_root.as_ref();
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let rows = read_store(store_root)?;
    let mut outputs = Vec::new();

    // Daily series for every vantage present.
    let mut vantages: Vec<String> = rows.iter().map(|r| r.vantage_id.clone()).collect();
    vantages.sort();
    vantages.dedup();
    let mut series_csv = String::from("vantage,date,exploit_events\n");
    for v in &vantages {
        let series = daily_series(&rows, v)?;
        for (date, count) in &series.points {
            series_csv.push_str(&format!("{v},{date},{count}\n"));
        }
    }
    write_deterministic(&out_dir.join("daily_series.csv"), &series_csv)?;
    outputs.push("daily_series.csv".to_string());

    // Pairwise Pearson between vantages under the configured exclusions.
    let mut pearson_csv = String::from("vantage_a,vantage_b,r,paired_dates\n");
    for i in 0..vantages.len() {
        for j in i + 1..vantages.len() {
            let a = daily_series(&rows, &vantages[i])?;
            let b = daily_series(&rows, &vantages[j])?;
            match pearson(&a, &b, &opts.exclusions) {
                Ok(r) => {
                    let paired = a
                        .points
                        .iter()
                        .filter(|(d, _)| {
                            !in_ranges(*d, &opts.exclusions)
                                && b.points.iter().any(|(bd, _)| bd == d)
                        })
                        .count();
                    pearson_csv.push_str(&format!(
                        "{},{},{},{}\n",
                        vantages[i],
                        vantages[j],
                        fmt_f64(r),
                        paired
                    ));
                }
                Err(AnalyticsError::DegenerateSeries(reason)) => {
                    pearson_csv.push_str(&format!(
                        "{},{},degenerate: {},0\n",
                        vantages[i], vantages[j], reason
                    ));
                }
                Err(e) => return Err(e),
            }
        }
    }
    write_deterministic(&out_dir.join("pearson.csv"), &pearson_csv)?;
    outputs.push("pearson.csv".to_string());

    // Coverage per configured vantage pool.
    for (vantage, pool) in &opts.vantage_pools {
        let stats = coverage_stats(&rows, vantage, *pool)?;
        let mut csv = String::from("scanner,distinct_destinations,full_coverage\n");
        for (ip, count) in &stats.per_scanner {
            let full = stats.full_coverage.contains(ip);
            csv.push_str(&format!("{ip},{count},{full}\n"));
        }
        csv.push_str(&format!(
            "#summary,median={},mean={},p75={}\n",
            stats.median,
            fmt_f64(stats.mean),
            stats.p75
        ));
        let name = format!("coverage_{vantage}.csv");
        write_deterministic(&out_dir.join(&name), &csv)?;
        outputs.push(name);
    }

    // Country rankings, both sides.
    for (side, name) in [(Side::Scanner, "rank_scanner.csv"), (Side::Server, "rank_server.csv")] {
        let ranked = rank_countries(&rows, side, opts.top_k);
        let mut csv = String::from("country,share\n");
        for (country, share) in ranked {
            csv.push_str(&format!("{country},{}\n", fmt_f64(share)));
        }
        write_deterministic(&out_dir.join(name), &csv)?;
        outputs.push(name.to_string());
    }

    // Coupling matrix and the no-backend report.
    let matrix = coupling(&rows);
    let mut csv =
        String::from("scanner_country,server_country,events,row_share,unique_server_ips\n");
    for row in &matrix.rows {
        for (server, events, share, unique) in &row.cells {
            csv.push_str(&format!(
                "{},{server},{events},{},{unique}\n",
                row.scanner_country,
                fmt_f64(*share)
            ));
        }
    }
    write_deterministic(&out_dir.join("coupling.csv"), &csv)?;
    outputs.push("coupling.csv".to_string());
    let mut csv = String::from("scanner_country,events_without_backend\n");
    for (country, count) in &matrix.no_backend {
        csv.push_str(&format!("{country},{count}\n"));
    }
    write_deterministic(&out_dir.join("no_backend.csv"), &csv)?;
    outputs.push("no_backend.csv".to_string());

    // Growth curves.
    let mut csv = String::from("date,cumulative_unique_src_ips,cumulative_unique_src_asns\n");
    for (date, ips, asns) in growth_curves(&rows) {
        csv.push_str(&format!("{date},{ips},{asns}\n"));
    }
    write_deterministic(&out_dir.join("growth.csv"), &csv)?;
    outputs.push("growth.csv".to_string());

    // Port heatmap.
    let heatmap = port_heatmap(&rows, opts.top_k);
    let mut csv = String::from("week_start,port,intensity\n");
    for (w, week) in heatmap.weeks.iter().enumerate() {
        for (p, port) in heatmap.ports.iter().enumerate() {
            csv.push_str(&format!("{week},{port},{}\n", fmt_f64(heatmap.cells[w][p])));
        }
    }
    write_deterministic(&out_dir.join("heatmap.csv"), &csv)?;
    outputs.push("heatmap.csv".to_string());

    // Manifest: digests of the inputs plus the run configuration.
    let mut input_digests = Vec::new();
    for (_, path) in list_partitions(store_root)? {
        let bytes = std::fs::read(&path)?;
        let digest = hex::encode(Sha256::digest(&bytes));
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("partition")
            .to_string();
        input_digests.push((name, digest));
    }
    let manifest = ReportManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        row_count: rows.len() as u64,
        top_k: opts.top_k,
        vantage_pools: opts.vantage_pools.clone(),
        exclusions: opts
            .exclusions
            .iter()
            .map(|(a, b)| format!("{a}:{b}"))
            .collect(),
        input_digests,
        outputs: outputs.clone(),
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_json.push('\n');
    write_deterministic(&out_dir.join("manifest.json"), &manifest_json)?;
    Ok(manifest)
}
