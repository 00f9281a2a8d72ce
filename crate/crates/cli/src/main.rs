//! Command-line front end: simulate campaigns, ingest captures, inspect the
//! store, and run the analytics.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use antscope_core::analytics::{self, DateRange, ReportOptions, Side};
use antscope_core::geo::load_geo_dataset;
use antscope_core::pipeline::{expand_capture_paths, ingest_captures, PipelineConfig};
use antscope_core::sim::{self, demo, CampaignSpec};
use antscope_core::store::{list_partitions, read_store};
use antscope_core::{ClassifyOptions, DecodeConfig};

#[derive(Parser)]
#[command(
    name = "antscope",
    version,
    about = "Active network telescope pipeline: capture ingest, exploit detection, campaign analytics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse capture files, detect exploit events, enrich, and store them.
    Ingest(IngestArgs),
    /// Generate a synthetic campaign: captures, geo dataset, ground truth.
    Simulate(SimulateArgs),
    /// Inspect a store's partitions.
    Store(StoreArgs),
    /// Compute analytics over a store.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Capture file or directory of .pcap files (repeatable).
    #[arg(long, required = true)]
    pcap: Vec<PathBuf>,
    /// Vantage identifier recorded on every event.
    #[arg(long)]
    vantage: String,
    /// Store root directory.
    #[arg(long)]
    store: PathBuf,
    /// Geo/ASN dataset CSV.
    #[arg(long)]
    geo: PathBuf,
    /// Optional TOML config with [decode] and [pipeline] keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Keep private/reserved backend addresses (simulation mode).
    #[arg(long)]
    allow_private_backends: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Campaign spec TOML; omit with --demo for the built-in campaign.
    #[arg(long, conflicts_with = "demo")]
    spec: Option<PathBuf>,
    /// Use the built-in demonstration campaign.
    #[arg(long)]
    demo: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StoreArgs {
    /// Store root directory.
    #[arg(long)]
    root: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(subcommand)]
    what: AnalyzeCommand,
}

#[derive(Args, Clone)]
struct CommonAnalyze {
    /// Store root directory.
    #[arg(long)]
    store: PathBuf,
    /// Restrict to one vantage where the analytic is per-vantage.
    #[arg(long)]
    vantage: Option<String>,
    /// Exclusion window YYYY-MM-DD:YYYY-MM-DD (repeatable).
    #[arg(long = "exclude", value_parser = parse_date_range)]
    exclude: Vec<DateRange>,
    /// Top-k cutoff for rankings and the heatmap.
    #[arg(long = "top", default_value_t = 15)]
    top: usize,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Per-date exploit event counts for one vantage.
    Series {
        #[command(flatten)]
        common: CommonAnalyze,
    },
    /// Pearson correlation between two vantages' daily series.
    Pearson {
        #[command(flatten)]
        common: CommonAnalyze,
        /// The two vantage ids to correlate.
        #[arg(long, num_args = 2)]
        vantages: Vec<String>,
    },
    /// Destination coverage statistics for one vantage.
    Coverage {
        #[command(flatten)]
        common: CommonAnalyze,
        /// Monitored pool size for full-coverage flagging.
        #[arg(long)]
        pool_size: u64,
    },
    /// Country ranking by traffic share.
    Rank {
        #[command(flatten)]
        common: CommonAnalyze,
        /// scanner or server side.
        #[arg(long, value_parser = ["scanner", "server"])]
        side: String,
    },
    /// Scanner-to-backend country coupling matrix.
    Coupling {
        #[command(flatten)]
        common: CommonAnalyze,
    },
    /// Cumulative unique source IP/ASN growth.
    Growth {
        #[command(flatten)]
        common: CommonAnalyze,
    },
    /// Weekly max-normalized port heatmap.
    Heatmap {
        #[command(flatten)]
        common: CommonAnalyze,
    },
    /// Emit every table plus a manifest into a directory.
    Report {
        #[command(flatten)]
        common: CommonAnalyze,
        #[arg(long)]
        out: PathBuf,
        /// Pool size per vantage as vantage=N (repeatable).
        #[arg(long = "pool", value_parser = parse_pool)]
        pool: Vec<(String, u64)>,
    },
}

fn parse_date_range(s: &str) -> Result<DateRange, String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected YYYY-MM-DD:YYYY-MM-DD, got {s:?}"))?;
    let a: NaiveDate = a.parse().map_err(|e| format!("bad start date: {e}"))?;
    let b: NaiveDate = b.parse().map_err(|e| format!("bad end date: {e}"))?;
    if a > b {
        return Err(format!("range start {a} after end {b}"));
    }
    Ok((a, b))
}

fn parse_pool(s: &str) -> Result<(String, u64), String> {
    let (v, n) = s
        .split_once('=')
        .ok_or_else(|| format!("expected vantage=N, got {s:?}"))?;
    let n: u64 = n.parse().map_err(|e| format!("bad pool size: {e}"))?;
    Ok((v.to_string(), n))
}

/// `[decode]` and `[pipeline]` keys of the optional ingest config file.
#[derive(Debug, Default, Deserialize)]
struct FileConfig {
    #[serde(default)]
    decode: DecodeKeys,
    #[serde(default)]
    pipeline: PipelineKeys,
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct DecodeKeys {
    threshold: f64,
    max_depth: usize,
}

impl Default for DecodeKeys {
    fn default() -> Self {
        let d = DecodeConfig::default();
        DecodeKeys {
            threshold: d.threshold,
            max_depth: d.max_depth,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct PipelineKeys {
    session_gap_s: f64,
}

impl Default for PipelineKeys {
    fn default() -> Self {
        PipelineKeys {
            session_gap_s: antscope_core::reassembly::DEFAULT_SESSION_GAP_S,
        }
    }
}

fn run_ingest(args: IngestArgs) -> Result<()> {
    let file_cfg: FileConfig = match &args.config {
        Some(path) => toml::from_str(
            &std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?,
        )
        .context("parsing config")?,
        None => FileConfig::default(),
    };
    let cfg = PipelineConfig {
        session_gap_s: file_cfg.pipeline.session_gap_s,
        decode: DecodeConfig {
            threshold: file_cfg.decode.threshold,
            max_depth: file_cfg.decode.max_depth,
        },
        classify: ClassifyOptions {
            allow_private_backends: args.allow_private_backends,
        },
    };
    let geo = load_geo_dataset(&args.geo)
        .with_context(|| format!("loading geo dataset {}", args.geo.display()))?;
    let mut files = Vec::new();
    for path in &args.pcap {
        files.extend(expand_capture_paths(path)?);
    }
    if files.is_empty() {
        bail!("no capture files found under the given --pcap paths");
    }
    let report = ingest_captures(&files, &args.vantage, &geo, &args.store, &cfg)?;
    println!(
        "ingested {} files: {} records ({} non-tcp skipped, {} malformed skipped, {} truncated files)",
        report.files,
        report.records,
        report.skipped_non_tcp,
        report.skipped_malformed,
        report.truncated_files
    );
    println!(
        "connections: {} ({} without payload), exploit events: {}, stored {} new / {} duplicate",
        report.connections,
        report.payload_empty_connections,
        report.events,
        report.receipt.written,
        report.receipt.skipped
    );
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let spec = if args.demo {
        demo::demo_spec()
    } else {
        let path = args
            .spec
            .ok_or_else(|| anyhow::anyhow!("pass --spec <file> or --demo"))?;
        CampaignSpec::load(&path).with_context(|| format!("loading spec {}", path.display()))?
    };
    let out = sim::generate(&spec, &args.out)?;
    let exploit = out.ground_truth.exploit_connections().count();
    println!(
        "wrote {} capture files under {}",
        out.capture_files.len(),
        args.out.display()
    );
    println!(
        "ground truth: {} connections ({} exploit) -> {}",
        out.ground_truth.connections.len(),
        exploit,
        out.truth_path.display()
    );
    println!("geo dataset -> {}", out.geo_path.display());
    println!("spec copy   -> {}", out.spec_path.display());
    Ok(())
}

fn run_store(args: StoreArgs) -> Result<()> {
    let partitions = list_partitions(&args.root)?;
    if partitions.is_empty() {
        println!("no partitions under {}", args.root.display());
        return Ok(());
    }
    let rows = read_store(&args.root)?;
    println!("{} partitions, {} rows", partitions.len(), rows.len());
    for (date, path) in partitions {
        let count = rows.iter().filter(|r| r.partition_date == date).count();
        println!(
            "  {date}  {count:>8} rows  {}",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("?")
        );
    }
    Ok(())
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    match args.what {
        AnalyzeCommand::Series { common } => {
            let rows = read_store(&common.store)?;
            let vantage = common
                .vantage
                .ok_or_else(|| anyhow::anyhow!("--vantage required for series"))?;
            let series = analytics::daily_series(&rows, &vantage)?;
            println!("date,exploit_events");
            for (date, count) in series.points {
                println!("{date},{count}");
            }
        }
        AnalyzeCommand::Pearson { common, vantages } => {
            let rows = read_store(&common.store)?;
            let a = analytics::daily_series(&rows, &vantages[0])?;
            let b = analytics::daily_series(&rows, &vantages[1])?;
            let r = analytics::pearson(&a, &b, &common.exclude)?;
            println!("r = {r}");
        }
        AnalyzeCommand::Coverage { common, pool_size } => {
            let rows = read_store(&common.store)?;
            let vantage = common
                .vantage
                .ok_or_else(|| anyhow::anyhow!("--vantage required for coverage"))?;
            let stats = analytics::coverage_stats(&rows, &vantage, pool_size)?;
            println!("scanner,distinct_destinations,full_coverage");
            for (ip, count) in &stats.per_scanner {
                println!("{ip},{count},{}", stats.full_coverage.contains(ip));
            }
            println!(
                "# median={} mean={} p75={} full_coverage_count={}",
                stats.median,
                stats.mean,
                stats.p75,
                stats.full_coverage.len()
            );
        }
        AnalyzeCommand::Rank { common, side } => {
            let rows = read_store(&common.store)?;
            let side = if side == "scanner" {
                Side::Scanner
            } else {
                Side::Server
            };
            println!("country,share");
            for (country, share) in analytics::rank_countries(&rows, side, common.top) {
                println!("{country},{share}");
            }
        }
        AnalyzeCommand::Coupling { common } => {
            let rows = read_store(&common.store)?;
            let matrix = analytics::coupling(&rows);
            println!("scanner_country,server_country,events,row_share,unique_server_ips");
            for row in &matrix.rows {
                for (server, events, share, unique) in &row.cells {
                    println!("{},{server},{events},{share},{unique}", row.scanner_country);
                }
            }
            if !matrix.no_backend.is_empty() {
                println!("# no resolvable backend:");
                for (country, count) in &matrix.no_backend {
                    println!("# {country}: {count} events");
                }
            }
        }
        AnalyzeCommand::Growth { common } => {
            let rows = read_store(&common.store)?;
            println!("date,cumulative_unique_src_ips,cumulative_unique_src_asns");
            for (date, ips, asns) in analytics::growth_curves(&rows) {
                println!("{date},{ips},{asns}");
            }
        }
        AnalyzeCommand::Heatmap { common } => {
            let rows = read_store(&common.store)?;
            let h = analytics::port_heatmap(&rows, common.top);
            println!("week_start,port,intensity");
            for (w, week) in h.weeks.iter().enumerate() {
                for (p, port) in h.ports.iter().enumerate() {
                    println!("{week},{port},{}", h.cells[w][p]);
                }
            }
        }
        AnalyzeCommand::Report { common, out, pool } => {
            let opts = ReportOptions {
                top_k: common.top,
                vantage_pools: pool,
                exclusions: common.exclude,
            };
            let manifest = analytics::report(&common.store, &out, &opts)?;
            println!(
                "wrote {} tables + manifest.json to {} ({} rows analyzed)",
                manifest.outputs.len(),
                out.display(),
                manifest.row_count
            );
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    // Die quietly when a downstream pager/head closes the pipe.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match Cli::parse().command {
        Command::Ingest(args) => run_ingest(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Store(args) => run_store(args),
        Command::Analyze(args) => run_analyze(args),
    }
}
