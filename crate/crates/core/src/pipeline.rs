//! End-to-end glue: capture files in, stored exploit events out.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::decode::{decode, DecodeConfig};
use crate::geo::{GeoDataset, GeoError};
use crate::packet::{parse_capture_file, CaptureError, PacketRecord};
use crate::reassembly::{build_connection, group_by_connection, DEFAULT_SESSION_GAP_S};
use crate::signature::{classify_connection, ClassifyOptions, ExploitEvent};
use crate::store::{append, enrich, StoreError, WriteReceipt};

#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub session_gap_s: f64,
    pub decode: DecodeConfig,
    pub classify: ClassifyOptions,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            session_gap_s: DEFAULT_SESSION_GAP_S,
            decode: DecodeConfig::default(),
            classify: ClassifyOptions::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("capture {path}: {source}")]
    Capture {
        path: PathBuf,
        source: CaptureError,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Counters describing one ingest run.
#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub files: u64,
    pub records: u64,
    pub skipped_non_tcp: u64,
    pub skipped_malformed: u64,
    pub truncated_files: u64,
    pub connections: u64,
    pub payload_empty_connections: u64,
    pub events: u64,
    pub receipt: WriteReceipt,
}

/// Runs reassembly, decoding, and classification over a time-ordered record
/// stream. Connections are processed in (first timestamp, key) order so
/// repeated runs emit events identically.
pub fn events_from_records(
    mut records: Vec<PacketRecord>,
    vantage_id: &str,
    cfg: &PipelineConfig,
) -> (Vec<ExploitEvent>, u64, u64) {
    records.sort_by_key(|r| r.ts_us);
    let grouped = group_by_connection(records, cfg.session_gap_s);
    let mut connections: Vec<_> = grouped
        .into_iter()
        .map(|(key, pkts)| build_connection(key, pkts))
        .collect();
    connections.sort_by_key(|c| (c.first_ts_us, c.key));

    let total = connections.len() as u64;
    let mut empty = 0u64;
    let mut events = Vec::new();
    for conn in &connections {
        if conn.is_payload_empty() {
            empty += 1;
            continue;
        }
        let decoded = decode(&conn.client_stream, &cfg.decode);
        if let Some(ev) = classify_connection(conn, &decoded, vantage_id, cfg.classify) {
            events.push(ev);
        }
    }
    (events, total, empty)
}

/// Parses capture files, detects exploit events, enriches, and appends them
/// to the store. Files are merged into one timestamp-ordered stream before
/// reassembly so connections split across rotation files still assemble.
pub fn ingest_captures(
    paths: &[PathBuf],
    vantage_id: &str,
    geo: &GeoDataset,
    store_root: impl AsRef<Path>,
    cfg: &PipelineConfig,
) -> Result<IngestReport, PipelineError> {
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    for path in paths {
        let bytes = std::fs::read(path).map_err(|source| PipelineError::Io {
            path: path.clone(),
            source,
        })?;
        let capture_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("capture")
            .to_string();
        let parsed =
            parse_capture_file(&bytes, &capture_id).map_err(|source| PipelineError::Capture {
                path: path.clone(),
                source,
            })?;
        report.files += 1;
        report.records += parsed.records.len() as u64;
        report.skipped_non_tcp += parsed.skipped_non_tcp;
        report.skipped_malformed += parsed.skipped_malformed;
        if parsed.truncated {
            report.truncated_files += 1;
        }
        records.extend(parsed.records);
    }

    let (events, connections, empty) = events_from_records(records, vantage_id, cfg);
    report.connections = connections;
    report.payload_empty_connections = empty;
    report.events = events.len() as u64;

    let rows: Vec<_> = events.iter().map(|ev| enrich(ev, geo)).collect();
    report.receipt = append(&rows, store_root)?;
    Ok(report)
}

/// Expands a path argument into capture files: a directory yields its
/// `*.pcap` children sorted by name, a file yields itself.
pub fn expand_capture_paths(path: &Path) -> std::io::Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|x| x == "pcap").unwrap_or(false))
            .collect();
        files.sort();
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}
