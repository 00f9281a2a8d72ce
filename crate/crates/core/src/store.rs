//! Daily partitioned event store.
//!
//! Events land as line-delimited JSON records in one file per UTC date,
//! `events-YYYY-MM-DD.jsonl` under the store root. Appends are idempotent:
//! rows are unique by (connection key, timestamp, payload digest) within a
//! partition and duplicates are skipped, so replaying an ingest cannot
//! double-count. Analytics only ever scan and group, which keeps the store
//! dependency-free; the documented schema leaves a database backend
//! drop-in.
//!
//! Stored fields are the analytically used subset: vantage, timing,
//! addressing, source country/ASN, backend endpoints with their
//! country/ASN, and the payload digest.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoDataset;
use crate::signature::ExploitEvent;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage unavailable: {0}")]
    StorageUnavailable(#[from] std::io::Error),
    #[error("bad row in {file} line {line}: {reason}")]
    BadRow {
        file: PathBuf,
        line: usize,
        reason: String,
    },
}

/// One enriched backend endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendRow {
    pub ip: Ipv4Addr,
    pub port: Option<u16>,
    pub country: String,
    pub asn: Option<u32>,
}

/// One stored exploit event, flattened and enriched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRow {
    pub vantage_id: String,
    pub ts_us: u64,
    pub partition_date: NaiveDate,
    pub conn_key: String,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub dst_port: u16,
    pub src_country: String,
    pub src_asn: Option<u32>,
    pub backends: Vec<BackendRow>,
    pub domain_count: usize,
    pub payload_digest: String,
}

impl EventRow {
    fn unique_key(&self) -> (String, u64, String) {
        (
            self.conn_key.clone(),
            self.ts_us,
            self.payload_digest.clone(),
        )
    }
}

/// UTC calendar date of a microsecond timestamp.
pub fn partition_date_of(ts_us: u64) -> NaiveDate {
    DateTime::from_timestamp_micros(ts_us as i64)
        .expect("timestamp in range")
        .date_naive()
}

/// Annotates an event with source and backend geography. Unknown addresses
/// get `"ZZ"`/no-ASN rather than being dropped, so enrichment stays uniform.
pub fn enrich(event: &ExploitEvent, geo: &GeoDataset) -> EventRow {
    let src = geo.lookup(event.src_ip);
    let backends = event
        .backend_endpoints
        .iter()
        .map(|(ip, port)| {
            let rec = geo.lookup(*ip);
            BackendRow {
                ip: *ip,
                port: *port,
                country: rec.country,
                asn: rec.asn,
            }
        })
        .collect();
    EventRow {
        vantage_id: event.vantage_id.clone(),
        ts_us: event.ts_us,
        partition_date: partition_date_of(event.ts_us),
        conn_key: event.key.canonical_string(),
        src_ip: event.src_ip,
        dst_ip: event.dst_ip,
        dst_port: event.dst_port,
        src_country: src.country,
        src_asn: src.asn,
        backends,
        domain_count: event.domain_count,
        payload_digest: event.payload_digest.clone(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WriteReceipt {
    pub written: u64,
    pub skipped: u64,
}

fn partition_path(root: &Path, date: NaiveDate) -> PathBuf {
    root.join(format!("events-{date}.jsonl"))
}

fn read_partition(path: &Path) -> Result<Vec<EventRow>, StoreError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: EventRow = serde_json::from_str(&line).map_err(|e| StoreError::BadRow {
            file: path.to_path_buf(),
            line: idx + 1,
            reason: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Appends rows into their daily partitions, skipping duplicates.
///
/// Rows must already be enriched; each row's partition is derived from its
/// own `partition_date`. Appends to distinct dates are independent.
pub fn append(rows: &[EventRow], store_root: impl AsRef<Path>) -> Result<WriteReceipt, StoreError> {
    let root = store_root.as_ref();
    std::fs::create_dir_all(root)?;
    let mut receipt = WriteReceipt::default();

    let mut dates: Vec<NaiveDate> = rows.iter().map(|r| r.partition_date).collect();
    dates.sort();
    dates.dedup();

    for date in dates {
        let path = partition_path(root, date);
        let mut existing: HashSet<(String, u64, String)> = HashSet::new();
        if path.exists() {
            for row in read_partition(&path)? {
                existing.insert(row.unique_key());
            }
        }
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)?;
        for row in rows.iter().filter(|r| r.partition_date == date) {
            if existing.insert(row.unique_key()) {
                let mut line = serde_json::to_string(row).expect("row serializes");
                line.push('\n');
                file.write_all(line.as_bytes())?;
                receipt.written += 1;
            } else {
                receipt.skipped += 1;
            }
        }
    }
    Ok(receipt)
}

/// Lists partition files in date order.
pub fn list_partitions(store_root: impl AsRef<Path>) -> Result<Vec<(NaiveDate, PathBuf)>, StoreError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(store_root.as_ref())? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(date_part) = name
            .strip_prefix("events-")
            .and_then(|s| s.strip_suffix(".jsonl"))
        {
            if let Ok(date) = date_part.parse::<NaiveDate>() {
                out.push((date, path));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Reads every partition back, in (date, file order).
pub fn read_store(store_root: impl AsRef<Path>) -> Result<Vec<EventRow>, StoreError> {
    let mut rows = Vec::new();
    for (_, path) in list_partitions(store_root)? {
        rows.extend(read_partition(&path)?);
    }
    Ok(rows)
}
