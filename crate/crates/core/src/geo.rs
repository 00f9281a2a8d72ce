//! Offline geographic/ASN enrichment dataset.
//!
//! A CSV of non-overlapping address ranges stands in for a commercial
//! lookup service so runs are reproducible anywhere. Rows are
//! `start_ip,end_ip,country,asn,as_name[,city]` with inclusive bounds;
//! point lookups answer in O(log n) over the sorted ranges. Addresses
//! outside every range enrich to country `"ZZ"` with no ASN — unknown is a
//! value, not a dropped row.

use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Enrichment answer for one address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoAsnRecord {
    pub ip: Ipv4Addr,
    /// ISO 3166-1 alpha-2, or `"ZZ"` when unknown.
    pub country: String,
    pub asn: Option<u32>,
    pub as_name: Option<String>,
    pub city: Option<String>,
}

/// One source range, inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeoRange {
    pub start: Ipv4Addr,
    pub end: Ipv4Addr,
    pub country: String,
    pub asn: Option<u32>,
    pub as_name: Option<String>,
    pub city: Option<String>,
}

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("failed to read geo dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("overlapping ranges at line {line}: {a}-{b} intersects an earlier range")]
    OverlappingRanges { line: usize, a: Ipv4Addr, b: Ipv4Addr },
}

/// Immutable point-lookup structure; freely shareable once loaded.
#[derive(Debug, Clone, Default)]
pub struct GeoDataset {
    // Sorted by range start; ranges verified disjoint at load.
    rows: Vec<(u32, u32, GeoRange)>,
}

fn parse_row(line_no: usize, fields: &[&str]) -> Result<GeoRange, GeoError> {
    let bad = |reason: &str| GeoError::MalformedRow {
        line: line_no,
        reason: reason.to_string(),
    };
    if fields.len() < 5 || fields.len() > 6 {
        return Err(bad(&format!("expected 5 or 6 fields, got {}", fields.len())));
    }
    let start: Ipv4Addr = fields[0].trim().parse().map_err(|_| bad("bad start_ip"))?;
    let end: Ipv4Addr = fields[1].trim().parse().map_err(|_| bad("bad end_ip"))?;
    if u32::from(start) > u32::from(end) {
        return Err(bad("start_ip after end_ip"));
    }
    let country = fields[2].trim().to_string();
    if country.len() != 2 || !country.chars().all(|c| c.is_ascii_uppercase()) {
        return Err(bad("country must be two uppercase letters"));
    }
    let asn = match fields[3].trim() {
        "" => None,
        s => {
            let v: u32 = s.parse().map_err(|_| bad("bad asn"))?;
            if v == 0 {
                return Err(bad("asn must be positive"));
            }
            Some(v)
        }
    };
    let as_name = match fields[4].trim() {
        "" => None,
        s => Some(s.to_string()),
    };
    let city = fields
        .get(5)
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_string());
    Ok(GeoRange {
        start,
        end,
        country,
        asn,
        as_name,
        city,
    })
}

impl GeoDataset {
    pub fn from_ranges(ranges: Vec<GeoRange>) -> Result<GeoDataset, GeoError> {
        let mut rows: Vec<(u32, u32, GeoRange)> = ranges
            .into_iter()
            .map(|r| (u32::from(r.start), u32::from(r.end), r))
            .collect();
        rows.sort_by_key(|(s, _, _)| *s);
        for i in 1..rows.len() {
            if rows[i].0 <= rows[i - 1].1 {
                return Err(GeoError::OverlappingRanges {
                    line: i + 1,
                    a: rows[i].2.start,
                    b: rows[i].2.end,
                });
            }
        }
        Ok(GeoDataset { rows })
    }

    pub fn from_csv_reader(reader: impl std::io::Read) -> Result<GeoDataset, GeoError> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut ranges = Vec::new();
        for (idx, record) in csv_reader.records().enumerate() {
            let line_no = idx + 1;
            let record = record.map_err(|e| GeoError::MalformedRow {
                line: line_no,
                reason: e.to_string(),
            })?;
            let fields: Vec<&str> = record.iter().collect();
            if line_no == 1 && fields.first().map(|f| f.trim()) == Some("start_ip") {
                continue; // optional header
            }
            if fields.iter().all(|f| f.trim().is_empty()) {
                continue;
            }
            ranges.push(parse_row(line_no, &fields)?);
        }
        GeoDataset::from_ranges(ranges)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Point lookup; unknown addresses answer `"ZZ"` with no ASN.
    pub fn lookup(&self, ip: Ipv4Addr) -> GeoAsnRecord {
        let needle = u32::from(ip);
        let idx = self.rows.partition_point(|(start, _, _)| *start <= needle);
        if idx > 0 {
            let (start, end, range) = &self.rows[idx - 1];
            if needle >= *start && needle <= *end {
                return GeoAsnRecord {
                    ip,
                    country: range.country.clone(),
                    asn: range.asn,
                    as_name: range.as_name.clone(),
                    city: range.city.clone(),
                };
            }
        }
        GeoAsnRecord {
            ip,
            country: "ZZ".to_string(),
            asn: None,
            as_name: None,
            city: None,
        }
    }

    /// Serializes back to the dataset CSV schema, header included.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("start_ip,end_ip,country,asn,as_name\n");
        for (_, _, r) in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.start,
                r.end,
                r.country,
                r.asn.map(|a| a.to_string()).unwrap_or_default(),
                r.as_name.clone().unwrap_or_default()
            ));
        }
        out
    }
}

/// Loads the dataset CSV from disk.
pub fn load_geo_dataset(path: impl AsRef<Path>) -> Result<GeoDataset, GeoError> {
    let file = std::fs::File::open(path)?;
    GeoDataset::from_csv_reader(std::io::BufReader::new(file))
}
