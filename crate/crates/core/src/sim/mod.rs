//! Synthetic scanning-campaign generator.
//!
//! Campaigns are declared as data ([`CampaignSpec`]): vantage points with
//! their telescope configs, address pools, clock skew and outage windows,
//! plus per-scanner behavior (activity window, rate, coverage, ports,
//! payload kind, backend). [`generate`] turns a spec into rotation-
//! partitioned capture files, a geo dataset covering every address the
//! campaign uses, and a [`GroundTruth`] connection log derived purely from
//! the schedule by counting — no generator code path consults the decoder
//! or the signature engine, so the labels stay an independent oracle for
//! the pipeline.
//!
//! Everything is seeded: the same spec produces byte-identical output.

pub mod capture;
pub mod demo;
pub mod payload;
pub mod rng;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoDataset, GeoRange};
use crate::packet::{rotate, PacketRecord, ResponderState, TcpFlags, TelescopeConfig};
use crate::sim::capture::{arp_noise_frame, serialize_capture, udp_noise_frame, CaptureEntry};
use crate::sim::payload::{benign_payload, exploit_payload, PayloadKind};
use crate::sim::rng::{derive_seed, SplitMix64};
use crate::store::partition_date_of;

/// Default probability that a delivered data segment is retransmitted.
pub const DEFAULT_RETRANSMIT_RATE: f64 = 0.05;

fn default_retransmit_rate() -> f64 {
    DEFAULT_RETRANSMIT_RATE
}

/// One vantage point in a campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VantageSpec {
    pub config: TelescopeConfig,
    /// Explicit list of monitored addresses receiving traffic; kept as a
    /// list rather than CIDR arithmetic so pools like a 124-address /25 cut
    /// are expressible.
    pub pool: Vec<Ipv4Addr>,
    #[serde(default)]
    pub clock_skew_s: f64,
    /// Inclusive date ranges during which this vantage captured nothing.
    #[serde(default)]
    pub outage: Vec<(NaiveDate, NaiveDate)>,
    /// Non-TCP background frames injected per active day.
    #[serde(default)]
    pub noise_frames_per_day: u32,
}

/// One scanning source.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScannerSpec {
    pub src_ip: Ipv4Addr,
    pub country: String,
    pub asn: u32,
    /// Inclusive 1-based day window within the campaign.
    pub active_window: (u32, u32),
    /// Connections per day per vantage.
    pub rate: u32,
    pub dst_ports: Vec<u16>,
    /// Fraction of each vantage pool this scanner targets, in (0, 1].
    pub coverage: f64,
    pub payload_kind: PayloadKind,
    pub backend: Option<(Ipv4Addr, u16)>,
}

/// Geo attribution for non-scanner addresses (backend servers).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServerGeoEntry {
    pub ip: Ipv4Addr,
    pub country: String,
    pub asn: u32,
}

/// Declarative campaign description; the seed fully determines all
/// generated traffic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub seed: u64,
    pub start_date: NaiveDate,
    pub duration_days: u32,
    pub vantages: Vec<VantageSpec>,
    pub scanners: Vec<ScannerSpec>,
    #[serde(default)]
    pub server_geo: Vec<ServerGeoEntry>,
    /// Probability that a data segment gets a duplicate; retransmissions
    /// exercise dedup but never change the ground truth.
    #[serde(default = "default_retransmit_rate")]
    pub retransmit_rate: f64,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid campaign spec, field {field}: {reason}")]
    SpecInvalid { field: String, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("spec file: {0}")]
    Toml(String),
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |field: &str, reason: String| SimError::SpecInvalid {
            field: field.to_string(),
            reason,
        };
        if self.duration_days == 0 {
            return Err(invalid("duration_days", "must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.retransmit_rate) {
            return Err(invalid(
                "retransmit_rate",
                format!("{} not in [0, 1]", self.retransmit_rate),
            ));
        }
        if self.vantages.is_empty() {
            return Err(invalid("vantages", "need at least one vantage".into()));
        }
        for v in &self.vantages {
            if v.pool.is_empty() {
                return Err(invalid("vantages.pool", format!("{} has an empty pool", v.config.vantage_id)));
            }
            v.config
                .validate()
                .map_err(|e| invalid("vantages.config", e.to_string()))?;
            if let Some(ip) = v.pool.iter().find(|ip| !v.config.monitors(**ip)) {
                return Err(invalid(
                    "vantages.pool",
                    format!("{ip} is outside {}'s monitored prefixes", v.config.vantage_id),
                ));
            }
        }
        let mut seen_scanner = BTreeMap::new();
        for (i, s) in self.scanners.iter().enumerate() {
            let field = |name: &str| format!("scanners[{i}].{name}");
            if !(s.coverage > 0.0 && s.coverage <= 1.0) {
                return Err(invalid(&field("coverage"), format!("{} not in (0, 1]", s.coverage)));
            }
            if s.rate == 0 {
                return Err(invalid(&field("rate"), "must be positive".into()));
            }
            if s.rate > 60_000 {
                return Err(invalid(&field("rate"), "above the per-day source-port budget".into()));
            }
            if s.dst_ports.is_empty() {
                return Err(invalid(&field("dst_ports"), "need at least one port".into()));
            }
            if s.active_window.0 == 0
                || s.active_window.0 > s.active_window.1
                || s.active_window.1 > self.duration_days
            {
                return Err(invalid(
                    &field("active_window"),
                    format!("{:?} outside 1..={}", s.active_window, self.duration_days),
                ));
            }
            if s.country.len() != 2 || !s.country.chars().all(|c| c.is_ascii_uppercase()) {
                return Err(invalid(&field("country"), "must be two uppercase letters".into()));
            }
            if !s.payload_kind.is_exploit() && s.backend.is_some() {
                return Err(invalid(&field("backend"), "backend set on a benign scanner".into()));
            }
            if let Some((prev_country, prev_asn)) = seen_scanner.insert(s.src_ip, (s.country.clone(), s.asn)) {
                if prev_country != s.country || prev_asn != s.asn {
                    return Err(invalid(
                        &field("src_ip"),
                        format!("{} reused with conflicting geo attribution", s.src_ip),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String, SimError> {
        toml::to_string_pretty(self).map_err(|e| SimError::Toml(e.to_string()))
    }

    pub fn from_toml_str(s: &str) -> Result<CampaignSpec, SimError> {
        let spec: CampaignSpec = toml::from_str(s).map_err(|e| SimError::Toml(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CampaignSpec, SimError> {
        CampaignSpec::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn date_of_day(&self, day: u32) -> NaiveDate {
        self.start_date + Days::new((day - 1) as u64)
    }

    /// Geo dataset covering every scanner and backend address, one
    /// single-address range per entry.
    pub fn geo_dataset(&self) -> GeoDataset {
        let mut by_ip: BTreeMap<Ipv4Addr, (String, u32)> = BTreeMap::new();
        for s in &self.scanners {
            by_ip.insert(s.src_ip, (s.country.clone(), s.asn));
        }
        for e in &self.server_geo {
            by_ip.insert(e.ip, (e.country.clone(), e.asn));
        }
        let ranges = by_ip
            .into_iter()
            .map(|(ip, (country, asn))| GeoRange {
                start: ip,
                end: ip,
                country,
                asn: Some(asn),
                as_name: Some(format!("SIM-AS{asn}")),
                city: None,
            })
            .collect();
        GeoDataset::from_ranges(ranges).expect("single-address ranges cannot overlap")
    }
}

/// One scheduled connection, the unit of ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtConnection {
    pub vantage_id: String,
    /// UTC date of the connection's first packet, skew applied.
    pub date: NaiveDate,
    /// Timestamp of the connection's first packet, skew applied.
    pub start_ts_us: u64,
    pub src_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_ip: Ipv4Addr,
    pub dst_port: u16,
    pub payload_kind: PayloadKind,
    pub exploit: bool,
    pub backend: Option<(Ipv4Addr, u16)>,
    pub scanner_country: String,
    pub scanner_asn: u32,
}

/// Per-connection labels plus counting helpers, all derived from the
/// schedule alone.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    pub connections: Vec<GtConnection>,
}

/// Comparable exploit-event identity used for exact pipeline fidelity
/// checks: (vantage, source, destination, port, first timestamp, backends).
pub type EventLabel = (String, Ipv4Addr, Ipv4Addr, u16, u64, Vec<(Ipv4Addr, u16)>);

impl GroundTruth {
    pub fn exploit_connections(&self) -> impl Iterator<Item = &GtConnection> {
        self.connections.iter().filter(|c| c.exploit)
    }

    /// Sorted multiset of expected exploit events.
    pub fn exploit_event_multiset(&self) -> Vec<EventLabel> {
        let mut labels: Vec<EventLabel> = self
            .exploit_connections()
            .map(|c| {
                (
                    c.vantage_id.clone(),
                    c.src_ip,
                    c.dst_ip,
                    c.dst_port,
                    c.start_ts_us,
                    c.backend.into_iter().collect(),
                )
            })
            .collect();
        labels.sort();
        labels
    }

    /// Expected exploit events per date for one vantage.
    pub fn expected_daily(&self, vantage: &str) -> BTreeMap<NaiveDate, u64> {
        let mut out = BTreeMap::new();
        for c in self.exploit_connections().filter(|c| c.vantage_id == vantage) {
            *out.entry(c.date).or_insert(0) += 1;
        }
        out
    }

    /// Store-wide distinct exploit source IPs and ASNs.
    pub fn expected_unique_counts(&self) -> (u64, u64) {
        let ips: std::collections::BTreeSet<_> =
            self.exploit_connections().map(|c| c.src_ip).collect();
        let asns: std::collections::BTreeSet<_> =
            self.exploit_connections().map(|c| c.scanner_asn).collect();
        (ips.len() as u64, asns.len() as u64)
    }

    /// Distinct destinations per scanner at one vantage.
    pub fn expected_coverage(
        &self,
        vantage: &str,
    ) -> BTreeMap<Ipv4Addr, std::collections::BTreeSet<Ipv4Addr>> {
        let mut out: BTreeMap<Ipv4Addr, std::collections::BTreeSet<Ipv4Addr>> = BTreeMap::new();
        for c in self.exploit_connections().filter(|c| c.vantage_id == vantage) {
            out.entry(c.src_ip).or_default().insert(c.dst_ip);
        }
        out
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<(), SimError> {
        let mut out = String::new();
        for c in &self.connections {
            out.push_str(&serde_json::to_string(c).expect("gt row serializes"));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<GroundTruth, SimError> {
        let text = std::fs::read_to_string(path)?;
        let mut connections = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            connections.push(serde_json::from_str(line).map_err(|e| SimError::Toml(e.to_string()))?);
        }
        Ok(GroundTruth { connections })
    }
}

fn apply_skew(ts_us: u64, skew_us: i64) -> u64 {
    (ts_us as i64 + skew_us).max(1) as u64
}

/// Builds the packet exchange for one connection: handshake, 1–3 data
/// segments with seeded reordering and retransmission injection, FIN, plus
/// the responder's replies. Returned packets are in arrival order.
#[allow(clippy::too_many_arguments)]
fn build_connection_packets(
    conn_seed: u64,
    src_ip: Ipv4Addr,
    src_port: u16,
    dst_ip: Ipv4Addr,
    dst_port: u16,
    payload: &[u8],
    config: &TelescopeConfig,
    t0: u64,
    retransmit_rate: f64,
) -> Vec<PacketRecord> {
    let mut rng = SplitMix64::new(conn_seed);
    let client_isn = rng.next_u64() as u32;
    let responder_isn = rng.next_u64() as u32;
    let mut responder = ResponderState::new(responder_isn, config.byte_cap);

    let mk = |ts_us: u64, flags: TcpFlags, seq: u32, ack: u32, payload: Vec<u8>| PacketRecord {
        ts_us,
        src_ip,
        dst_ip,
        src_port,
        dst_port,
        flags,
        seq,
        ack,
        payload,
        capture_id: config.vantage_id.clone(),
    };

    // Client-side plan.
    let mut client = Vec::new();
    client.push(mk(t0, TcpFlags::SYN, client_isn, 0, Vec::new()));
    client.push(mk(
        t0 + 800,
        TcpFlags::ACK,
        client_isn.wrapping_add(1),
        responder_isn.wrapping_add(1),
        Vec::new(),
    ));

    let seg_count = (1 + rng.next_range(0, 3) as usize).min(payload.len().max(1));
    let mut cuts: Vec<usize> = (0..seg_count - 1)
        .map(|_| rng.next_range(1, payload.len().max(2) as u64) as usize)
        .collect();
    cuts.push(0);
    cuts.push(payload.len());
    cuts.sort_unstable();
    cuts.dedup();
    let mut segments: Vec<(usize, &[u8])> = cuts
        .windows(2)
        .map(|w| (w[0], &payload[w[0]..w[1]]))
        .filter(|(_, s)| !s.is_empty())
        .collect();
    rng.shuffle(&mut segments); // seeded arrival reordering

    let mut arrival_ts = t0 + 1_600;
    for (off, bytes) in &segments {
        let seq = client_isn.wrapping_add(1).wrapping_add(*off as u32);
        let pkt = mk(
            arrival_ts,
            TcpFlags::PSH.union(TcpFlags::ACK),
            seq,
            responder_isn.wrapping_add(1),
            bytes.to_vec(),
        );
        if rng.next_bool(retransmit_rate) {
            let mut dup = pkt.clone();
            dup.ts_us = arrival_ts + 450;
            client.push(pkt);
            client.push(dup);
        } else {
            client.push(pkt);
        }
        arrival_ts += 900;
    }
    client.push(mk(
        arrival_ts + 900,
        TcpFlags::FIN.union(TcpFlags::ACK),
        client_isn.wrapping_add(1).wrapping_add(payload.len() as u32),
        responder_isn.wrapping_add(1),
        Vec::new(),
    ));

    // Interleave responder replies in arrival order.
    let mut all = Vec::with_capacity(client.len() * 2);
    for pkt in client {
        let replies = responder.respond(&pkt, config);
        let trigger_ts = pkt.ts_us;
        all.push(pkt);
        for mut reply in replies {
            reply.ts_us = trigger_ts + 300;
            all.push(reply);
        }
    }
    all
}

/// In-memory capture for one vantage.
#[derive(Debug, Clone)]
pub struct VantageCapture {
    pub vantage_id: String,
    /// Skewed, timestamp-sorted TCP records.
    pub records: Vec<PacketRecord>,
    /// Skewed non-TCP noise frames.
    pub noise: Vec<(u64, Vec<u8>)>,
}

/// Runs the schedule without touching the filesystem.
pub fn generate_in_memory(
    spec: &CampaignSpec,
) -> Result<(Vec<VantageCapture>, GroundTruth), SimError> {
    spec.validate()?;
    let mut truth = GroundTruth::default();
    let mut captures = Vec::new();

    for (vi, vantage) in spec.vantages.iter().enumerate() {
        let skew_us = (vantage.clock_skew_s * 1_000_000.0).round() as i64;
        let mut records: Vec<PacketRecord> = Vec::new();

        for (si, scanner) in spec.scanners.iter().enumerate() {
            // Destination and port rotations persist across the scanner's
            // lifetime at this vantage, so low-rate full-coverage scanners
            // still reach the whole pool eventually.
            let subset_size = ((scanner.coverage * vantage.pool.len() as f64).ceil() as usize)
                .clamp(1, vantage.pool.len());
            let mut pool_order: Vec<usize> = (0..vantage.pool.len()).collect();
            SplitMix64::new(derive_seed(spec.seed, &[1, si as u64, vi as u64]))
                .shuffle(&mut pool_order);
            pool_order.truncate(subset_size);
            let mut ports = scanner.dst_ports.clone();
            SplitMix64::new(derive_seed(spec.seed, &[6, si as u64, vi as u64]))
                .shuffle(&mut ports);
            let mut dst_pos = 0usize;
            let mut port_pos = 0usize;

            let last_day = scanner.active_window.1.min(spec.duration_days);
            for day in scanner.active_window.0..=last_day {
                let date = spec.date_of_day(day);
                if vantage.outage.iter().any(|(a, b)| date >= *a && date <= *b) {
                    continue;
                }
                let mut day_rng = SplitMix64::new(derive_seed(
                    spec.seed,
                    &[2, si as u64, vi as u64, day as u64],
                ));
                let day_start_us = date.and_hms_opt(0, 0, 0).expect("midnight").and_utc()
                    .timestamp_micros() as u64;
                let mut offsets: Vec<u64> = (0..scanner.rate)
                    .map(|_| day_rng.next_range(0, 85_800_000_000))
                    .collect();
                offsets.sort_unstable();

                for (j, offset) in offsets.iter().enumerate() {
                    let t0 = day_start_us + offset;
                    let dst_ip = vantage.pool[pool_order[dst_pos % pool_order.len()]];
                    dst_pos += 1;
                    let dst_port = ports[port_pos % ports.len()];
                    port_pos += 1;
                    let src_port = 1024 + j as u16;
                    let conn_seed = derive_seed(
                        spec.seed,
                        &[3, si as u64, vi as u64, day as u64, j as u64],
                    );
                    let payload = if scanner.payload_kind.is_exploit() {
                        exploit_payload(scanner.payload_kind, scanner.backend, conn_seed)
                    } else {
                        benign_payload(scanner.payload_kind, conn_seed)
                    };
                    records.extend(build_connection_packets(
                        conn_seed,
                        scanner.src_ip,
                        src_port,
                        dst_ip,
                        dst_port,
                        &payload,
                        &vantage.config,
                        t0,
                        spec.retransmit_rate,
                    ));
                    let start_skewed = apply_skew(t0, skew_us);
                    truth.connections.push(GtConnection {
                        vantage_id: vantage.config.vantage_id.clone(),
                        date: partition_date_of(start_skewed),
                        start_ts_us: start_skewed,
                        src_ip: scanner.src_ip,
                        src_port,
                        dst_ip,
                        dst_port,
                        payload_kind: scanner.payload_kind,
                        exploit: scanner.payload_kind.is_exploit(),
                        backend: scanner.backend,
                        scanner_country: scanner.country.clone(),
                        scanner_asn: scanner.asn,
                    });
                }
            }
        }

        for record in &mut records {
            record.ts_us = apply_skew(record.ts_us, skew_us);
        }
        records.sort_by_key(|r| r.ts_us);

        // Background noise shares timestamps with existing records so every
        // frame lands inside some rotation batch.
        let mut noise = Vec::new();
        if vantage.noise_frames_per_day > 0 && !records.is_empty() {
            let mut by_date: BTreeMap<NaiveDate, Vec<u64>> = BTreeMap::new();
            for r in &records {
                by_date.entry(partition_date_of(r.ts_us)).or_default().push(r.ts_us);
            }
            for (di, (_, stamps)) in by_date.iter().enumerate() {
                let mut noise_rng =
                    SplitMix64::new(derive_seed(spec.seed, &[5, vi as u64, di as u64]));
                for k in 0..vantage.noise_frames_per_day {
                    let ts = stamps[noise_rng.next_range(0, stamps.len() as u64) as usize];
                    let src = Ipv4Addr::from(0xc633_6400u32 + noise_rng.next_range(1, 250) as u32);
                    let frame = if k % 2 == 0 {
                        arp_noise_frame(src, vantage.pool[0])
                    } else {
                        udp_noise_frame(src, vantage.pool[0], b"scan?")
                    };
                    noise.push((ts, frame));
                }
            }
            noise.sort_by_key(|(ts, _)| *ts);
        }

        captures.push(VantageCapture {
            vantage_id: vantage.config.vantage_id.clone(),
            records,
            noise,
        });
    }
    Ok((captures, truth))
}

/// Everything `generate` wrote.
#[derive(Debug, Clone)]
pub struct GenerateOutput {
    pub ground_truth: GroundTruth,
    pub capture_files: Vec<PathBuf>,
    pub geo_path: PathBuf,
    pub truth_path: PathBuf,
    pub spec_path: PathBuf,
}

/// Generates capture files, the geo dataset, the ground-truth log, and a
/// copy of the spec under `out_dir`.
pub fn generate(spec: &CampaignSpec, out_dir: impl AsRef<Path>) -> Result<GenerateOutput, SimError> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let (captures, truth) = generate_in_memory(spec)?;

    let mut capture_files = Vec::new();
    for (vi, cap) in captures.iter().enumerate() {
        let vantage = &spec.vantages[vi];
        let dir = out_dir.join(&cap.vantage_id);
        std::fs::create_dir_all(&dir)?;
        if cap.records.is_empty() {
            continue;
        }
        let origin = cap.records[0].ts_us;
        let interval = vantage.config.rotation_interval_us().max(1);
        let batches = rotate(cap.records.clone(), &vantage.config, 0)
            .expect("records sorted before rotation");
        for (bi, batch) in batches.iter().enumerate() {
            let batch_idx = (batch[0].ts_us - origin) / interval;
            let mut entries: Vec<CaptureEntry> =
                batch.iter().cloned().map(CaptureEntry::Tcp).collect();
            for (ts, frame) in &cap.noise {
                if (*ts - origin) / interval == batch_idx {
                    entries.push(CaptureEntry::Raw {
                        ts_us: *ts,
                        frame: frame.clone(),
                    });
                }
            }
            entries.sort_by_key(|e| e.ts_us());
            let path = dir.join(format!("rot-{bi:06}.pcap"));
            let mut file = std::fs::File::create(&path)?;
            file.write_all(&serialize_capture(&entries))?;
            capture_files.push(path);
        }
    }

    let geo_path = out_dir.join("geo.csv");
    std::fs::write(&geo_path, spec.geo_dataset().to_csv_string())?;
    let truth_path = out_dir.join("ground_truth.jsonl");
    truth.save_jsonl(&truth_path)?;
    let spec_path = out_dir.join("campaign.toml");
    std::fs::write(&spec_path, spec.to_toml_string()?)?;

    Ok(GenerateOutput {
        ground_truth: truth,
        capture_files,
        geo_path,
        truth_path,
        spec_path,
    })
}
