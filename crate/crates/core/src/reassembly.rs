//! Connection grouping and byte-stream reconstruction.
//!
//! Packets are grouped into logical bidirectional connections by canonical
//! 4-tuple plus a session epoch, exact retransmissions are dropped by
//! (direction, seq, ack, payload-length) tracking, and per-direction
//! payloads are stitched back into contiguous application-layer streams.
//! Assembly reads only IP/TCP header fields and payload bytes; nothing here
//! inspects payload content.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::net::Ipv4Addr;

use crate::packet::PacketRecord;

/// Default gap separating two sessions that reuse a 4-tuple.
pub const DEFAULT_SESSION_GAP_S: f64 = 60.0;

pub type Endpoint = (Ipv4Addr, u16);

/// Canonical bidirectional connection identity.
///
/// Both directions of a 4-tuple map to the same key; `epoch` separates
/// temporally distinct reuses of the tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConnectionKey {
    pub endpoint_lo: Endpoint,
    pub endpoint_hi: Endpoint,
    pub epoch: u32,
}

impl ConnectionKey {
    /// Stable textual form used by the event store.
    pub fn canonical_string(&self) -> String {
        format!(
            "{}:{}-{}:{}#{}",
            self.endpoint_lo.0, self.endpoint_lo.1, self.endpoint_hi.0, self.endpoint_hi.1, self.epoch
        )
    }
}

fn canonical_pair(pkt: &PacketRecord) -> (Endpoint, Endpoint) {
    let a = (pkt.src_ip, pkt.src_port);
    let b = (pkt.dst_ip, pkt.dst_port);
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Assigns connection keys to a time-ordered packet stream.
///
/// A gap longer than the session gap since the tuple's last packet starts a
/// new epoch. The gap is measured from the last packet of the previous
/// session, not its first.
#[derive(Debug)]
pub struct ConnectionTracker {
    gap_us: u64,
    last_seen: HashMap<(Endpoint, Endpoint), (u64, u32)>,
}

impl ConnectionTracker {
    pub fn new(session_gap_s: f64) -> ConnectionTracker {
        ConnectionTracker {
            gap_us: (session_gap_s * 1_000_000.0).round() as u64,
            last_seen: HashMap::new(),
        }
    }

    pub fn key_of(&mut self, pkt: &PacketRecord) -> ConnectionKey {
        let pair = canonical_pair(pkt);
        let epoch = match self.last_seen.get_mut(&pair) {
            Some((last_ts, epoch)) => {
                if pkt.ts_us.saturating_sub(*last_ts) > self.gap_us {
                    *epoch += 1;
                }
                *last_ts = pkt.ts_us;
                *epoch
            }
            None => {
                self.last_seen.insert(pair, (pkt.ts_us, 0));
                0
            }
        };
        ConnectionKey {
            endpoint_lo: pair.0,
            endpoint_hi: pair.1,
            epoch,
        }
    }
}

/// Buckets a time-ordered record stream into per-connection packet lists.
///
/// Connections are returned in order of first appearance, which keeps
/// downstream processing deterministic.
pub fn group_by_connection(
    records: impl IntoIterator<Item = PacketRecord>,
    session_gap_s: f64,
) -> Vec<(ConnectionKey, Vec<PacketRecord>)> {
    let mut tracker = ConnectionTracker::new(session_gap_s);
    let mut order: Vec<ConnectionKey> = Vec::new();
    let mut buckets: HashMap<ConnectionKey, Vec<PacketRecord>> = HashMap::new();
    for rec in records {
        let key = tracker.key_of(&rec);
        buckets
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(rec);
    }
    order
        .into_iter()
        .map(|k| {
            let pkts = buckets.remove(&k).expect("bucket exists");
            (k, pkts)
        })
        .collect()
}

fn direction_of(pkt: &PacketRecord, client: Endpoint) -> bool {
    (pkt.src_ip, pkt.src_port) == client
}

/// Drops exact retransmissions, keeping the first packet seen for each
/// (direction, seq, ack, payload-length) combination. Returns the number
/// dropped. All packets must belong to one connection.
pub fn dedup(pkts: &mut Vec<PacketRecord>) -> u64 {
    let mut seen: HashSet<(Endpoint, u32, u32, usize)> = HashSet::new();
    let before = pkts.len();
    pkts.retain(|p| {
        seen.insert(((p.src_ip, p.src_port), p.seq, p.ack, p.payload.len()))
    });
    (before - pkts.len()) as u64
}

/// One reconstructed bidirectional connection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReassembledConnection {
    pub key: ConnectionKey,
    pub client: Endpoint,
    pub server: Endpoint,
    pub client_stream: Vec<u8>,
    pub server_stream: Vec<u8>,
    pub first_ts_us: u64,
    pub last_ts_us: u64,
    pub packet_count: u64,
    pub dedup_dropped: u64,
    /// False when the connection was captured mid-stream (no SYN observed).
    pub has_syn: bool,
}

impl ReassembledConnection {
    /// Flags the condition where no packet carried payload in either
    /// direction; such connections are recorded, not discarded.
    pub fn is_payload_empty(&self) -> bool {
        self.client_stream.is_empty() && self.server_stream.is_empty()
    }
}

/// Reconstructs one direction's byte stream.
///
/// Offsets are relative sequence numbers in a signed 2^31 window around the
/// first segment seen, which keeps 32-bit wraparound within a connection
/// well-defined. Overlapping ranges keep first-arrival bytes; holes are
/// elided so the output is the present bytes in offset order.
fn assemble_direction(pkts: &[&PacketRecord]) -> Vec<u8> {
    let mut claimed: BTreeMap<i64, u8> = BTreeMap::new();
    let mut ref_seq: Option<u32> = None;
    for pkt in pkts {
        if pkt.payload.is_empty() {
            continue;
        }
        let base = *ref_seq.get_or_insert(pkt.seq);
        let off = pkt.seq.wrapping_sub(base) as i32 as i64;
        for (i, byte) in pkt.payload.iter().enumerate() {
            claimed.entry(off + i as i64).or_insert(*byte);
        }
    }
    claimed.into_values().collect()
}

/// Assembles a deduplicated, single-connection packet list into streams.
///
/// The client is the sender of the first SYN, or of the earliest packet when
/// no SYN was captured. The result is independent of input arrival order
/// whenever overlapping segments agree on the overlapped bytes, which holds
/// for retransmission-dominant telescope traffic.
pub fn assemble(
    key: ConnectionKey,
    pkts: &[PacketRecord],
    dedup_dropped: u64,
) -> ReassembledConnection {
    let syn_sender = pkts
        .iter()
        .filter(|p| p.flags.is_syn() && !p.flags.is_ack())
        .min_by_key(|p| p.ts_us)
        .map(|p| (p.src_ip, p.src_port));
    let earliest = pkts
        .iter()
        .min_by_key(|p| p.ts_us)
        .map(|p| (p.src_ip, p.src_port));
    let client = syn_sender.or(earliest).unwrap_or(key.endpoint_lo);
    let server = if client == key.endpoint_lo {
        key.endpoint_hi
    } else {
        key.endpoint_lo
    };

    let client_pkts: Vec<&PacketRecord> =
        pkts.iter().filter(|p| direction_of(p, client)).collect();
    let server_pkts: Vec<&PacketRecord> =
        pkts.iter().filter(|p| !direction_of(p, client)).collect();

    ReassembledConnection {
        key,
        client,
        server,
        client_stream: assemble_direction(&client_pkts),
        server_stream: assemble_direction(&server_pkts),
        first_ts_us: pkts.iter().map(|p| p.ts_us).min().unwrap_or(0),
        last_ts_us: pkts.iter().map(|p| p.ts_us).max().unwrap_or(0),
        packet_count: pkts.len() as u64,
        dedup_dropped,
        has_syn: syn_sender.is_some(),
    }
}

/// Dedup + assemble in one step.
pub fn build_connection(key: ConnectionKey, mut pkts: Vec<PacketRecord>) -> ReassembledConnection {
    let dropped = dedup(&mut pkts);
    assemble(key, &pkts, dropped)
}
