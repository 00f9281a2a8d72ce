//! Conjunctive exploit signature and backend endpoint extraction.
//!
//! A decoded payload is classified as a React2Shell (CVE-2025-55182)
//! exploitation attempt only when three indicators hold at once:
//!
//! 1. a literal `__proto__` reference (prototype-chain traversal),
//! 2. chained `constructor` access — `constructor` separated from a second
//!    `constructor` by `:` or `.` with optional quotes/whitespace,
//! 3. a React Flight reference token `$<digits>:`.
//!
//! Each indicator alone is unremarkable: legitimate Flight frames carry
//! reference tokens, and generic prototype-pollution strings carry the
//! first two. The conjunction is what isolates the exploitation pathway.
//! These definitions are the artifact's ground truth and are documented in
//! the README.

use std::net::Ipv4Addr;

use once_cell::sync::Lazy;
use regex::Regex;
use sha2::{Digest, Sha256};

use crate::decode::{normalize, DecodedPayload};
use crate::reassembly::{ConnectionKey, ReassembledConnection};

/// Indicator 1: explicit prototype traversal.
pub const PROTO_INDICATOR: &str = "__proto__";

/// Indicator 2: chained constructor access.
pub static CTOR_CHAIN_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r#"constructor["']?\s*[:.]\s*["']?constructor"#).expect("ctor regex")
});

/// Indicator 3: React Flight reference token.
pub static FLIGHT_REF_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\$[0-9]+:").expect("flight regex"));

static URL_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"https?://([A-Za-z0-9][A-Za-z0-9.\-]*)(?::([0-9]{1,5}))?").expect("url regex")
});

static QUAD_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"\b[0-9]{1,3}\.[0-9]{1,3}\.[0-9]{1,3}\.[0-9]{1,3}\b").expect("quad regex")
});

/// Per-indicator match result over one normalized payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureMatch {
    pub has_proto: bool,
    pub has_ctor_chain: bool,
    pub has_flight_ref: bool,
    pub is_exploit: bool,
    /// First match span of each present indicator, (byte offset, length).
    pub matched_spans: Vec<(usize, usize)>,
}

/// Matching is case-sensitive throughout: the exploited identifiers are
/// case-sensitive in the target runtime.
pub fn match_signature(text: &str) -> SignatureMatch {
    let mut spans = Vec::new();

    let proto = text.find(PROTO_INDICATOR);
    if let Some(off) = proto {
        spans.push((off, PROTO_INDICATOR.len()));
    }
    let ctor = CTOR_CHAIN_RE.find(text);
    if let Some(m) = ctor {
        spans.push((m.start(), m.len()));
    }
    let flight = FLIGHT_REF_RE.find(text);
    if let Some(m) = flight {
        spans.push((m.start(), m.len()));
    }

    let has_proto = proto.is_some();
    let has_ctor_chain = ctor.is_some();
    let has_flight_ref = flight.is_some();
    SignatureMatch {
        has_proto,
        has_ctor_chain,
        has_flight_ref,
        is_exploit: has_proto && has_ctor_chain && has_flight_ref,
        matched_spans: spans,
    }
}

/// Backend endpoints embedded in an exploit payload.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BackendScan {
    /// De-duplicated (address, optional port) in first-occurrence order.
    pub endpoints: Vec<(Ipv4Addr, Option<u16>)>,
    /// URLs whose host was a domain name; counted, never returned as
    /// endpoints.
    pub domain_count: usize,
}

fn parse_quad(s: &str) -> Option<Ipv4Addr> {
    let mut octets = [0u8; 4];
    for (i, part) in s.split('.').enumerate() {
        if i >= 4 {
            return None;
        }
        // Reject leading zeros so "010" cannot sneak past as 10.
        if part.len() > 1 && part.starts_with('0') {
            return None;
        }
        octets[i] = part.parse::<u16>().ok().filter(|v| *v <= 255)? as u8;
    }
    Some(Ipv4Addr::from(octets))
}

/// Scans decoded text for `http(s)://host[:port]` URLs and bare dotted-quad
/// literals. Invalid quads (octet > 255) are ignored entirely.
pub fn extract_backends(text: &str) -> BackendScan {
    let mut scan = BackendScan::default();
    let mut seen = std::collections::HashSet::new();
    let mut url_spans: Vec<(usize, usize)> = Vec::new();
    let mut hits: Vec<(usize, Ipv4Addr, Option<u16>)> = Vec::new();

    for caps in URL_RE.captures_iter(text) {
        let whole = caps.get(0).expect("whole match");
        url_spans.push((whole.start(), whole.end()));
        let host = caps.get(1).expect("host").as_str();
        match parse_quad(host) {
            Some(ip) => {
                let port = caps
                    .get(2)
                    .and_then(|p| p.as_str().parse::<u32>().ok())
                    .filter(|p| *p <= 65_535)
                    .map(|p| p as u16);
                hits.push((whole.start(), ip, port));
            }
            None => {
                if host.chars().any(|c| c.is_ascii_alphabetic()) {
                    scan.domain_count += 1;
                }
            }
        }
    }

    for m in QUAD_RE.find_iter(text) {
        let inside_url = url_spans
            .iter()
            .any(|(s, e)| m.start() >= *s && m.end() <= *e);
        if inside_url {
            continue;
        }
        if let Some(ip) = parse_quad(m.as_str()) {
            hits.push((m.start(), ip, None));
        }
    }

    hits.sort_by_key(|(off, _, _)| *off);
    for (_, ip, port) in hits {
        if seen.insert((ip, port)) {
            scan.endpoints.push((ip, port));
        }
    }
    scan
}

fn is_private_or_reserved(ip: Ipv4Addr) -> bool {
    let o = ip.octets();
    ip.is_private()
        || ip.is_loopback()
        || ip.is_link_local()
        || ip.is_multicast()
        || ip.is_broadcast()
        || ip.is_documentation()
        || ip.is_unspecified()
        || o[0] == 0
        || (o[0] == 100 && o[1] & 0xc0 == 64) // shared 100.64/10
        || (o[0] == 192 && o[1] == 0 && o[2] == 0) // 192.0.0.0/24
        || (o[0] == 198 && o[1] & 0xfe == 18) // benchmarking 198.18/15
        || o[0] >= 240 // reserved 240/4
}

/// One detected exploitation attempt at connection granularity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExploitEvent {
    pub key: ConnectionKey,
    pub ts_us: u64,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub dst_port: u16,
    pub vantage_id: String,
    pub sig: SignatureMatch,
    pub backend_endpoints: Vec<(Ipv4Addr, Option<u16>)>,
    pub domain_count: usize,
    /// SHA-256 of the normalized decoded text, hex-encoded.
    pub payload_digest: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ClassifyOptions {
    /// Permits private/reserved backend addresses in stored events;
    /// simulation mode turns this on.
    pub allow_private_backends: bool,
}

/// Classifies one reassembled connection given its decoded client stream.
///
/// The signature runs on the client-to-telescope direction only; the
/// telescope never emits application data, so the server stream is empty by
/// construction. Returns an event only for full three-indicator matches.
pub fn classify_connection(
    conn: &ReassembledConnection,
    decoded: &DecodedPayload,
    vantage_id: &str,
    opts: ClassifyOptions,
) -> Option<ExploitEvent> {
    if !decoded.accepted {
        return None;
    }
    let text = normalize(&decoded.text);
    let sig = match_signature(&text);
    if !sig.is_exploit {
        return None;
    }
    let scan = extract_backends(&text);
    let backend_endpoints: Vec<(Ipv4Addr, Option<u16>)> = scan
        .endpoints
        .into_iter()
        .filter(|(ip, _)| opts.allow_private_backends || !is_private_or_reserved(*ip))
        .collect();
    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    Some(ExploitEvent {
        key: conn.key,
        ts_us: conn.first_ts_us,
        src_ip: conn.client.0,
        dst_ip: conn.server.0,
        dst_port: conn.server.1,
        vantage_id: vantage_id.to_string(),
        sig,
        backend_endpoints,
        domain_count: scan.domain_count,
        payload_digest: digest,
    })
}
