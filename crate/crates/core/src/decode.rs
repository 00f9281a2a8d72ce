//! Deterministic multi-encoding payload decoding and normalization.
//!
//! Reconstructed streams arrive as raw bytes that may be plain text or
//! wrapped in URL escaping, Base64, or a compression format, possibly
//! layered. [`decode`] applies a fixed strategy order — UTF-8, Latin-1,
//! URL, Base64, gzip, zlib, bzip2, LZMA — re-entering from the top after
//! each successful container decode, up to a configurable number of layers.
//! A textual result is accepted only when it clears a minimum
//! printable-character ratio; payloads that decode nowhere are discarded by
//! returning `accepted = false`. Everything here is a pure function of the
//! input bytes and config, so equal inputs always produce equal outputs.
//!
//! One wrinkle the fixed order hides: wrappers can themselves pass the
//! printable test — a Base64 or URL wrapper is printable by construction,
//! and a short zlib stream may store its input verbatim. A naive
//! first-match would stop at UTF-8 or Latin-1 and return the still-encoded
//! wrapper. So whenever the bytes also parse as some container, the chain
//! defers the textual read, lets the containers unwrap, and falls back to
//! the deferred text only if no unwrapping is accepted.

use std::fmt;
use std::io::Read;

use base64::engine::general_purpose::STANDARD as BASE64_STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

/// Minimum printable-character ratio for an accepted decode.
pub const DEFAULT_PRINTABLE_THRESHOLD: f64 = 0.85;

/// Maximum container layers unwrapped before giving up.
pub const DEFAULT_MAX_DEPTH: usize = 3;

/// Decompressed output cap; anything larger is treated as undecodable.
const DECOMPRESS_CAP: u64 = 8 * 1024 * 1024;

/// Minimum decoded length for a Base64 hit, suppressing false positives on
/// short alphanumeric tokens.
const BASE64_MIN_DECODED: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeStep {
    Utf8,
    Latin1,
    Url,
    Base64,
    Gzip,
    Zlib,
    Bzip2,
    Lzma,
}

impl DecodeStep {
    pub const ALL: [DecodeStep; 8] = [
        DecodeStep::Utf8,
        DecodeStep::Latin1,
        DecodeStep::Url,
        DecodeStep::Base64,
        DecodeStep::Gzip,
        DecodeStep::Zlib,
        DecodeStep::Bzip2,
        DecodeStep::Lzma,
    ];

    /// Container steps re-enter the chain on their inner bytes.
    pub const CONTAINERS: [DecodeStep; 6] = [
        DecodeStep::Url,
        DecodeStep::Base64,
        DecodeStep::Gzip,
        DecodeStep::Zlib,
        DecodeStep::Bzip2,
        DecodeStep::Lzma,
    ];
}

impl fmt::Display for DecodeStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            DecodeStep::Utf8 => "utf8",
            DecodeStep::Latin1 => "latin1",
            DecodeStep::Url => "url",
            DecodeStep::Base64 => "base64",
            DecodeStep::Gzip => "gzip",
            DecodeStep::Zlib => "zlib",
            DecodeStep::Bzip2 => "bzip2",
            DecodeStep::Lzma => "lzma",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    /// `decode.threshold` config key.
    pub threshold: f64,
    /// `decode.max_depth` config key.
    pub max_depth: usize,
}

impl Default for DecodeConfig {
    fn default() -> DecodeConfig {
        DecodeConfig {
            threshold: DEFAULT_PRINTABLE_THRESHOLD,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Result of decoding one payload.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPayload {
    pub source_len: usize,
    pub text: String,
    pub steps: Vec<DecodeStep>,
    pub printable_ratio: f64,
    pub accepted: bool,
}

fn is_printable_char(c: char) -> bool {
    matches!(c, ' '..='~' | '\t' | '\n' | '\r')
}

/// Fraction of characters that are printable ASCII or tab/newline/carriage
/// return. Empty input yields 0.
pub fn printable_ratio(text: &str) -> f64 {
    let total = text.chars().count();
    if total == 0 {
        return 0.0;
    }
    let printable = text.chars().filter(|c| is_printable_char(*c)).count();
    printable as f64 / total as f64
}

/// Collapses whitespace runs to single spaces and trims the ends. Case and
/// punctuation are preserved; idempotent.
pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn latin1_to_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| *b as char).collect()
}

fn is_base64_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'+' || b == b'/' || b == b'='
}

/// Strict Base64 container check: canonical alphabet after ASCII-whitespace
/// stripping, length a multiple of 4, and a decoded size above the
/// short-token floor. Returns the decoded bytes on success.
fn try_base64(bytes: &[u8]) -> Option<Vec<u8>> {
    let filtered: Vec<u8> = bytes
        .iter()
        .copied()
        .filter(|b| !b.is_ascii_whitespace())
        .collect();
    if filtered.is_empty() || !filtered.len().is_multiple_of(4) {
        return None;
    }
    if !filtered.iter().all(|b| is_base64_char(*b)) {
        return None;
    }
    let decoded = BASE64_STANDARD.decode(&filtered).ok()?;
    if decoded.len() < BASE64_MIN_DECODED {
        return None;
    }
    Some(decoded)
}

/// Strict percent decoding: every `%` must introduce a two-digit hex escape
/// and at least one escape must be replaced, so plain text cannot claim the
/// URL step.
fn try_url(bytes: &[u8]) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(bytes.len());
    let mut replaced = false;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hi = hex_val(*bytes.get(i + 1)?)?;
            let lo = hex_val(*bytes.get(i + 2)?)?;
            out.push(hi << 4 | lo);
            replaced = true;
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    if replaced {
        Some(out)
    } else {
        None
    }
}

fn hex_val(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

fn read_capped(mut reader: impl Read) -> Option<Vec<u8>> {
    let mut out = Vec::new();
    let mut limited = (&mut reader).take(DECOMPRESS_CAP + 1);
    limited.read_to_end(&mut out).ok()?;
    if out.is_empty() || out.len() as u64 > DECOMPRESS_CAP {
        return None;
    }
    Some(out)
}

fn try_gzip(bytes: &[u8]) -> Option<Vec<u8>> {
    if bytes.len() < 18 || bytes[0] != 0x1f || bytes[1] != 0x8b {
        return None;
    }
    read_capped(flate2::read::GzDecoder::new(bytes))
}

fn try_zlib(bytes: &[u8]) -> Option<Vec<u8>> {
    if bytes.len() < 6 || bytes[0] & 0x0f != 8 {
        return None;
    }
    if !u16::from_be_bytes([bytes[0], bytes[1]]).is_multiple_of(31) {
        return None;
    }
    read_capped(flate2::read::ZlibDecoder::new(bytes))
}

fn try_bzip2(bytes: &[u8]) -> Option<Vec<u8>> {
    if bytes.len() < 10 || &bytes[0..3] != b"BZh" {
        return None;
    }
    read_capped(bzip2::read::BzDecoder::new(bytes))
}

fn try_lzma(bytes: &[u8]) -> Option<Vec<u8>> {
    // Legacy .lzma framing: 1 properties byte (< 225), 4 dict-size bytes,
    // 8 unpacked-size bytes.
    if bytes.len() < 14 || bytes[0] >= 225 {
        return None;
    }
    let mut out = Vec::new();
    let options = lzma_rs::decompress::Options {
        memlimit: Some(DECOMPRESS_CAP as usize),
        ..Default::default()
    };
    lzma_rs::lzma_decompress_with_options(&mut &bytes[..], &mut out, &options).ok()?;
    if out.is_empty() || out.len() as u64 > DECOMPRESS_CAP {
        return None;
    }
    Some(out)
}

fn try_container(step: DecodeStep, bytes: &[u8], threshold: f64) -> Option<Vec<u8>> {
    match step {
        // Percent encoding is a text-layer transport; applying it to the
        // raw bytes of a compressed stream would garble them, so the input
        // must itself read as text first.
        DecodeStep::Url => match std::str::from_utf8(bytes) {
            Ok(s) if printable_ratio(s) >= threshold => try_url(bytes),
            _ => None,
        },
        DecodeStep::Base64 => try_base64(bytes),
        DecodeStep::Gzip => try_gzip(bytes),
        DecodeStep::Zlib => try_zlib(bytes),
        DecodeStep::Bzip2 => try_bzip2(bytes),
        DecodeStep::Lzma => try_lzma(bytes),
        DecodeStep::Utf8 | DecodeStep::Latin1 => None,
    }
}

fn decode_inner(
    bytes: &[u8],
    depth: usize,
    cfg: &DecodeConfig,
) -> Option<(String, Vec<DecodeStep>)> {
    // Terminal candidate, in order: UTF-8, then Latin-1.
    let mut terminal: Option<(String, DecodeStep)> = None;
    if let Ok(s) = std::str::from_utf8(bytes) {
        if printable_ratio(s) >= cfg.threshold {
            terminal = Some((s.to_string(), DecodeStep::Utf8));
        }
    }
    if terminal.is_none() {
        let s = latin1_to_string(bytes);
        if printable_ratio(&s) >= cfg.threshold {
            terminal = Some((s, DecodeStep::Latin1));
        }
    }

    // Containers that structurally apply, in order. Past max_depth no
    // further unwrapping is attempted.
    let unwrapped: Vec<(DecodeStep, Vec<u8>)> = if depth < cfg.max_depth {
        DecodeStep::CONTAINERS
            .into_iter()
            .filter_map(|step| try_container(step, bytes, cfg.threshold).map(|inner| (step, inner)))
            .collect()
    } else {
        Vec::new()
    };

    // A textual read wins outright only when nothing unwraps.
    if unwrapped.is_empty() {
        return terminal.map(|(text, step)| (text, vec![step]));
    }
    for (step, inner) in unwrapped {
        if let Some((text, mut steps)) = decode_inner(&inner, depth + 1, cfg) {
            steps.insert(0, step);
            return Some((text, steps));
        }
    }
    // Every unwrapping dead-ended: fall back to the deferred text.
    terminal.map(|(text, step)| (text, vec![step]))
}

/// Decodes one payload per the fixed strategy chain.
///
/// Failure is a value (`accepted = false`, empty text), matching a pipeline
/// that simply discards payloads it cannot read.
pub fn decode(payload: &[u8], config: &DecodeConfig) -> DecodedPayload {
    match decode_inner(payload, 0, config) {
        Some((text, steps)) => {
            let ratio = printable_ratio(&text);
            DecodedPayload {
                source_len: payload.len(),
                text,
                steps,
                printable_ratio: ratio,
                accepted: true,
            }
        }
        None => DecodedPayload {
            source_len: payload.len(),
            text: String::new(),
            steps: Vec::new(),
            printable_ratio: 0.0,
            accepted: false,
        },
    }
}

/// Forward transform for one step; the inverse of what [`decode`] undoes.
/// Used to build fixtures and wrapped simulator payloads.
pub fn encode_step(step: DecodeStep, input: &[u8]) -> Vec<u8> {
    match step {
        DecodeStep::Utf8 => input.to_vec(),
        DecodeStep::Latin1 => match std::str::from_utf8(input) {
            Ok(s) => s
                .chars()
                .map(|c| if (c as u32) <= 0xff { c as u8 } else { b'?' })
                .collect(),
            Err(_) => input.to_vec(),
        },
        DecodeStep::Url => {
            let mut out = Vec::with_capacity(input.len() * 3);
            for b in input {
                if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~') {
                    out.push(*b);
                } else {
                    out.push(b'%');
                    out.extend_from_slice(format!("{b:02X}").as_bytes());
                }
            }
            out
        }
        DecodeStep::Base64 => BASE64_STANDARD.encode(input).into_bytes(),
        DecodeStep::Gzip => {
            let mut enc =
                flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
            std::io::Write::write_all(&mut enc, input).expect("gzip write");
            enc.finish().expect("gzip finish")
        }
        DecodeStep::Zlib => {
            let mut enc =
                flate2::write::ZlibEncoder::new(Vec::new(), flate2::Compression::default());
            std::io::Write::write_all(&mut enc, input).expect("zlib write");
            enc.finish().expect("zlib finish")
        }
        DecodeStep::Bzip2 => {
            let mut enc =
                bzip2::write::BzEncoder::new(Vec::new(), bzip2::Compression::default());
            std::io::Write::write_all(&mut enc, input).expect("bzip2 write");
            enc.finish().expect("bzip2 finish")
        }
        DecodeStep::Lzma => {
            let mut out = Vec::new();
            lzma_rs::lzma_compress(&mut &input[..], &mut out).expect("lzma compress");
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::SplitMix64;

    #[test]
    fn printable_ratio_examples() {
        assert_eq!(printable_ratio("hello"), 1.0);
        assert_eq!(printable_ratio("\0\0\0\0\0"), 0.0);
        assert_eq!(printable_ratio("ab\0cd"), 0.8);
        assert_eq!(printable_ratio(""), 0.0);
    }

    #[test]
    fn plain_text_accepts_via_utf8() {
        let d = decode(b"plain text", &DecodeConfig::default());
        assert!(d.accepted);
        assert_eq!(d.text, "plain text");
        assert_eq!(d.steps, vec![DecodeStep::Utf8]);
        assert_eq!(d.source_len, 10);
    }

    #[test]
    fn base64_of_gzip_unwraps_fully() {
        let inner = b"attack tooling fetch stage two";
        let wrapped = encode_step(
            DecodeStep::Base64,
            &encode_step(DecodeStep::Gzip, inner),
        );
        let d = decode(&wrapped, &DecodeConfig::default());
        assert!(d.accepted);
        assert_eq!(d.text.as_bytes(), inner);
        assert_eq!(
            d.steps,
            vec![DecodeStep::Base64, DecodeStep::Gzip, DecodeStep::Utf8]
        );
    }

    #[test]
    fn random_bytes_fail_every_strategy() {
        let mut rng = SplitMix64::new(0xbadc0de);
        let bytes: Vec<u8> = (0..64).map(|_| rng.next_range(0, 256) as u8).collect();
        let cfg = DecodeConfig::default();

        // Independent per-strategy oracle: each decoder must fail on its own.
        assert!(std::str::from_utf8(&bytes)
            .map(|s| printable_ratio(s) < cfg.threshold)
            .unwrap_or(true));
        assert!(printable_ratio(&latin1_to_string(&bytes)) < cfg.threshold);
        for step in DecodeStep::CONTAINERS {
            assert!(
                try_container(step, &bytes, cfg.threshold).is_none(),
                "{step} unexpectedly decoded"
            );
        }

        let d = decode(&bytes, &cfg);
        assert!(!d.accepted);
        assert!(d.text.is_empty());
        assert!(d.steps.is_empty());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("a   b\n c"), "a b c");
        assert_eq!(normalize(""), "");
        let already = "a b c";
        assert_eq!(normalize(already), already);
        assert_eq!(normalize(&normalize("  x \t y\r\n")), normalize("  x \t y\r\n"));
    }

    #[test]
    fn url_decode_requires_an_escape() {
        assert!(try_url(b"plain text, no escapes").is_none());
        assert_eq!(try_url(b"a%20b").unwrap(), b"a b");
        // Invalid escape anywhere fails the whole attempt.
        assert!(try_url(b"a%20b%zz").is_none());
    }

    #[test]
    fn base64_rejects_short_and_noncanonical() {
        assert!(try_base64(b"YWJj").is_none()); // decodes to 3 bytes, below floor
        assert!(try_base64(b"not base64 at all!").is_none());
        assert!(try_base64(b"YWJjZGVmZ2hpamts").is_some());
    }

    #[test]
    fn deferred_text_falls_back_when_unwrapping_dead_ends() {
        // Strips to canonical Base64 shape, but the decoded bytes are noise,
        // so the original text must still be accepted.
        let text = b"abcd efgh ijkl";
        let d = decode(text, &DecodeConfig::default());
        assert!(d.accepted);
        assert_eq!(d.text.as_bytes(), text);
        assert_eq!(d.steps, vec![DecodeStep::Utf8]);
    }

    #[test]
    fn url_wrapped_text_is_unwrapped_not_taken_verbatim() {
        let inner = b"GET /probe HTTP/1.1";
        let wrapped = encode_step(DecodeStep::Url, inner);
        let d = decode(&wrapped, &DecodeConfig::default());
        assert!(d.accepted);
        assert_eq!(d.text.as_bytes(), inner);
        assert_eq!(d.steps, vec![DecodeStep::Url, DecodeStep::Utf8]);
    }

    #[test]
    fn depth_bound_holds() {
        let cfg = DecodeConfig::default();
        let inner = b"payload body with spaces";
        // Four container layers exceed max_depth=3, so the innermost text is
        // unreachable; whatever the result, the step chain stays bounded.
        let mut wrapped = inner.to_vec();
        for _ in 0..4 {
            wrapped = encode_step(DecodeStep::Base64, &wrapped);
        }
        let d = decode(&wrapped, &cfg);
        assert!(d.steps.len() <= cfg.max_depth + 1);

        let three = encode_step(
            DecodeStep::Base64,
            &encode_step(
                DecodeStep::Gzip,
                &encode_step(DecodeStep::Zlib, inner),
            ),
        );
        let d3 = decode(&three, &cfg);
        assert!(d3.accepted);
        assert_eq!(d3.text.as_bytes(), inner);
        assert_eq!(d3.steps.len(), 4);
    }

    #[test]
    fn latin1_accepts_mostly_ascii_high_byte_text() {
        let mut bytes = b"mots accentu".to_vec();
        bytes.push(0xe9); // invalid UTF-8 continuation, fine in Latin-1
        bytes.extend_from_slice(b"s et du texte ordinaire pour le ratio");
        let d = decode(&bytes, &DecodeConfig::default());
        assert!(d.accepted);
        assert_eq!(d.steps, vec![DecodeStep::Latin1]);
    }

    #[test]
    fn decode_is_deterministic_over_random_payloads() {
        let cfg = DecodeConfig::default();
        let mut rng = SplitMix64::new(42);
        for _ in 0..10_000 {
            let len = rng.next_range(0, 120) as usize;
            let bytes: Vec<u8> = (0..len).map(|_| rng.next_range(0, 256) as u8).collect();
            let a = decode(&bytes, &cfg);
            let b = decode(&bytes, &cfg);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_step_round_trips() {
        let cfg = DecodeConfig::default();
        let text = "POST /x HTTP/1.1 {body: value, n: 3}";
        for step in DecodeStep::ALL {
            let encoded = encode_step(step, text.as_bytes());
            let d = decode(&encoded, &cfg);
            assert!(d.accepted, "step {step} failed to round trip");
            assert_eq!(normalize(&d.text), normalize(text), "step {step}");
        }
    }
}
