//! Classic capture-file writer and Ethernet/IPv4/TCP frame construction.
//!
//! The writer is the inverse of [`crate::packet::parse_capture_file`]:
//! `parse(serialize(records))` reproduces the records byte-exactly. Frames
//! carry real IP and TCP checksums so external tooling reads the files
//! cleanly. Non-TCP noise frames (ARP and UDP) can be interleaved to model
//! background radiation.

use std::net::Ipv4Addr;

use crate::packet::PacketRecord;

const SNAPLEN: u32 = 65_535;

/// One entry destined for a capture file.
#[derive(Debug, Clone)]
pub enum CaptureEntry {
    Tcp(PacketRecord),
    /// Pre-built non-TCP frame with its own timestamp.
    Raw { ts_us: u64, frame: Vec<u8> },
}

impl CaptureEntry {
    pub fn ts_us(&self) -> u64 {
        match self {
            CaptureEntry::Tcp(r) => r.ts_us,
            CaptureEntry::Raw { ts_us, .. } => *ts_us,
        }
    }
}

fn push_u16_be(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_be_bytes());
}

fn push_u32_le(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// Locally administered MAC derived from an address, keeping frames
/// deterministic without a real interface.
fn mac_for(ip: Ipv4Addr) -> [u8; 6] {
    let o = ip.octets();
    [0x02, 0x42, o[0], o[1], o[2], o[3]]
}

fn ones_complement_sum(data: &[u8], mut sum: u32) -> u32 {
    let mut chunks = data.chunks_exact(2);
    for c in &mut chunks {
        sum += u16::from_be_bytes([c[0], c[1]]) as u32;
    }
    if let [last] = chunks.remainder() {
        sum += (*last as u32) << 8;
    }
    while sum >> 16 != 0 {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    sum
}

fn checksum(data: &[u8], initial: u32) -> u16 {
    !(ones_complement_sum(data, initial) as u16)
}

/// Builds the full Ethernet/IPv4/TCP frame for one record.
pub fn tcp_frame_bytes(rec: &PacketRecord) -> Vec<u8> {
    let tcp_len = 20 + rec.payload.len();
    let ip_total = 20 + tcp_len;
    let mut frame = Vec::with_capacity(14 + ip_total);

    frame.extend_from_slice(&mac_for(rec.dst_ip));
    frame.extend_from_slice(&mac_for(rec.src_ip));
    push_u16_be(&mut frame, 0x0800);

    // IPv4 header.
    let ip_start = frame.len();
    frame.push(0x45);
    frame.push(0);
    push_u16_be(&mut frame, ip_total as u16);
    push_u16_be(&mut frame, (rec.seq & 0xffff) as u16); // identification
    push_u16_be(&mut frame, 0x4000); // don't fragment
    frame.push(64); // ttl
    frame.push(6); // tcp
    push_u16_be(&mut frame, 0); // checksum placeholder
    frame.extend_from_slice(&rec.src_ip.octets());
    frame.extend_from_slice(&rec.dst_ip.octets());
    let ip_csum = checksum(&frame[ip_start..ip_start + 20], 0);
    frame[ip_start + 10..ip_start + 12].copy_from_slice(&ip_csum.to_be_bytes());

    // TCP header.
    let tcp_start = frame.len();
    push_u16_be(&mut frame, rec.src_port);
    push_u16_be(&mut frame, rec.dst_port);
    frame.extend_from_slice(&rec.seq.to_be_bytes());
    frame.extend_from_slice(&rec.ack.to_be_bytes());
    frame.push(5 << 4); // data offset 5 words, no options
    frame.push(rec.flags.to_wire());
    push_u16_be(&mut frame, 64_240); // window
    push_u16_be(&mut frame, 0); // checksum placeholder
    push_u16_be(&mut frame, 0); // urgent
    frame.extend_from_slice(&rec.payload);

    // TCP checksum over pseudo-header + segment.
    let mut pseudo = Vec::with_capacity(12);
    pseudo.extend_from_slice(&rec.src_ip.octets());
    pseudo.extend_from_slice(&rec.dst_ip.octets());
    pseudo.push(0);
    pseudo.push(6);
    push_u16_be(&mut pseudo, tcp_len as u16);
    let partial = ones_complement_sum(&pseudo, 0);
    let tcp_csum = checksum(&frame[tcp_start..], partial);
    frame[tcp_start + 16..tcp_start + 18].copy_from_slice(&tcp_csum.to_be_bytes());

    frame
}

/// ARP who-has frame; skipped by the TCP parser at the ethertype check.
pub fn arp_noise_frame(sender: Ipv4Addr, target: Ipv4Addr) -> Vec<u8> {
    let mut frame = Vec::with_capacity(42);
    frame.extend_from_slice(&[0xff; 6]);
    frame.extend_from_slice(&mac_for(sender));
    push_u16_be(&mut frame, 0x0806);
    push_u16_be(&mut frame, 1); // ethernet
    push_u16_be(&mut frame, 0x0800);
    frame.push(6);
    frame.push(4);
    push_u16_be(&mut frame, 1); // request
    frame.extend_from_slice(&mac_for(sender));
    frame.extend_from_slice(&sender.octets());
    frame.extend_from_slice(&[0u8; 6]);
    frame.extend_from_slice(&target.octets());
    frame
}

/// Minimal UDP datagram frame; skipped at the IP protocol check.
pub fn udp_noise_frame(src: Ipv4Addr, dst: Ipv4Addr, payload: &[u8]) -> Vec<u8> {
    let udp_len = 8 + payload.len();
    let ip_total = 20 + udp_len;
    let mut frame = Vec::with_capacity(14 + ip_total);
    frame.extend_from_slice(&mac_for(dst));
    frame.extend_from_slice(&mac_for(src));
    push_u16_be(&mut frame, 0x0800);
    let ip_start = frame.len();
    frame.push(0x45);
    frame.push(0);
    push_u16_be(&mut frame, ip_total as u16);
    push_u16_be(&mut frame, 0x7711);
    push_u16_be(&mut frame, 0x4000);
    frame.push(64);
    frame.push(17); // udp
    push_u16_be(&mut frame, 0);
    frame.extend_from_slice(&src.octets());
    frame.extend_from_slice(&dst.octets());
    let ip_csum = checksum(&frame[ip_start..ip_start + 20], 0);
    frame[ip_start + 10..ip_start + 12].copy_from_slice(&ip_csum.to_be_bytes());
    push_u16_be(&mut frame, 53_000);
    push_u16_be(&mut frame, 123);
    push_u16_be(&mut frame, udp_len as u16);
    push_u16_be(&mut frame, 0); // udp checksum optional
    frame.extend_from_slice(payload);
    frame
}

/// Serializes entries into one classic capture file (microsecond magic,
/// version 2.4, Ethernet link type). Entries must be in timestamp order.
pub fn serialize_capture(entries: &[CaptureEntry]) -> Vec<u8> {
    let mut out = Vec::new();
    push_u32_le(&mut out, 0xa1b2_c3d4);
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    push_u32_le(&mut out, 0); // thiszone
    push_u32_le(&mut out, 0); // sigfigs
    push_u32_le(&mut out, SNAPLEN);
    push_u32_le(&mut out, 1); // linktype ethernet

    for entry in entries {
        let frame = match entry {
            CaptureEntry::Tcp(rec) => tcp_frame_bytes(rec),
            CaptureEntry::Raw { frame, .. } => frame.clone(),
        };
        let ts = entry.ts_us();
        push_u32_le(&mut out, (ts / 1_000_000) as u32);
        push_u32_le(&mut out, (ts % 1_000_000) as u32);
        push_u32_le(&mut out, frame.len() as u32);
        push_u32_le(&mut out, frame.len() as u32);
        out.extend_from_slice(&frame);
    }
    out
}
