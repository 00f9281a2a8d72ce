//! Built-in demonstration campaign.
//!
//! One month of synthetic scanning over two vantage points, sized to the
//! headline shape of the December 2025 React2Shell campaign: 735 exploit
//! scanner addresses across 239 autonomous systems, a Netherlands-heavy
//! source mix near 37.1% of exploit events, backend endpoints resolving to
//! the Netherlands for about 62.6% of occurrences with Tunisia the second
//! server country, one single-address Bulgarian scanner with outsized rate
//! and no resolvable backend, a pair of full-coverage scanners, a VP2
//! outage on 10–12 December, and one high-port-diversity anomaly scanner
//! active 23–27 December. Rates are desk-scale; counts are not.

use std::net::Ipv4Addr;

use chrono::NaiveDate;

use super::payload::PayloadKind;
use super::rng::{derive_seed, SplitMix64};
use super::{CampaignSpec, ScannerSpec, ServerGeoEntry, VantageSpec};
use crate::packet::TelescopeConfig;

pub const DEMO_SEED: u64 = 0x2025_1205;
pub const DEMO_VP1: &str = "vp1";
pub const DEMO_VP2: &str = "vp2";
pub const DEMO_VP1_POOL_SIZE: u64 = 511;
pub const DEMO_VP2_POOL_SIZE: u64 = 124;

/// Standard web-facing target ports used by the bulk of the campaign.
pub const STD_PORTS: [u16; 6] = [80, 443, 3000, 3001, 3002, 8080];

/// Windows the temporal correlation analysis excludes: the VP2 outage and
/// the anomaly scanner's active days.
pub fn demo_exclusion_windows() -> Vec<(NaiveDate, NaiveDate)> {
    vec![
        (date(2025, 12, 10), date(2025, 12, 12)),
        (date(2025, 12, 23), date(2025, 12, 27)),
    ]
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

fn scanner_ip(global_idx: u32) -> Ipv4Addr {
    // 45.64.0.0/16 carved into distinct per-scanner addresses.
    Ipv4Addr::from(0x2d40_0000u32 + global_idx * 13 + 7)
}

fn benign_ip(idx: u32) -> Ipv4Addr {
    Ipv4Addr::from(0x67c8_0000u32 + idx * 11 + 5) // 103.200.0.0/16
}

struct AsnAllocator {
    next: u32,
}

impl AsnAllocator {
    fn take(&mut self, n: u32) -> Vec<u32> {
        let pool = (self.next..self.next + n).collect();
        self.next += n;
        pool
    }
}

struct BackendPool {
    country: &'static str,
    asn: u32,
    ips: Vec<Ipv4Addr>,
}

fn backend_port(i: usize) -> u16 {
    [80u16, 8080, 443][i % 3]
}

fn exploit_kind(i: usize) -> PayloadKind {
    PayloadKind::EXPLOIT_KINDS[i % 3]
}

/// The default demonstration campaign. Fully deterministic; equal output on
/// every call.
pub fn demo_spec() -> CampaignSpec {
    let start_date = date(2025, 12, 1);

    // Vantage pools: 511 addresses inside a /23, 124 inside a /25.
    let vp1_pool: Vec<Ipv4Addr> = (1u32..=511)
        .map(|i| Ipv4Addr::from(u32::from(Ipv4Addr::new(100, 80, 0, 0)) + i))
        .collect();
    let vp2_pool: Vec<Ipv4Addr> = (1u32..=124)
        .map(|i| Ipv4Addr::from(u32::from(Ipv4Addr::new(100, 90, 16, 0)) + i))
        .collect();

    let mut vp1_config = TelescopeConfig::new(DEMO_VP1, vec!["100.80.0.0/23".parse().unwrap()])
        .expect("vp1 config");
    vp1_config.rotation_interval_s = 86_400.0;
    let mut vp2_config = TelescopeConfig::new(DEMO_VP2, vec!["100.90.16.0/25".parse().unwrap()])
        .expect("vp2 config");
    vp2_config.rotation_interval_s = 86_400.0;

    let vantages = vec![
        VantageSpec {
            config: vp1_config,
            pool: vp1_pool,
            clock_skew_s: 0.0,
            outage: Vec::new(),
            noise_frames_per_day: 2,
        },
        VantageSpec {
            config: vp2_config,
            pool: vp2_pool,
            clock_skew_s: 0.4,
            outage: vec![(date(2025, 12, 10), date(2025, 12, 12))],
            noise_frames_per_day: 1,
        },
    ];

    // Backend server inventory. Unique addresses per hosting country; the
    // per-scanner assignment below shapes both the server-country shares
    // and the per-pair unique-IP structure.
    let mut server_asn = AsnAllocator { next: 63_001 };
    let backend = |country: &'static str, asn: &mut AsnAllocator, ips: &[&str]| BackendPool {
        country,
        asn: asn.take(1)[0],
        ips: ips.iter().map(|s| s.parse().expect("backend ip")).collect(),
    };
    let nl_srv = backend("NL", &mut server_asn, &[
        "185.76.12.1", "185.76.12.2", "185.76.12.3", "185.76.12.4", "185.76.12.5", "185.76.12.6",
    ]);
    let de_srv = backend("DE", &mut server_asn, &["193.108.40.1", "193.108.40.2", "193.108.40.3"]);
    let hk_srv = backend("HK", &mut server_asn, &["103.10.60.1"]);
    let lt_srv = backend("LT", &mut server_asn, &["88.119.160.1"]);
    let us_srv = backend("US", &mut server_asn, &[
        "64.52.80.1", "64.52.80.2", "64.52.80.3", "64.52.80.4", "64.52.80.5",
    ]);
    let tn_srv = backend("TN", &mut server_asn, &["41.231.77.7"]);
    let lv_srv = backend("LV", &mut server_asn, &["87.110.20.1"]);
    let pl_srv = backend("PL", &mut server_asn, &["91.200.30.1"]);
    let ru_srv = backend("RU", &mut server_asn, &["185.174.100.1"]);
    let bd_srv = backend("BD", &mut server_asn, &["103.120.50.1"]);
    let my_srv = backend("MY", &mut server_asn, &["175.136.90.1", "175.136.90.2", "175.136.90.3"]);
    let ir_srv = backend("IR", &mut server_asn, &["5.160.10.1"]);

    let mut scanner_asn = AsnAllocator { next: 64_512 };
    let nl_asns = scanner_asn.take(40);
    let us_asns = scanner_asn.take(45);
    let pl_asns = scanner_asn.take(20);
    let bg_asns = scanner_asn.take(1);
    let de_asns = scanner_asn.take(30);
    let fr_asns = scanner_asn.take(20);
    let gb_asns = scanner_asn.take(18);
    let in_asns = scanner_asn.take(15);
    let ch_asns = scanner_asn.take(8);
    let ru_asns = scanner_asn.take(8);
    let tail_defs: [(&str, u32); 7] = [
        ("BR", 5),
        ("CN", 5),
        ("JP", 5),
        ("KR", 5),
        ("UA", 5),
        ("ES", 5),
        ("IT", 4),
    ];

    let mut scanners: Vec<ScannerSpec> = Vec::new();
    let mut global_idx = 0u32;
    let std_ports: Vec<u16> = STD_PORTS.to_vec();

    let mut push = |scanners: &mut Vec<ScannerSpec>,
                    country: &str,
                    asn: u32,
                    window: (u32, u32),
                    rate: u32,
                    ports: Vec<u16>,
                    coverage: f64,
                    kind: PayloadKind,
                    backend: Option<(Ipv4Addr, u16)>| {
        scanners.push(ScannerSpec {
            src_ip: scanner_ip(global_idx),
            country: country.to_string(),
            asn,
            active_window: window,
            rate,
            dst_ports: ports,
            coverage,
            payload_kind: kind,
            backend,
        });
        global_idx += 1;
    };

    let cov = |i: usize| 0.02 + (i % 12) as f64 * 0.028;

    // Netherlands: one dominant full-coverage scanner plus a broad standard
    // population; a handful point at non-NL backends to give the coupling
    // matrix off-diagonal structure.
    push(
        &mut scanners,
        "NL",
        nl_asns[0],
        (5, 31),
        24,
        std_ports.clone(),
        1.0,
        PayloadKind::ExploitPlain,
        Some((nl_srv.ips[0], 80)),
    );
    for i in 1..170usize {
        let start = 5 + ((i * 7) % 15) as u32;
        let b = match i {
            1..=3 => (de_srv.ips[i - 1], backend_port(i)),
            4 => (hk_srv.ips[0], 80),
            5 => (lt_srv.ips[0], 8080),
            6 => (us_srv.ips[0], 80),
            _ => (nl_srv.ips[i % 6], backend_port(i)),
        };
        push(
            &mut scanners,
            "NL",
            nl_asns[i % nl_asns.len()],
            (start, start + 11),
            2,
            std_ports.clone(),
            cov(i),
            exploit_kind(i),
            Some(b),
        );
    }

    // United States: a full-coverage scanner, the late-month anomaly with
    // high port diversity, a Tunisia-heavy backend slice, an NL slice, and
    // a domestic slice.
    push(
        &mut scanners,
        "US",
        us_asns[0],
        (5, 31),
        24,
        std_ports.clone(),
        1.0,
        PayloadKind::ExploitGzipBase64,
        Some((tn_srv.ips[0], 80)),
    );
    let anomaly_ports: Vec<u16> = {
        let mut all: Vec<u16> = (7000..8000).collect();
        SplitMix64::new(derive_seed(DEMO_SEED, &[9, 9])).shuffle(&mut all);
        all.truncate(300);
        all
    };
    push(
        &mut scanners,
        "US",
        us_asns[1],
        (23, 27),
        70,
        anomaly_ports,
        0.3,
        PayloadKind::ExploitPlain,
        Some((nl_srv.ips[1], 8080)),
    );
    for i in 2..150usize {
        let start = 5 + ((i * 11) % 17) as u32;
        let b = if i < 52 {
            (tn_srv.ips[0], backend_port(i))
        } else if i < 109 {
            (nl_srv.ips[2 + i % 2], backend_port(i))
        } else {
            (us_srv.ips[i % 5], backend_port(i))
        };
        push(
            &mut scanners,
            "US",
            us_asns[i % us_asns.len()],
            (start, start + 9),
            1,
            std_ports.clone(),
            cov(i),
            exploit_kind(i),
            Some(b),
        );
    }

    // Poland.
    for i in 0..90usize {
        let start = 5 + ((i * 7) % 15) as u32;
        let b = if i < 60 {
            (nl_srv.ips[4 + i % 2], backend_port(i))
        } else if i < 68 {
            (de_srv.ips[i % 2], backend_port(i))
        } else if i < 74 {
            (lv_srv.ips[0], 80)
        } else if i < 80 {
            (pl_srv.ips[0], 8080)
        } else if i < 85 {
            (ru_srv.ips[0], 80)
        } else {
            (us_srv.ips[2 + i % 2], backend_port(i))
        };
        push(
            &mut scanners,
            "PL",
            pl_asns[i % pl_asns.len()],
            (start, start + 11),
            1,
            std_ports.clone(),
            cov(i),
            exploit_kind(i),
            Some(b),
        );
    }

    // Bulgaria: a single source with outsized volume and no resolvable
    // backend in its payloads.
    push(
        &mut scanners,
        "BG",
        bg_asns[0],
        (5, 31),
        31,
        std_ports.clone(),
        0.6,
        PayloadKind::ExploitBase64,
        None,
    );

    // Germany.
    for i in 0..85usize {
        let start = 5 + ((i * 7) % 15) as u32;
        let b = if i < 55 {
            (nl_srv.ips[(i % 2) * 2], backend_port(i))
        } else if i < 63 {
            (bd_srv.ips[0], 80)
        } else if i < 71 {
            (de_srv.ips[1], backend_port(i))
        } else if i < 78 {
            (ru_srv.ips[0], 8080)
        } else {
            (us_srv.ips[4], backend_port(i))
        };
        push(
            &mut scanners,
            "DE",
            de_asns[i % de_asns.len()],
            (start, start + 11),
            1,
            std_ports.clone(),
            cov(i),
            exploit_kind(i),
            Some(b),
        );
    }

    // France -> Malaysia, United Kingdom -> Iran, India -> United States.
    for i in 0..60usize {
        let start = 5 + ((i * 3) % 16) as u32;
        push(
            &mut scanners,
            "FR",
            fr_asns[i % fr_asns.len()],
            (start, start + 10),
            1,
            std_ports.clone(),
            cov(i),
            exploit_kind(i),
            Some((my_srv.ips[i % 3], backend_port(i))),
        );
    }
    for i in 0..50usize {
        let start = 5 + ((i * 3) % 16) as u32;
        push(
            &mut scanners,
            "GB",
            gb_asns[i % gb_asns.len()],
            (start, start + 10),
            1,
            std_ports.clone(),
            cov(i),
            exploit_kind(i),
            Some((ir_srv.ips[0], backend_port(i))),
        );
    }
    for i in 0..45usize {
        let start = 5 + ((i * 11) % 17) as u32;
        push(
            &mut scanners,
            "IN",
            in_asns[i % in_asns.len()],
            (start, start + 9),
            1,
            std_ports.clone(),
            cov(i),
            exploit_kind(i),
            Some((us_srv.ips[0], backend_port(i))),
        );
    }

    // Switzerland and Russia: prominent scanners, no resolvable backends.
    for i in 0..25usize {
        let start = 5 + ((i * 5) % 19) as u32;
        push(
            &mut scanners,
            "CH",
            ch_asns[i % ch_asns.len()],
            (start, start + 7),
            1,
            std_ports.clone(),
            cov(i),
            exploit_kind(i),
            None,
        );
    }
    for i in 0..24usize {
        let start = 5 + ((i * 5) % 19) as u32;
        push(
            &mut scanners,
            "RU",
            ru_asns[i % ru_asns.len()],
            (start, start + 7),
            1,
            std_ports.clone(),
            cov(i),
            exploit_kind(i),
            None,
        );
    }

    // Long tail of low-volume countries, NL-hosted backends.
    for (country, asn_count) in tail_defs {
        let asns = scanner_asn.take(asn_count);
        for i in 0..5usize {
            let start = 5 + ((i * 3) % 21) as u32;
            push(
                &mut scanners,
                country,
                asns[i % asns.len()],
                (start, start + 5),
                1,
                std_ports.clone(),
                cov(i),
                exploit_kind(i),
                Some((nl_srv.ips[i % 6], backend_port(i))),
            );
        }
    }

    // Benign traffic: legitimate Flight frames, plain HTTP probes, and
    // generic pollution strings. None of these may ever reach the store.
    for k in 0..12u32 {
        let kind = PayloadKind::BENIGN_KINDS[(k % 3) as usize];
        let country = ["US", "CN", "BR", "NL"][(k % 4) as usize];
        scanners.push(ScannerSpec {
            src_ip: benign_ip(k),
            country: country.to_string(),
            asn: 65_000 + k,
            active_window: (6 + k, 15 + k),
            rate: 2,
            dst_ports: std_ports.clone(),
            coverage: 0.03,
            payload_kind: kind,
            backend: None,
        });
    }

    let server_geo = [
        &nl_srv, &de_srv, &hk_srv, &lt_srv, &us_srv, &tn_srv, &lv_srv, &pl_srv, &ru_srv,
        &bd_srv, &my_srv, &ir_srv,
    ]
    .iter()
    .flat_map(|pool| {
        pool.ips.iter().map(|ip| ServerGeoEntry {
            ip: *ip,
            country: pool.country.to_string(),
            asn: pool.asn,
        })
    })
    .collect();

    CampaignSpec {
        seed: DEMO_SEED,
        start_date,
        duration_days: 31,
        vantages,
        scanners,
        server_geo,
        retransmit_rate: super::DEFAULT_RETRANSMIT_RATE,
    }
}

/// Sources declared with full pool coverage; the coverage analysis must
/// flag exactly these.
pub fn demo_full_coverage_sources() -> Vec<Ipv4Addr> {
    demo_spec()
        .scanners
        .iter()
        .filter(|s| s.coverage >= 1.0)
        .map(|s| s.src_ip)
        .collect()
}
