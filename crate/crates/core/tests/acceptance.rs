//! Acceptance suite.
//!
//! Eight criteria, one test each, every test printing a PASS line on the
//! way out (run with `--nocapture` to see them). The demo campaign is
//! generated and ingested once into a shared fixture; criterion 8 builds a
//! second independent chain for the byte-identity checks.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use once_cell::sync::Lazy;

use antscope_core::analytics::{
    coverage_stats, daily_series, growth_curves, pearson, port_heatmap, rank_countries, report,
    ReportOptions, Side,
};
use antscope_core::decode::{decode, encode_step, normalize, DecodeConfig, DecodeStep};
use antscope_core::geo::load_geo_dataset;
use antscope_core::packet::{PacketRecord, TcpFlags};
use antscope_core::pipeline::{expand_capture_paths, ingest_captures, PipelineConfig};
use antscope_core::reassembly::{build_connection, ConnectionTracker};
use antscope_core::signature::match_signature;
use antscope_core::sim::demo::{
    demo_exclusion_windows, demo_full_coverage_sources, demo_spec, DEMO_VP1, DEMO_VP1_POOL_SIZE,
    DEMO_VP2, DEMO_VP2_POOL_SIZE,
};
use antscope_core::sim::payload::{benign_payload, exploit_payload, PayloadKind};
use antscope_core::sim::rng::SplitMix64;
use antscope_core::sim::{generate, EventLabel, GroundTruth};
use antscope_core::store::{read_store, EventRow};

struct DemoFixture {
    _dir: tempfile::TempDir,
    sim_dir: PathBuf,
    store_dir: PathBuf,
    report_dir: PathBuf,
    truth: GroundTruth,
    rows: Vec<EventRow>,
}

fn run_demo_chain(root: &Path) -> (PathBuf, PathBuf, PathBuf, GroundTruth, Vec<EventRow>) {
    let sim_dir = root.join("sim");
    let store_dir = root.join("store");
    let report_dir = root.join("report");
    let spec = demo_spec();
    let out = generate(&spec, &sim_dir).expect("demo generation");
    let geo = load_geo_dataset(&out.geo_path).expect("geo dataset");
    let cfg = PipelineConfig::default();
    for vantage in [DEMO_VP1, DEMO_VP2] {
        let files = expand_capture_paths(&sim_dir.join(vantage)).expect("capture files");
        ingest_captures(&files, vantage, &geo, &store_dir, &cfg).expect("ingest");
    }
    let rows = read_store(&store_dir).expect("store readable");
    let opts = ReportOptions {
        top_k: 15,
        vantage_pools: vec![
            (DEMO_VP1.to_string(), DEMO_VP1_POOL_SIZE),
            (DEMO_VP2.to_string(), DEMO_VP2_POOL_SIZE),
        ],
        exclusions: demo_exclusion_windows(),
    };
    report(&store_dir, &report_dir, &opts).expect("report");
    (sim_dir, store_dir, report_dir, out.ground_truth, rows)
}

static DEMO: Lazy<DemoFixture> = Lazy::new(|| {
    let dir = tempfile::tempdir().expect("tempdir");
    let (sim_dir, store_dir, report_dir, truth, rows) = run_demo_chain(dir.path());
    DemoFixture {
        _dir: dir,
        sim_dir,
        store_dir,
        report_dir,
        truth,
        rows,
    }
});

// --- criterion 1 -----------------------------------------------------------

#[test]
fn criterion_1_detector_precision_recall_and_mutation() {
    let started = Instant::now();
    let cfg = DecodeConfig::default();

    let mut exploit_texts = Vec::new();
    for seed in 0..600u64 {
        let kind = PayloadKind::EXPLOIT_KINDS[(seed % 3) as usize];
        let backend = if seed % 5 == 0 {
            None
        } else {
            Some((
                Ipv4Addr::from(0x2e50_0000u32 + (seed as u32 % 900)),
                [80u16, 443, 8080][(seed % 3) as usize],
            ))
        };
        let bytes = exploit_payload(kind, backend, seed);
        let decoded = decode(&bytes, &cfg);
        assert!(decoded.accepted, "exploit fixture {seed} failed to decode");
        exploit_texts.push(normalize(&decoded.text));
    }
    let recall_hits = exploit_texts
        .iter()
        .filter(|t| match_signature(t).is_exploit)
        .count();
    assert_eq!(recall_hits, exploit_texts.len(), "recall must be 100%");

    let mut false_positives = 0usize;
    for seed in 0..600u64 {
        let kind = PayloadKind::BENIGN_KINDS[(seed % 3) as usize];
        let bytes = benign_payload(kind, seed);
        let decoded = decode(&bytes, &cfg);
        assert!(decoded.accepted, "benign fixture {seed} failed to decode");
        if match_signature(&normalize(&decoded.text)).is_exploit {
            false_positives += 1;
        }
    }
    assert_eq!(false_positives, 0, "false positives must be 0");

    // Mutation: deleting any single indicator substring flips the verdict.
    let mut mutations = 0usize;
    let mut flips = 0usize;
    for text in &exploit_texts {
        let m = match_signature(text);
        assert_eq!(m.matched_spans.len(), 3);
        for (off, len) in &m.matched_spans {
            let mutated = format!("{}{}", &text[..*off], &text[off + len..]);
            mutations += 1;
            if !match_signature(&mutated).is_exploit {
                flips += 1;
            }
        }
    }
    assert_eq!(flips, mutations, "every indicator deletion must flip");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "runtime {elapsed:?} over 10 s");
    println!(
        "criterion 1 PASS: recall 600/600, false positives 0/600, mutation flips {flips}/{mutations}, {elapsed:?}"
    );
}

// --- criterion 2 -----------------------------------------------------------

/// Byte-offset oracle: first writer wins, arrival order, holes elided.
fn offset_oracle(pkts: &[PacketRecord]) -> Vec<u8> {
    let payload: Vec<&PacketRecord> = pkts.iter().filter(|p| !p.payload.is_empty()).collect();
    let Some(first) = payload.first() else {
        return Vec::new();
    };
    let base = first.seq;
    let offs: Vec<i64> = payload
        .iter()
        .map(|p| p.seq.wrapping_sub(base) as i32 as i64)
        .collect();
    let min = *offs.iter().min().expect("nonempty");
    let len = payload
        .iter()
        .zip(&offs)
        .map(|(p, o)| (o - min) as usize + p.payload.len())
        .max()
        .expect("nonempty");
    let mut buf: Vec<Option<u8>> = vec![None; len];
    for (p, o) in payload.iter().zip(&offs) {
        let start = (o - min) as usize;
        for (i, b) in p.payload.iter().enumerate() {
            buf[start + i].get_or_insert(*b);
        }
    }
    buf.into_iter().flatten().collect()
}

#[test]
fn criterion_2_reassembly_matches_offset_oracle() {
    let started = Instant::now();
    for conn_idx in 0..1_000u64 {
        let mut rng = SplitMix64::new(0xacce_0002 ^ conn_idx);
        let stream_len = rng.next_range(20, 400) as usize;
        let stream: Vec<u8> = (0..stream_len).map(|_| rng.next_u64() as u8).collect();
        // Park some connections right at the 32-bit wrap boundary.
        let isn = if conn_idx % 7 == 0 {
            u32::MAX - rng.next_range(0, 64) as u32
        } else {
            rng.next_u64() as u32
        };

        let seg_count = rng.next_range(1, 21) as usize;
        let mut pkts = Vec::new();
        let mut ts = 1_000u64;
        let mut off = 0usize;
        for _ in 0..seg_count {
            if off >= stream_len {
                break;
            }
            if off > 4 && rng.next_bool(0.35) {
                off -= rng.next_range(1, (off as u64).min(12) + 1) as usize; // overlap
            }
            let len = rng.next_range(1, 60) as usize;
            let end = (off + len).min(stream_len);
            pkts.push(PacketRecord {
                ts_us: ts,
                src_ip: Ipv4Addr::new(203, 0, 113, 7),
                dst_ip: Ipv4Addr::new(100, 80, 0, 1),
                src_port: 40_000,
                dst_port: 80,
                flags: TcpFlags::PSH.union(TcpFlags::ACK),
                seq: isn.wrapping_add(off as u32),
                ack: 1,
                payload: stream[off..end].to_vec(),
                capture_id: "oracle".into(),
            });
            ts += 10;
            off = end;
        }
        // 0–30% duplicate injection.
        let dup_rate = (conn_idx % 31) as f64 / 100.0;
        let mut with_dups = pkts.clone();
        for p in &pkts {
            if rng.next_bool(dup_rate) {
                let mut d = p.clone();
                d.ts_us = ts;
                ts += 10;
                with_dups.push(d);
            }
        }
        // Full reorder.
        rng.shuffle(&mut with_dups);

        let expected = offset_oracle(&with_dups);
        let mut tracker = ConnectionTracker::new(60.0);
        let key = tracker.key_of(&with_dups[0]);
        let conn = build_connection(key, with_dups);
        assert_eq!(
            conn.client_stream, expected,
            "connection {conn_idx} diverged from the oracle"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "runtime {elapsed:?} over 30 s");
    println!("criterion 2 PASS: 1000/1000 connections oracle-identical, {elapsed:?}");
}

// --- criterion 3 -----------------------------------------------------------

fn seeded_text(rng: &mut SplitMix64) -> String {
    // Printable ASCII without '%' (its escape semantics belong to the URL
    // step alone), always containing a space.
    const CHARSET: &[u8] =
        b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 {}:,./_-!?#@'\"()=+";
    let len = rng.next_range(8, 64) as usize;
    let mut s: String = (0..len)
        .map(|_| CHARSET[rng.next_range(0, CHARSET.len() as u64) as usize] as char)
        .collect();
    s.insert(len / 2, ' ');
    s
}

#[test]
fn criterion_3_decode_round_trips() {
    let started = Instant::now();
    let cfg = DecodeConfig::default();
    let mut combos: Vec<Vec<DecodeStep>> = DecodeStep::ALL.iter().map(|s| vec![*s]).collect();
    for outer in DecodeStep::CONTAINERS {
        for inner in DecodeStep::CONTAINERS {
            combos.push(vec![outer, inner]);
        }
    }
    assert_eq!(combos.len(), 8 + 36);

    for (ci, combo) in combos.iter().enumerate() {
        let mut rng = SplitMix64::new(0xacce_0003 ^ ci as u64);
        for _ in 0..200 {
            let text = seeded_text(&mut rng);
            let mut bytes = text.clone().into_bytes();
            for step in combo.iter().rev() {
                bytes = encode_step(*step, &bytes);
            }
            let first = decode(&bytes, &cfg);
            assert!(first.accepted, "combo {combo:?} rejected {text:?}");
            assert_eq!(
                normalize(&first.text),
                normalize(&text),
                "combo {combo:?} mangled {text:?}"
            );
            let second = decode(&bytes, &cfg);
            assert_eq!(first, second, "combo {combo:?} nondeterministic");
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "runtime {elapsed:?} over 30 s");
    println!(
        "criterion 3 PASS: {} combos x 200 strings round-trip deterministically, {elapsed:?}",
        combos.len()
    );
}

// --- criterion 4 -----------------------------------------------------------

fn store_event_multiset(rows: &[EventRow]) -> Vec<EventLabel> {
    let mut labels: Vec<EventLabel> = rows
        .iter()
        .map(|r| {
            let mut backends: Vec<(Ipv4Addr, u16)> = r
                .backends
                .iter()
                .map(|b| (b.ip, b.port.unwrap_or(0)))
                .collect();
            backends.sort();
            (
                r.vantage_id.clone(),
                r.src_ip,
                r.dst_ip,
                r.dst_port,
                r.ts_us,
                backends,
            )
        })
        .collect();
    labels.sort();
    labels
}

#[test]
fn criterion_4_end_to_end_fidelity() {
    let started = Instant::now();
    let fixture = &*DEMO;
    let expected = fixture.truth.exploit_event_multiset();
    let got = store_event_multiset(&fixture.rows);
    assert_eq!(
        got.len(),
        expected.len(),
        "event count: pipeline {} vs ground truth {}",
        got.len(),
        expected.len()
    );
    assert_eq!(got, expected, "exploit-event multisets differ");
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "runtime {elapsed:?} over 5 min"
    );
    println!(
        "criterion 4 PASS: {} exploit events match ground truth exactly (zero misses, zero extras), {elapsed:?}",
        got.len()
    );
}

// --- criterion 5 -----------------------------------------------------------

#[test]
fn criterion_5_headline_statistic_replay() {
    let fixture = &*DEMO;

    let curves = growth_curves(&fixture.rows);
    let (_, final_ips, final_asns) = *curves.last().expect("nonempty curves");
    assert_eq!(final_ips, 735, "unique source IPs");
    assert_eq!(final_asns, 239, "unique source ASNs");
    for w in curves.windows(2) {
        assert!(w[1].1 >= w[0].1 && w[1].2 >= w[0].2, "growth must be monotone");
    }

    let scanner_side = rank_countries(&fixture.rows, Side::Scanner, 50);
    let nl_scanner = scanner_side
        .iter()
        .find(|(c, _)| c == "NL")
        .map(|(_, s)| *s)
        .expect("NL present");
    assert!(
        (nl_scanner - 0.371).abs() <= 0.02,
        "NL scanner share {nl_scanner}"
    );
    let server_side = rank_countries(&fixture.rows, Side::Server, 50);
    let nl_server = server_side
        .iter()
        .find(|(c, _)| c == "NL")
        .map(|(_, s)| *s)
        .expect("NL present");
    assert!(
        (nl_server - 0.626).abs() <= 0.02,
        "NL server share {nl_server}"
    );

    let full_spec: BTreeSet<Ipv4Addr> = demo_full_coverage_sources().into_iter().collect();
    for (vantage, pool) in [(DEMO_VP1, DEMO_VP1_POOL_SIZE), (DEMO_VP2, DEMO_VP2_POOL_SIZE)] {
        let stats = coverage_stats(&fixture.rows, vantage, pool).expect("coverage");
        let flagged: BTreeSet<Ipv4Addr> = stats.full_coverage.iter().copied().collect();
        assert_eq!(
            flagged, full_spec,
            "full-coverage flags at {vantage} must match the coverage-1.0 scanners"
        );
    }
    println!(
        "criterion 5 PASS: growth ends at 735 IPs / 239 ASNs, NL shares {nl_scanner:.4}/{nl_server:.4}, full-coverage flags exact"
    );
}

// --- criterion 6 -----------------------------------------------------------

/// Closed-form raw-moment Pearson, the independent route.
fn pearson_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn series_from_counts(vantage: &str, counts: &[u64]) -> antscope_core::analytics::DailySeries {
    antscope_core::analytics::DailySeries {
        vantage_id: vantage.to_string(),
        points: counts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (
                    NaiveDate::from_ymd_opt(2025, 12, 1).expect("date")
                        + chrono::Days::new(i as u64),
                    *c,
                )
            })
            .collect(),
        exclusion_windows: Vec::new(),
    }
}

#[test]
fn criterion_6_pearson_correctness() {
    // 100 seeded pairs against the closed-form oracle.
    for pair in 0..100u64 {
        let mut rng = SplitMix64::new(0xacce_0006 ^ pair);
        let n = rng.next_range(5, 40) as usize;
        let xs: Vec<u64> = (0..n).map(|_| rng.next_range(0, 5_000)).collect();
        let ys: Vec<u64> = xs
            .iter()
            .map(|x| {
                let noise = rng.next_range(0, 800) as i64 - 400;
                ((*x as i64 * 2 + noise).max(0)) as u64 + rng.next_range(0, 50)
            })
            .collect();
        let a = series_from_counts("a", &xs);
        let b = series_from_counts("b", &ys);
        let Ok(r) = pearson(&a, &b, &[]) else {
            continue; // degenerate draws are legal inputs, not failures
        };
        let xf: Vec<f64> = xs.iter().map(|v| *v as f64).collect();
        let yf: Vec<f64> = ys.iter().map(|v| *v as f64).collect();
        let oracle = pearson_oracle(&xf, &yf);
        assert!(
            (r - oracle).abs() < 1e-12,
            "pair {pair}: {r} vs oracle {oracle}"
        );
    }

    // Exact endpoints.
    let a = series_from_counts("a", &[3, 1, 4, 1, 5, 9, 2, 6]);
    assert_eq!(pearson(&a, &a, &[]).expect("r(a,a)"), 1.0);
    let neg = series_from_counts("b", &[7, 9, 6, 9, 5, 1, 8, 4]); // 10 - a
    assert_eq!(pearson(&a, &neg, &[]).expect("r(a,-a)"), -1.0);

    // Demo replay with the spec's outage and anomaly windows excluded.
    let fixture = &*DEMO;
    let s1 = daily_series(&fixture.rows, DEMO_VP1).expect("vp1 series");
    let s2 = daily_series(&fixture.rows, DEMO_VP2).expect("vp2 series");
    let exclusions = demo_exclusion_windows();
    let r = pearson(&s1, &s2, &exclusions).expect("demo pearson");

    let excluded = |d: NaiveDate| exclusions.iter().any(|(a, b)| d >= *a && d <= *b);
    let map2: BTreeMap<NaiveDate, u64> = s2.points.iter().copied().collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (d, x) in &s1.points {
        if excluded(*d) {
            continue;
        }
        if let Some(y) = map2.get(d) {
            xs.push(*x as f64);
            ys.push(*y as f64);
        }
    }
    assert!(xs.len() >= 3, "need at least 3 included paired dates");
    let oracle = pearson_oracle(&xs, &ys);
    assert!(
        (r - oracle).abs() < 1e-12,
        "demo replay: {r} vs oracle {oracle} over {} dates",
        xs.len()
    );
    // The windows have to matter: over all dates the outage zeros at VP2
    // drag the correlation down.
    let r_all = pearson(&s1, &s2, &[]).expect("unexcluded pearson");
    assert!(r_all < r, "exclusions had no effect: {r_all} vs {r}");
    println!(
        "criterion 6 PASS: 100 seeded pairs within 1e-12, exact +/-1 endpoints, demo replay r={r:.6} matches oracle over {} included dates",
        xs.len()
    );
}

// --- criterion 7 -----------------------------------------------------------

#[test]
fn criterion_7_heatmap_normalization() {
    let fixture = &*DEMO;
    let k = 15;
    let heatmap = port_heatmap(&fixture.rows, k);

    for (w, row) in heatmap.cells.iter().enumerate() {
        for cell in row {
            assert!((0.0..=1.0).contains(cell), "cell out of [0,1]");
        }
        let has_traffic = row.iter().any(|c| *c > 0.0);
        if has_traffic {
            assert!(
                row.contains(&1.0),
                "week {w} has traffic but no cell exactly 1.0"
            );
        }
    }

    // Schedule-count oracle from ground truth: same top-k selection, same
    // week binning, ratios computed independently.
    let exploit: Vec<_> = fixture.truth.exploit_connections().collect();
    let first = exploit.iter().map(|c| c.date).min().expect("events");
    let mut totals: BTreeMap<u16, u64> = BTreeMap::new();
    for c in &exploit {
        *totals.entry(c.dst_port).or_insert(0) += 1;
    }
    let mut ranked: Vec<(u16, u64)> = totals.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let gt_ports: Vec<u16> = ranked.into_iter().take(k).map(|(p, _)| p).collect();
    assert_eq!(heatmap.ports, gt_ports, "top-k port selection differs");

    let weeks = heatmap.weeks.len();
    let mut gt_counts = vec![vec![0u64; gt_ports.len()]; weeks];
    for c in &exploit {
        if let Some(col) = gt_ports.iter().position(|p| *p == c.dst_port) {
            let w = ((c.date - first).num_days() / 7) as usize;
            gt_counts[w][col] += 1;
        }
    }
    for (w, counts) in gt_counts.iter().enumerate() {
        let week_max = *counts.iter().max().expect("ports nonempty");
        for (p, count) in counts.iter().enumerate() {
            let expected = if week_max == 0 {
                0.0
            } else {
                *count as f64 / week_max as f64
            };
            assert!(
                (heatmap.cells[w][p] - expected).abs() <= 1e-12,
                "cell ({w},{p}): {} vs schedule {expected}",
                heatmap.cells[w][p]
            );
        }
    }
    println!(
        "criterion 7 PASS: {} weeks x {} ports normalized per week, cells match schedule ratios",
        weeks,
        heatmap.ports.len()
    );
}

// --- replay cross-checks beyond the numbered criteria ----------------------

#[test]
fn replay_daily_series_and_coupling_match_ground_truth() {
    let fixture = &*DEMO;

    // Per-date counts equal the schedule's, zero-fill included.
    for vantage in [DEMO_VP1, DEMO_VP2] {
        let series = daily_series(&fixture.rows, vantage).expect("series");
        let expected = fixture.truth.expected_daily(vantage);
        for (date, count) in &series.points {
            assert_eq!(
                *count,
                expected.get(date).copied().unwrap_or(0),
                "{vantage} count mismatch on {date}"
            );
        }
        assert_eq!(
            series.points.iter().map(|(_, c)| c).sum::<u64>(),
            expected.values().sum::<u64>(),
            "{vantage} totals differ"
        );
    }

    // Coverage statistics equal ground-truth coverage arithmetic.
    for (vantage, pool) in [(DEMO_VP1, DEMO_VP1_POOL_SIZE), (DEMO_VP2, DEMO_VP2_POOL_SIZE)] {
        let stats = coverage_stats(&fixture.rows, vantage, pool).expect("coverage");
        let expected = fixture.truth.expected_coverage(vantage);
        let mut counts: Vec<u64> = expected.values().map(|s| s.len() as u64).collect();
        counts.sort_unstable();
        let rank = |p: f64| counts[(p * counts.len() as f64).ceil() as usize - 1];
        assert_eq!(stats.median, rank(0.5), "{vantage} median");
        assert_eq!(stats.p75, rank(0.75), "{vantage} p75");
        let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
        assert!((stats.mean - mean).abs() < 1e-12, "{vantage} mean");
        assert_eq!(
            stats.per_scanner,
            expected
                .iter()
                .map(|(ip, set)| (*ip, set.len() as u64))
                .collect::<Vec<_>>(),
            "{vantage} per-scanner counts"
        );
    }

    // Per-pair unique backend IPs equal the schedule's assignments.
    let spec = demo_spec();
    let country_of: BTreeMap<Ipv4Addr, String> = spec
        .server_geo
        .iter()
        .map(|e| (e.ip, e.country.clone()))
        .collect();
    let mut expected_pairs: BTreeMap<(String, String), BTreeSet<Ipv4Addr>> = BTreeMap::new();
    let mut expected_no_backend: BTreeSet<String> = BTreeSet::new();
    for c in fixture.truth.exploit_connections() {
        match c.backend {
            Some((ip, _)) => {
                let server_country = country_of.get(&ip).expect("backend geo").clone();
                expected_pairs
                    .entry((c.scanner_country.clone(), server_country))
                    .or_default()
                    .insert(ip);
            }
            None => {
                expected_no_backend.insert(c.scanner_country.clone());
            }
        }
    }

    let matrix = antscope_core::analytics::coupling(&fixture.rows);
    let mut got_pairs: BTreeMap<(String, String), u64> = BTreeMap::new();
    for row in &matrix.rows {
        for (server, _, _, unique) in &row.cells {
            got_pairs.insert((row.scanner_country.clone(), server.clone()), *unique);
        }
    }
    assert_eq!(got_pairs.len(), expected_pairs.len(), "pair sets differ");
    for (pair, ips) in &expected_pairs {
        assert_eq!(
            got_pairs.get(pair).copied(),
            Some(ips.len() as u64),
            "unique server IPs differ for {pair:?}"
        );
    }
    let got_no_backend: BTreeSet<String> =
        matrix.no_backend.iter().map(|(c, _)| c.clone()).collect();
    assert_eq!(got_no_backend, expected_no_backend);
    println!(
        "replay PASS: daily series equal schedule counts; {} coupling pairs and no-backend set {{{}}} match",
        expected_pairs.len(),
        got_no_backend.iter().cloned().collect::<Vec<_>>().join(",")
    );
}

// --- criterion 8 -----------------------------------------------------------

fn dir_file_map(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).expect("readable dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let rel = path.strip_prefix(root).expect("under root").to_path_buf();
                out.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn assert_dirs_byte_identical(a: &Path, b: &Path, what: &str) {
    let ma = dir_file_map(a);
    let mb = dir_file_map(b);
    assert_eq!(
        ma.keys().collect::<Vec<_>>(),
        mb.keys().collect::<Vec<_>>(),
        "{what}: file sets differ"
    );
    for (path, bytes) in &ma {
        assert_eq!(
            bytes,
            mb.get(path).expect("same file set"),
            "{what}: {} differs",
            path.display()
        );
    }
}

#[test]
fn criterion_8_determinism_across_runs() {
    let fixture = &*DEMO;
    let second = tempfile::tempdir().expect("tempdir");
    let (sim_b, store_b, report_b, _, _) = run_demo_chain(second.path());

    assert_dirs_byte_identical(&fixture.sim_dir, &sim_b, "capture files");
    assert_dirs_byte_identical(&fixture.store_dir, &store_b, "stores");
    assert_dirs_byte_identical(&fixture.report_dir, &report_b, "reports");
    println!("criterion 8 PASS: capture files, stores, and reports byte-identical across two runs");
}
