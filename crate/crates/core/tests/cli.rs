use std::fs;

use clap::Parser;
use triplet_lab::cli::{run, AnalysisReport, Cli};
use triplet_lab::ttag::{read_file, write_file, TICK_FS};
use triplet_lab::Error;

fn cli(args: &[&str]) -> triplet_lab::Result<triplet_lab::cli::Outcome> {
    let mut full = vec!["triplet-lab"];
    full.extend_from_slice(args);
    run(Cli::try_parse_from(full).expect("arguments parse"))
}

fn dir_arg(d: &tempfile::TempDir, sub: &str) -> String {
    d.path().join(sub).to_string_lossy().into_owned()
}

#[test]
fn simulate_is_deterministic_and_reports_triples() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (dir_arg(&d, "a"), dir_arg(&d, "b"));
    let out = cli(&["simulate", "--seed", "11", "--out", &a]).unwrap();
    cli(&["simulate", "--seed", "11", "--out", &b]).unwrap();
    for f in ["tags.ttag", "bandwidth.txt", "simulate.toml"] {
        let x = fs::read(d.path().join("a").join(f)).unwrap();
        let y = fs::read(d.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    assert!(out.stdout.contains("triples = "));
    // 1 h at 7/h: P(no triple) = e^-7
    let n: u64 = out
        .stdout
        .lines()
        .find_map(|l| l.strip_prefix("triples = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(n >= 1);
}

#[test]
fn zero_efficiency_leaves_dark_counts_only() {
    let d = tempfile::tempdir().unwrap();
    let cfg_path = d.path().join("zero.toml");
    let mut text = String::from("duration = 600.0\n[detectors]\n");
    for (k, (dark, gate)) in [
        (100.0, ""),
        (100.0, ""),
        (5e-5, "gate = { trigger_channel = 2, width = 50.0 }\n"),
    ]
    .iter()
    .enumerate()
    {
        text.push_str(&format!(
            "[[detectors.channels]]\nefficiency = 0.0\njitter_sigma = 0.1\ndark_rate = {dark:e}\noffset = {}\n{gate}",
            if k == 2 { 1.5 } else { 0.0 }
        ));
    }
    fs::write(&cfg_path, text).unwrap();
    let out = dir_arg(&d, "o");
    cli(&[
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        &out,
    ])
    .unwrap();
    let file = read_file(&d.path().join("o/tags.ttag")).unwrap();
    let per: Vec<usize> = (1..=3)
        .map(|c| file.tags.iter().filter(|t| t.channel == c).count())
        .collect();
    // 600 s of 100/s darks on each free-running channel
    for n in &per[..2] {
        assert!(
            (*n as f64 - 60_000.0).abs() < 5.0 * 60_000f64.sqrt(),
            "{per:?}"
        );
    }
    // gated channel only sees darks inside the 50 ns windows opened by channel 2
    let expected = per[1] as f64 * 50.0 * 5e-5;
    assert!(
        (per[2] as f64 - expected).abs() < 5.0 * expected.sqrt(),
        "{per:?} vs {expected}"
    );
}

#[test]
fn analyze_empty_and_malformed_files() {
    let d = tempfile::tempdir().unwrap();
    let empty = d.path().join("empty.ttag");
    write_file(&empty, TICK_FS, &[]).unwrap();
    let out = dir_arg(&d, "o");
    let r = cli(&["analyze", empty.to_str().unwrap(), "--out", &out]).unwrap();
    let report = AnalysisReport::parse(&r.stdout).unwrap();
    assert_eq!((report.tags, report.triples), (0, 0));
    assert!(report.timing.is_none());
    assert!(d.path().join("o/hist2d.txt").exists());

    let bad = d.path().join("bad.ttag");
    fs::write(&bad, b"TTAG\x07").unwrap();
    match cli(&["analyze", bad.to_str().unwrap(), "--out", &out]) {
        Err(Error::MalformedTagFile { offset, .. }) => assert_eq!(offset, 4),
        other => panic!(
            "expected malformed-file error, got {:?}",
            other.map(|o| o.stdout)
        ),
    }
}

#[test]
fn simulate_analyze_witness_pipeline() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    // a tenth of the reference triple yield at 100x rate: enough counts
    fs::write(
        &cfg,
        "seed = 5\nduration = 261.36\n[source]\npair_rate = 75.0\n",
    )
    .unwrap();
    let out = dir_arg(&d, "run");
    cli(&["simulate", "--config", cfg.to_str().unwrap(), "--out", &out]).unwrap();
    let tags = d.path().join("run/tags.ttag");
    let a = cli(&[
        "analyze",
        tags.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        &out,
        "--doubles",
        "1,2",
    ])
    .unwrap();
    let report = AnalysisReport::parse(&a.stdout).unwrap();
    assert!(report.triples >= 30, "{}", a.stdout);
    assert!(report.timing.is_some(), "{}", report.status);
    assert_eq!(report.doubles.len(), 1);
    for f in [
        "hist2d.txt",
        "marginal_t21.txt",
        "marginal_t32.txt",
        "marginal_t31.txt",
        "doubles_1_2.txt",
    ] {
        assert!(d.path().join("run").join(f).exists(), "{f}");
    }
    let w = cli(&[
        "witness",
        "--timing",
        d.path().join("run/analysis.toml").to_str().unwrap(),
        "--bandwidth-mhz",
        "6",
    ])
    .unwrap();
    assert!(
        w.stdout.contains("classification = \"genuine-tripartite\""),
        "{}",
        w.stdout
    );
}

#[test]
fn witness_from_quoted_and_inflated_timings() {
    let w = cli(&[
        "witness",
        "--dt21",
        "0.37",
        "--dt32",
        "0.162",
        "--dt31",
        "0.31",
        "--bandwidth-mhz",
        "6",
    ])
    .unwrap();
    assert!(w.stdout.contains("genuine-tripartite"));
    let w = cli(&[
        "witness",
        "--dt21",
        "37",
        "--dt32",
        "16.2",
        "--dt31",
        "31",
        "--bandwidth-mhz",
        "6",
    ])
    .unwrap();
    assert!(!w.stdout.contains("genuine-tripartite"), "{}", w.stdout);
}

#[test]
fn witness_from_state_file() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("state.toml");
    fs::write(&p, "sigma = [1, 1, 1]\n").unwrap();
    let w = cli(&["witness", "--state", p.to_str().unwrap()]).unwrap();
    assert!(w.stdout.contains("no-witness"));
    let g = cli(&["gaussian", "--example", "sqrt6"]).unwrap();
    assert!(g.stdout.contains("fully-inseparable"));
}

#[test]
fn reproduce_sections() {
    let r = cli(&["reproduce", "--section", "two-photon"]).unwrap();
    assert_eq!(r.exit_code, 0, "{}", r.stdout);
    let rows: Vec<&str> = r
        .stdout
        .lines()
        .filter(|l| l.ends_with("PASS") || l.ends_with("FAIL"))
        .collect();
    assert!(!rows.is_empty());
    assert!(
        rows.iter().all(|l| l.starts_with("two-photon")),
        "{}",
        r.stdout
    );
    match cli(&["reproduce", "--section", "bogus"]) {
        Err(Error::UnknownSection { available, .. }) => assert!(available.contains("two-photon")),
        other => panic!("{:?}", other.map(|o| o.stdout)),
    }
}

#[test]
fn reproduce_report_is_byte_identical() {
    let a = cli(&[
        "reproduce",
        "--seed",
        "3",
        "--section",
        "timing",
        "--section",
        "gaussian",
    ])
    .unwrap();
    let b = cli(&[
        "reproduce",
        "--seed",
        "3",
        "--section",
        "timing",
        "--section",
        "gaussian",
    ])
    .unwrap();
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn pump_scan_file_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let out = dir_arg(&d, "p");
    let a = cli(&["pump", "--bandwidth", "6", "--out", &out]).unwrap();
    let scan = d.path().join("p/scan.txt");
    let b = cli(&["pump", "--scan", scan.to_str().unwrap()]).unwrap();
    let bw = |s: &str| -> f64 {
        s.lines()
            .find_map(|l| l.strip_prefix("bandwidth = "))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((bw(&a.stdout) - bw(&b.stdout)).abs() < 1e-4);
    assert!((bw(&a.stdout) / 6.0 - 1.0).abs() < 0.05);
}
