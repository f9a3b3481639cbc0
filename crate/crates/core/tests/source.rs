use triplet_lab::cli::{RunConfig, COMPRESSION, RUN_HOURS};
use triplet_lab::rng::SeedTree;
use triplet_lab::source::{detect, generate_triplets, ChannelConfig, DetectorConfig, SourceConfig};
use triplet_lab::tags::{find_triples, histogram2d, marginals};
use triplet_lab::ttag::TICK_NS;

fn std_ns(h: &triplet_lab::tags::Histogram1D) -> f64 {
    let n = h.total() as f64;
    let m: f64 = h
        .counts
        .iter()
        .map(|(&b, &c)| b as f64 * c as f64)
        .sum::<f64>()
        / n;
    let v: f64 = h
        .counts
        .iter()
        .map(|(&b, &c)| (b as f64 - m).powi(2) * c as f64)
        .sum::<f64>()
        / n;
    v.sqrt() * TICK_NS
}

/// Convolution oracle: independent Gaussian jitters add in quadrature and
/// flooring both tags adds two uniform quantization errors (τ²/6).
fn expected_width(a: f64, b: f64) -> f64 {
    (a * a + b * b + TICK_NS * TICK_NS / 6.0).sqrt()
}

fn lossless(jitters: [f64; 3]) -> DetectorConfig {
    DetectorConfig {
        channels: jitters
            .iter()
            .map(|&j| ChannelConfig {
                efficiency: 1.0,
                jitter_sigma: j,
                dark_rate: 0.0,
                offset: 0.0,
                gate: None,
            })
            .collect(),
        tick_ps: 156,
    }
}

#[test]
fn marginal_widths_follow_the_convolution_oracle() {
    let jit = [0.326, 0.134, 0.0654];
    let cfg = SourceConfig {
        pair_rate: 1000.0,
        ..SourceConfig::default()
    };
    let seeds = SeedTree::new(21);
    let (ev, _) = generate_triplets(&cfg, 20.0, &seeds).unwrap();
    let tags = detect(&ev, &lossless(jit), 20.0, &seeds).unwrap();
    let t = find_triples(&tags, 32).unwrap();
    assert!(t.len() >= 10_000);
    let m = marginals(&histogram2d(&t, 32));
    for (h, a, b) in [
        (&m.d21, jit[0], jit[1]),
        (&m.d32, jit[1], jit[2]),
        (&m.d31, jit[0], jit[2]),
    ] {
        let (got, want) = (std_ns(h), expected_width(a, b));
        assert!((got / want - 1.0).abs() < 0.05, "{got} vs {want}");
    }
}

#[test]
fn doubled_first_jitter_narrows_the_telecom_pair() {
    let j = 0.15;
    let cfg = SourceConfig {
        pair_rate: 1000.0,
        ..SourceConfig::default()
    };
    let seeds = SeedTree::new(22);
    let (ev, _) = generate_triplets(&cfg, 20.0, &seeds).unwrap();
    let tags = detect(&ev, &lossless([2.0 * j, j, j]), 20.0, &seeds).unwrap();
    let m = marginals(&histogram2d(&find_triples(&tags, 32).unwrap(), 32));
    let ratio = std_ns(&m.d32) / std_ns(&m.d21);
    let oracle = expected_width(j, j) / expected_width(2.0 * j, j);
    assert!((ratio / oracle - 1.0).abs() < 0.05, "{ratio} vs {oracle}");
    assert!(ratio < 0.7);
}

#[test]
fn detected_triple_rate_is_seven_per_hour() {
    // the compressed run keeps the per-event detection chain, so triples
    // per compressed hour / COMPRESSION is the uncompressed hourly rate
    let cfg = RunConfig::compressed_triplets(4);
    let seeds = SeedTree::new(cfg.seed);
    let (ev, _) = generate_triplets(&cfg.source, cfg.duration, &seeds).unwrap();
    let tags = detect(&ev, &cfg.detectors, cfg.duration, &seeds).unwrap();
    let n = find_triples(&tags, 32).unwrap().len() as f64;
    let per_hour = n / RUN_HOURS;
    assert!(
        (per_hour / 7.0 - 1.0).abs() < 0.3,
        "{per_hour}/h over {RUN_HOURS} h (x{COMPRESSION})"
    );
}
