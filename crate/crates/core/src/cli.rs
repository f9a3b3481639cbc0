//! Run configuration, report assembly and the commands behind the
//! `triplet-lab` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{self, variances_with_limits, GaussianMixture, VarianceSet};
use crate::pump::{self, BandwidthSeries, FPScan, ScanSettings, SeriesSummary};
use crate::rng::SeedTree;
use crate::source::{self, mhz_to_rad_per_ns, BandwidthDrift, DetectorConfig, SourceConfig};
use crate::tags::{
    self, Histogram1D, Histogram2D, Marginals, PeakStats, StatsOptions, TimingStats,
};
use crate::ttag::{self, TagFile, TimeTag};
use crate::witness::{
    self, BandwidthConvention, Classification, EnergyTimeInput, EnergyTimeUncertainties,
    PairProduct, Provenance, WitnessReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Cascaded downconversion, one photon per channel 1..3.
    #[default]
    Triplets,
    /// Single-stage pairs on channels 1 and 2.
    Pairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Coincidence window, ticks.
    pub window: u64,
    /// Signal half-width in initial-width units; the rest is sideband.
    pub signal_sigmas: f64,
    pub resamples: usize,
    /// Channel pairs for two-fold analysis.
    pub doubles: Vec<[u8; 2]>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window: tags::DEFAULT_WINDOW,
            signal_sigmas: tags::SIGNAL_HALF_WIDTH_SIGMAS,
            resamples: tags::BOOTSTRAP_RESAMPLES,
            doubles: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WitnessConfig {
    pub convention: BandwidthConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Simulated seconds.
    pub duration: f64,
    pub experiment: Experiment,
    pub output: PathBuf,
    pub source: SourceConfig,
    pub detectors: DetectorConfig,
    pub analysis: AnalysisConfig,
    pub pump: ScanSettings,
    pub witness: WitnessConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            duration: 3600.0,
            experiment: Experiment::Triplets,
            output: PathBuf::from("out"),
            source: SourceConfig::default(),
            detectors: DetectorConfig::reference_triplets(),
            analysis: AnalysisConfig::default(),
            pump: ScanSettings::default(),
            witness: WitnessConfig::default(),
        }
    }
}

/// Hours of triplet data in the reference run.
pub const RUN_HOURS: f64 = 72.6;
/// Time compression of the reproduction run: rate ×K, duration ÷K.
pub const COMPRESSION: f64 = 100.0;

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_named(text, Path::new("<config>"))
    }

    fn parse_named(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_named(&fs::read_to_string(path)?, path)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Error::InvalidConfig {
            field: field.into(),
            reason,
        };
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(bad(
                "duration",
                format!("must be positive, got {}", self.duration),
            ));
        }
        self.source.validate()?;
        self.detectors.validate()?;
        self.pump.validate()?;
        let needed = match self.experiment {
            Experiment::Triplets => 3,
            Experiment::Pairs => 2,
        };
        let n = self.detectors.channels.len();
        if n < needed {
            return Err(bad(
                "detectors.channels",
                format!("{needed} channels needed for this experiment, got {n}"),
            ));
        }
        let a = &self.analysis;
        if a.window == 0 {
            return Err(bad("analysis.window", "must be at least one tick".into()));
        }
        if !(a.signal_sigmas.is_finite() && a.signal_sigmas > 0.0) {
            return Err(bad("analysis.signal_sigmas", "must be positive".into()));
        }
        if a.resamples < 2 {
            return Err(bad("analysis.resamples", "need at least 2".into()));
        }
        for pair in &a.doubles {
            if pair[0] == pair[1] || pair[0] == 0 || pair[1] == 0 {
                return Err(bad(
                    "analysis.doubles",
                    format!("{pair:?} must name two distinct channels from 1"),
                ));
            }
        }
        Ok(())
    }

    fn stats_options(&self, tick_ns: f64) -> StatsOptions {
        StatsOptions {
            tick_ns,
            signal_sigmas: self.analysis.signal_sigmas,
            resamples: self.analysis.resamples,
        }
    }

    /// The triplet run at `COMPRESSION`× the emission rate for
    /// `RUN_HOURS / COMPRESSION`, yielding the full run's triple count.
    pub fn compressed_triplets(seed: u64) -> Self {
        let mut cfg = RunConfig {
            seed,
            duration: RUN_HOURS * 3600.0 / COMPRESSION,
            ..RunConfig::default()
        };
        cfg.source.pair_rate *= COMPRESSION;
        cfg.analysis.doubles = vec![[1, 2], [2, 3]];
        cfg
    }

    /// The single-stage pair experiment: about 14000 detected
    /// coincidences per second for 1.6 s, pump line 4.6 ± 0.8 MHz.
    pub fn two_photon(seed: u64) -> Self {
        let detectors = DetectorConfig::reference_pairs();
        let eta = detectors.channels[0].efficiency * detectors.channels[1].efficiency;
        let mut cfg = RunConfig {
            seed,
            duration: 1.6,
            experiment: Experiment::Pairs,
            detectors,
            ..RunConfig::default()
        };
        cfg.source.pair_rate = 14_000.0 / eta;
        cfg.source.pump_bandwidth_mean = mhz_to_rad_per_ns(4.6);
        cfg.source.pump_bandwidth_spread = mhz_to_rad_per_ns(0.8);
        cfg.analysis.doubles = vec![[1, 2]];
        cfg
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

// ---------------------------------------------------------------- simulate

pub struct Simulation {
    pub tags: Vec<TimeTag>,
    pub events: usize,
    pub drift: BandwidthDrift,
}

pub fn run_simulation(cfg: &RunConfig) -> Result<Simulation> {
    cfg.validate()?;
    let seeds = SeedTree::new(cfg.seed);
    let src = seeds.child("source");
    let (events, drift) = match cfg.experiment {
        Experiment::Triplets => source::generate_triplets(&cfg.source, cfg.duration, &src)?,
        Experiment::Pairs => source::generate_pairs(&cfg.source, cfg.duration, &src)?,
    };
    let tags = source::detect(
        &events,
        &cfg.detectors,
        cfg.duration,
        &seeds.child("detect"),
    )?;
    Ok(Simulation {
        tags,
        events: events.len(),
        drift,
    })
}

pub fn run_pump_series(
    cfg: &RunConfig,
    drift: &BandwidthDrift,
    duration: f64,
) -> Result<BandwidthSeries> {
    pump::monitor_series(
        drift,
        duration,
        &cfg.pump,
        &SeedTree::new(cfg.seed).child("pump"),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub seed: u64,
    pub duration: f64,
    pub experiment: Experiment,
    pub events: u64,
    pub tags: u64,
    pub tags_per_channel: Vec<u64>,
    /// Triple coincidences at the configured window (0 for pair runs).
    pub triples: u64,
    pub tick_ps: u64,
    pub bandwidth: SeriesSummary,
}

impl SimulateReport {
    pub fn to_text(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            simulation: &'a SimulateReport,
        }
        toml::to_string(&Doc { simulation: self }).expect("report serializes")
    }
}

/// Writes `tags.ttag`, `bandwidth.txt` and `simulate.toml` under the
/// output directory.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateReport> {
    let sim = run_simulation(cfg)?;
    let series = run_pump_series(cfg, &sim.drift, cfg.duration)?;
    let mut per_channel = vec![0u64; cfg.detectors.channels.len()];
    for t in &sim.tags {
        per_channel[t.channel as usize - 1] += 1;
    }
    let report = SimulateReport {
        seed: cfg.seed,
        duration: cfg.duration,
        experiment: cfg.experiment,
        events: sim.events as u64,
        tags: sim.tags.len() as u64,
        tags_per_channel: per_channel,
        triples: match cfg.experiment {
            Experiment::Triplets => {
                tags::find_triples(&sim.tags, cfg.analysis.window)?.len() as u64
            }
            Experiment::Pairs => 0,
        },
        tick_ps: cfg.detectors.tick_ps,
        bandwidth: series.summary(),
    };
    let out = &cfg.output;
    fs::create_dir_all(out)?;
    ttag::write_file(
        &out.join("tags.ttag"),
        cfg.detectors.tick_ps * 1000,
        &sim.tags,
    )?;
    write(&out.join("bandwidth.txt"), series.to_text())?;
    write(&out.join("simulate.toml"), report.to_text())?;
    Ok(report)
}

// ----------------------------------------------------------------- analyze

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublesReport {
    pub channels: [u8; 2],
    pub pairs: u64,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak: Option<PeakStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tags: u64,
    pub triples: u64,
    pub window: u64,
    pub tick_ns: f64,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingStats>,
    #[serde(default)]
    pub doubles: Vec<DoublesReport>,
}

impl AnalysisReport {
    pub fn to_text(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            analysis: &'a AnalysisReport,
        }
        toml::to_string(&Doc { analysis: self }).expect("report serializes")
    }

    pub fn parse(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            analysis: AnalysisReport,
        }
        toml::from_str::<Doc>(text)
            .map(|d| d.analysis)
            .map_err(|e| Error::Parse {
                path: "<analysis>".into(),
                reason: e.to_string(),
            })
    }
}

pub struct Analysis {
    pub report: AnalysisReport,
    pub histogram: Histogram2D,
    pub marginals: Marginals,
    pub doubles: Vec<([u8; 2], Histogram1D)>,
}

fn status_of<T>(r: &Result<T>) -> Result<String> {
    match r {
        Ok(_) => Ok("ok".into()),
        Err(e @ (Error::InsufficientCounts { .. } | Error::NoPeak(_))) => Ok(e.to_string()),
        Err(e) => Err(Error::InvalidConfig {
            field: "analysis".into(),
            reason: e.to_string(),
        }),
    }
}

/// Triples, histograms and timing statistics of a tag stream. Too few
/// counts or a missing peak are reported in `status`, not as errors.
pub fn analyze_tags(file: &TagFile, cfg: &RunConfig) -> Result<Analysis> {
    cfg.validate()?;
    let tick_ns = file.tick_fs as f64 * 1e-6;
    let opts = cfg.stats_options(tick_ns);
    let seeds = SeedTree::new(cfg.seed).child("analysis");
    let window = cfg.analysis.window;
    let triples = tags::find_triples_parallel(&file.tags, window, 1 << 16)?;
    let histogram = tags::histogram2d(&triples, window);
    let marginals = tags::marginals(&histogram);
    let timing = tags::timing_stats(&histogram, &opts, &seeds);
    let status = status_of(&timing)?;
    let mut doubles = Vec::new();
    let mut doubles_reports = Vec::new();
    for &[a, b] in &cfg.analysis.doubles {
        let (pairs, h) = tags::find_doubles(&file.tags, (a, b), window)?;
        let peak = tags::peak_stats(&h, &opts, &seeds, &format!("doubles-{a}-{b}"));
        doubles_reports.push(DoublesReport {
            channels: [a, b],
            pairs: pairs.len() as u64,
            status: status_of(&peak)?,
            peak: peak.ok(),
        });
        doubles.push(([a, b], h));
    }
    Ok(Analysis {
        report: AnalysisReport {
            tags: file.tags.len() as u64,
            triples: triples.len() as u64,
            window,
            tick_ns,
            status,
            timing: timing.ok(),
            doubles: doubles_reports,
        },
        histogram,
        marginals,
        doubles,
    })
}

/// Analyzes a TTAG file and writes `analysis.toml`, `hist2d.txt`,
/// `marginal_t21.txt`, `marginal_t32.txt`, `marginal_t31.txt` and one
/// `doubles_<a>_<b>.txt` per configured pair.
pub fn cmd_analyze(path: &Path, cfg: &RunConfig) -> Result<AnalysisReport> {
    let file = ttag::read_file(path)?;
    let a = analyze_tags(&file, cfg)?;
    let tick_ns = a.report.tick_ns;
    let out = &cfg.output;
    write(&out.join("analysis.toml"), a.report.to_text())?;
    write(&out.join("hist2d.txt"), a.histogram.to_columns(tick_ns))?;
    write(
        &out.join("marginal_t21.txt"),
        a.marginals.d21.to_columns(tick_ns),
    )?;
    write(
        &out.join("marginal_t32.txt"),
        a.marginals.d32.to_columns(tick_ns),
    )?;
    write(
        &out.join("marginal_t31.txt"),
        a.marginals.d31.to_columns(tick_ns),
    )?;
    for ([x, y], h) in &a.doubles {
        write(
            &out.join(format!("doubles_{x}_{y}.txt")),
            h.to_columns(tick_ns),
        )?;
    }
    Ok(a.report)
}

// ----------------------------------------------------------------- witness

/// Witness for measured or simulated timing widths and a pump bandwidth
/// summary in MHz. The series standard deviation serves as the bandwidth
/// uncertainty; with every uncertainty zero none are reported.
pub fn witness_from_stats(
    timing: &TimingStats,
    bandwidth: &SeriesSummary,
    convention: BandwidthConvention,
    provenance: Provenance,
) -> Result<WitnessReport> {
    let u = EnergyTimeUncertainties {
        dt21: timing.dt21_err,
        dt32: timing.dt32_err,
        dt31: timing.dt31_err,
        domega: convention.to_rad_per_ns(bandwidth.std),
    };
    let any = [u.dt21, u.dt32, u.dt31, u.domega].iter().any(|&x| x != 0.0);
    witness::evaluate_energy_time(&EnergyTimeInput {
        dt21: timing.dt21,
        dt32: timing.dt32,
        dt31: timing.dt31,
        domega: convention.to_rad_per_ns(bandwidth.mean),
        uncertainties: any.then_some(u),
        provenance,
    })
}

/// Variances and witness of an analytic state.
pub fn gaussian_witness(mix: &GaussianMixture) -> Result<(VarianceSet, WitnessReport)> {
    let v = variances_with_limits(mix)?;
    Ok((v, witness::evaluate(&v)))
}

// -------------------------------------------------------------- reproduce

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub section: String,
    pub name: String,
    pub value: String,
    pub reference: String,
    pub tolerance: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceReport {
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

impl ReproduceReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<11} {:<34} {:>14} {:>14} {:>12}  result",
            "section", "quantity", "reproduced", "reference", "tolerance"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<11} {:<34} {:>14} {:>14} {:>12}  {}",
                r.section,
                r.name,
                r.value,
                r.reference,
                r.tolerance,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        let failed = self.rows.iter().filter(|r| !r.pass).count();
        let _ = writeln!(s, "{} rows, {} failed", self.rows.len(), failed);
        s
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

pub const SECTIONS: &[&str] = &[
    "gaussian",
    "timing",
    "witness",
    "pump",
    "doubles",
    "two-photon",
];

struct Rows<'a> {
    section: &'a str,
    rows: Vec<ReportRow>,
}

impl Rows<'_> {
    fn push(
        &mut self,
        name: &str,
        value: String,
        reference: String,
        tolerance: String,
        pass: bool,
    ) {
        self.rows.push(ReportRow {
            section: self.section.into(),
            name: name.into(),
            value,
            reference,
            tolerance,
            pass,
        });
    }

    fn within(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        let pass = (value - target).abs() <= tol;
        self.push(
            name,
            fmt(value),
            fmt(target),
            format!("±{}", fmt(tol)),
            pass,
        );
    }

    fn below(&mut self, name: &str, value: f64, reference: &str, limit: f64) {
        self.push(
            name,
            fmt(value),
            reference.into(),
            format!("< {}", fmt(limit)),
            value < limit,
        );
    }

    fn above(&mut self, name: &str, value: f64, reference: &str, limit: f64) {
        self.push(
            name,
            fmt(value),
            reference.into(),
            format!("> {}", fmt(limit)),
            value > limit,
        );
    }

    fn equals(&mut self, name: &str, value: &str, expected: &str) {
        self.push(
            name,
            value.into(),
            expected.into(),
            "exact".into(),
            value == expected,
        );
    }
}

fn fmt(x: f64) -> String {
    if x == 0.0 || (1e-3..1e5).contains(&x.abs()) {
        let s = format!("{x:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{x:.3e}")
    }
}

/// Outcome of the compressed triplet run shared by several sections.
pub struct TripletRun {
    pub analysis: Analysis,
}

pub fn triplet_run(seed: u64) -> Result<TripletRun> {
    let cfg = RunConfig::compressed_triplets(seed);
    let sim = run_simulation(&cfg)?;
    let file = TagFile {
        tick_fs: cfg.detectors.tick_ps * 1000,
        tags: sim.tags,
    };
    Ok(TripletRun {
        analysis: analyze_tags(&file, &cfg)?,
    })
}

/// The bandwidth series over the full run at the default cadence.
pub fn pump_run(seed: u64) -> Result<BandwidthSeries> {
    let cfg = RunConfig {
        seed,
        ..RunConfig::default()
    };
    let duration = RUN_HOURS * 3600.0;
    let drift =
        BandwidthDrift::simulate(&cfg.source, duration, &SeedTree::new(seed).child("source"));
    run_pump_series(&cfg, &drift, duration)
}

/// Hours of pump monitoring attributed to the short pair measurement.
pub const TWO_PHOTON_MONITOR_HOURS: f64 = 12.0;

pub struct TwoPhotonRun {
    pub peak: PeakStats,
    pub coincidences: u64,
    pub bandwidth: SeriesSummary,
    pub angular: PairProduct,
    pub direct: PairProduct,
}

pub fn two_photon_run(seed: u64) -> Result<TwoPhotonRun> {
    let cfg = RunConfig::two_photon(seed);
    let sim = run_simulation(&cfg)?;
    let file = TagFile {
        tick_fs: cfg.detectors.tick_ps * 1000,
        tags: sim.tags,
    };
    let a = analyze_tags(&file, &cfg)?;
    let d = &a.report.doubles[0];
    let peak = d.peak.ok_or_else(|| Error::NoPeak(d.status.clone()))?;
    let drift = BandwidthDrift::simulate(
        &cfg.source,
        TWO_PHOTON_MONITOR_HOURS * 3600.0,
        &SeedTree::new(seed).child("two-photon-pump"),
    );
    let bandwidth = run_pump_series(&cfg, &drift, TWO_PHOTON_MONITOR_HOURS * 3600.0)?.summary();
    let product = |c: BandwidthConvention| {
        witness::pair_time_bandwidth(
            peak.sigma,
            peak.sigma_err,
            c.to_rad_per_ns(bandwidth.mean),
            c.to_rad_per_ns(bandwidth.std),
        )
    };
    Ok(TwoPhotonRun {
        peak,
        coincidences: d.pairs,
        bandwidth,
        angular: product(BandwidthConvention::Angular),
        direct: product(BandwidthConvention::Direct),
    })
}

fn gaussian_rows(r: &mut Rows) -> Result<()> {
    let (_, w2) = gaussian_witness(&gaussian::sqrt2_counterexample())?;
    let min_sum = w2.sum_values.iter().copied().fold(f64::INFINITY, f64::min);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    r.within("sqrt2 mixture min pair sum", min_sum, 2f64.sqrt(), 1e-3);
    r.within("sqrt2 mixture product 21", w2.product_values[0], h, 1e-3);
    r.within("sqrt2 mixture product 31", w2.product_values[2], h, 1e-3);
    r.equals(
        "sqrt2 mixture classification",
        &w2.classification.to_string(),
        &Classification::FullyInseparable.to_string(),
    );
    let (_, w6) = gaussian_witness(&gaussian::sqrt6_counterexample())?;
    r.within(
        "sqrt6 mixture triple sum",
        w6.triple_sum_value,
        6f64.sqrt(),
        1e-3,
    );
    r.equals(
        "sqrt6 mixture product violations",
        &w6.product_violations().to_string(),
        "3",
    );
    r.equals(
        "sqrt6 mixture classification",
        &w6.classification.to_string(),
        &Classification::FullyInseparable.to_string(),
    );
    let psi4 = gaussian::psi4([1.0; 3], 1e-4)?;
    let (_, w4) = gaussian_witness(&GaussianMixture::from(psi4))?;
    let max_sum = w4.sum_values.iter().copied().fold(0.0, f64::max);
    r.below("psi4 max pair sum at sigma_c=1e-4", max_sum, "-> 0", 0.01);
    Ok(())
}

fn timing_rows(r: &mut Rows, run: &TripletRun) -> Result<()> {
    let rep = &run.analysis.report;
    let n = 7.0 * RUN_HOURS;
    r.within(
        "triples",
        rep.triples as f64,
        n.round(),
        (3.0 * n.sqrt()).round(),
    );
    let t = rep
        .timing
        .ok_or_else(|| Error::NoPeak(rep.status.clone()))?;
    r.within("dt21 [ns]", t.dt21, 0.37, 0.05);
    r.within("dt32 [ns]", t.dt32, 0.162, 0.02);
    r.within("dt31 [ns]", t.dt31, 0.31, 0.05);
    Ok(())
}

fn pump_rows(r: &mut Rows, s: &SeriesSummary) {
    r.within("bandwidth mean [MHz]", s.mean, 6.0, 0.15 * 6.0);
    r.within("bandwidth std [MHz]", s.std, 2.0, 0.15 * 2.0);
}

fn witness_rows(r: &mut Rows, run: &TripletRun, s: &SeriesSummary) -> Result<()> {
    let rep = &run.analysis.report;
    let t = rep
        .timing
        .ok_or_else(|| Error::NoPeak(rep.status.clone()))?;
    let w = witness_from_stats(&t, s, BandwidthConvention::Angular, Provenance::Simulated)?;
    r.within("sum 21+31", w.sum_values[0], 0.03, 0.01);
    r.within("sum 21+32", w.sum_values[1], 0.02, 0.01);
    r.within("sum 32+31", w.sum_values[2], 0.018, 0.005);
    r.within("triple sum", w.triple_sum_value, 0.03, 0.01);
    r.equals(
        "classification",
        &w.classification.to_string(),
        &Classification::GenuineTripartite.to_string(),
    );
    Ok(())
}

fn doubles_rows(r: &mut Rows, run: &TripletRun) -> Result<()> {
    let targets = [
        ([1u8, 2u8], "doubles dt21 [ns]", 0.4, 0.2),
        ([2, 3], "doubles dt32 [ns]", 0.16, 0.04),
    ];
    for (ch, name, target, tol) in targets {
        let d = run
            .analysis
            .report
            .doubles
            .iter()
            .find(|d| d.channels == ch)
            .expect("configured pair");
        match d.peak {
            Some(p) => r.within(name, p.sigma, target, tol),
            None => r.push(
                name,
                d.status.clone(),
                fmt(target),
                format!("±{}", fmt(tol)),
                false,
            ),
        }
    }
    Ok(())
}

fn two_photon_rows(r: &mut Rows, run: &TwoPhotonRun) {
    r.within("pair dt01 [ns]", run.peak.sigma, 0.30, 0.03);
    r.within("pump bandwidth [MHz]", run.bandwidth.mean, 4.6, 0.8);
    r.below(
        "pair product (2pi convention)",
        run.angular.value,
        "0.0014",
        0.01,
    );
    r.within(
        "pair product (direct MHz)",
        run.direct.value,
        0.0014,
        0.0002,
    );
    r.above(
        "violation significance (direct)",
        run.direct.significance(),
        "> 4000",
        1000.0,
    );
}

/// Runs the requested sections (all when empty) and collects report rows.
pub fn reproduce(seed: u64, sections: &[String]) -> Result<ReproduceReport> {
    for s in sections {
        if !SECTIONS.contains(&s.as_str()) {
            return Err(Error::UnknownSection {
                name: s.clone(),
                available: SECTIONS.join(", "),
            });
        }
    }
    let wanted = |name: &str| sections.is_empty() || sections.iter().any(|s| s == name);
    let mut rows = Vec::new();
    let triplets = if wanted("timing") || wanted("witness") || wanted("doubles") {
        Some(triplet_run(seed)?)
    } else {
        None
    };
    let pump = if wanted("pump") || wanted("witness") {
        Some(pump_run(seed)?.summary())
    } else {
        None
    };
    for &section in SECTIONS {
        if !wanted(section) {
            continue;
        }
        let mut r = Rows {
            section,
            rows: Vec::new(),
        };
        match section {
            "gaussian" => gaussian_rows(&mut r)?,
            "timing" => timing_rows(&mut r, triplets.as_ref().expect("run"))?,
            "witness" => witness_rows(
                &mut r,
                triplets.as_ref().expect("run"),
                pump.as_ref().expect("run"),
            )?,
            "pump" => pump_rows(&mut r, pump.as_ref().expect("run")),
            "doubles" => doubles_rows(&mut r, triplets.as_ref().expect("run"))?,
            "two-photon" => two_photon_rows(&mut r, &two_photon_run(seed)?),
            _ => unreachable!("validated above"),
        }
        rows.extend(r.rows);
    }
    Ok(ReproduceReport { seed, rows })
}

// --------------------------------------------------------------- arguments

#[derive(Debug, Parser)]
#[command(
    name = "triplet-lab",
    version,
    about = "Three-photon energy-time entanglement laboratory"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a run and write the tag stream and pump-bandwidth series.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Simulated seconds (overrides the config).
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, value_enum)]
        experiment: Option<Experiment>,
    },
    /// Extract coincidences and timing statistics from a TTAG file.
    Analyze {
        tags: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Coincidence window in ticks.
        #[arg(long)]
        window: Option<u64>,
        /// Two-fold analysis for a channel pair, e.g. `1,2`; repeatable.
        #[arg(long, value_parser = parse_pair)]
        doubles: Vec<[u8; 2]>,
        /// Signal half-width in initial-width units; bins beyond are sideband.
        #[arg(long)]
        sideband_sigmas: Option<f64>,
    },
    /// Evaluate the entanglement witness.
    Witness {
        #[command(flatten)]
        common: Common,
        /// `analysis.toml` from `analyze`.
        #[arg(long, conflicts_with = "state")]
        timing: Option<PathBuf>,
        /// Bandwidth summary (`bandwidth.txt` from `simulate` or `pump`).
        #[arg(long, conflicts_with = "state")]
        bandwidth: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["state", "timing"], requires_all = ["dt32", "dt31"])]
        dt21: Option<f64>,
        #[arg(long)]
        dt32: Option<f64>,
        #[arg(long)]
        dt31: Option<f64>,
        /// Pump bandwidth (std of ν) in MHz.
        #[arg(long, conflicts_with = "bandwidth")]
        bandwidth_mhz: Option<f64>,
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
        /// Analytic state file; bypasses simulation.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Variances and witness of an analytic Gaussian state.
    Gaussian {
        #[arg(long, conflicts_with = "example")]
        state: Option<PathBuf>,
        #[arg(long, value_enum)]
        example: Option<GaussianExample>,
        /// Correlation width for the psi4 example.
        #[arg(long, default_value_t = 1e-4)]
        sigma_c: f64,
    },
    /// Pump-line scans: a single scan, a scan file, or a drifting series.
    Pump {
        #[command(flatten)]
        common: Common,
        /// Simulate and fit one scan of this bandwidth (MHz).
        #[arg(long, conflicts_with = "scan")]
        bandwidth: Option<f64>,
        /// Fit a scan file (`offset_MHz intensity` columns).
        #[arg(long)]
        scan: Option<PathBuf>,
        /// Series length in seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Calibrated end-to-end reproduction with a pass/fail report.
    Reproduce {
        #[command(flatten)]
        common: Common,
        /// Restrict to a section; repeatable.
        #[arg(long)]
        section: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Angular,
    Direct,
}

impl From<ConventionArg> for BandwidthConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Angular => BandwidthConvention::Angular,
            ConventionArg::Direct => BandwidthConvention::Direct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GaussianExample {
    Sqrt2,
    Sqrt6,
    Psi4,
}

fn parse_pair(s: &str) -> std::result::Result<[u8; 2], String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `a,b`, got {s:?}"))?;
    let p = |x: &str| x.trim().parse::<u8>().map_err(|e| format!("{x:?}: {e}"));
    Ok([p(a)?, p(b)?])
}

/// What a command produced: text for stdout and the process exit code.
pub struct Outcome {
    pub stdout: String,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            stdout,
            exit_code: 0,
        }
    }
}

fn witness_text(v: Option<&VarianceSet>, w: &WitnessReport) -> String {
    let mut s = String::new();
    if let Some(v) = v {
        #[derive(Serialize)]
        struct Doc<'a> {
            variances: &'a VarianceSet,
        }
        s.push_str(&toml::to_string(&Doc { variances: v }).expect("variances serialize"));
        s.push('\n');
    }
    s.push_str(&w.to_text());
    s
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Simulate {
            common,
            duration,
            experiment,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(d) = duration {
                cfg.duration = d;
            }
            if let Some(e) = experiment {
                if e != cfg.experiment && e == Experiment::Pairs && common.config.is_none() {
                    cfg = RunConfig {
                        duration: cfg.duration,
                        output: cfg.output,
                        ..RunConfig::two_photon(cfg.seed)
                    };
                }
                cfg.experiment = e;
            }
            Ok(Outcome::ok(cmd_simulate(&cfg)?.to_text()))
        }
        Command::Analyze {
            tags: path,
            common,
            window,
            doubles,
            sideband_sigmas,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(w) = window {
                cfg.analysis.window = w;
            }
            if !doubles.is_empty() {
                cfg.analysis.doubles = doubles;
            }
            if let Some(s) = sideband_sigmas {
                cfg.analysis.signal_sigmas = s;
            }
            Ok(Outcome::ok(cmd_analyze(&path, &cfg)?.to_text()))
        }
        Command::Witness {
            common,
            timing,
            bandwidth,
            dt21,
            dt32,
            dt31,
            bandwidth_mhz,
            convention,
            state,
        } => {
            let cfg = common.resolve()?;
            let convention = convention.map(Into::into).unwrap_or(cfg.witness.convention);
            let (v, report) = if let Some(p) = state {
                let (v, w) = gaussian_witness(&gaussian::load_state(&p)?)?;
                (Some(v), w)
            } else {
                let stats = match (timing, dt21, dt32, dt31) {
                    (Some(p), ..) => {
                        let a = AnalysisReport::parse(&fs::read_to_string(&p)?)?;
                        a.timing.ok_or_else(|| Error::InvalidConfig {
                            field: "timing".into(),
                            reason: format!(
                                "{} has no timing statistics: {}",
                                p.display(),
                                a.status
                            ),
                        })?
                    }
                    (None, Some(a), Some(b), Some(c)) => zero_error_stats(a, b, c),
                    _ => {
                        return Err(Error::InvalidConfig {
                            field: "witness".into(),
                            reason: "give --state, --timing, or all of --dt21 --dt32 --dt31".into(),
                        })
                    }
                };
                let summary = match (bandwidth, bandwidth_mhz) {
                    (Some(p), _) => SeriesSummary::parse(&fs::read_to_string(&p)?)?,
                    (None, Some(mhz)) => SeriesSummary {
                        scans: 1,
                        mean: mhz,
                        std: 0.0,
                    },
                    (None, None) => {
                        return Err(Error::InvalidConfig {
                            field: "bandwidth".into(),
                            reason: "give --bandwidth <file> or --bandwidth-mhz".into(),
                        })
                    }
                };
                let w = witness_from_stats(&stats, &summary, convention, Provenance::Measured)?;
                (None, w)
            };
            let text = witness_text(v.as_ref(), &report);
            if common.out.is_some() || common.config.is_some() {
                write(&cfg.output.join("witness.toml"), &text)?;
            }
            Ok(Outcome::ok(text))
        }
        Command::Gaussian {
            state,
            example,
            sigma_c,
        } => {
            let mix = match (state, example) {
                (Some(p), _) => gaussian::load_state(&p)?,
                (None, Some(GaussianExample::Sqrt2)) => gaussian::sqrt2_counterexample(),
                (None, Some(GaussianExample::Sqrt6)) => gaussian::sqrt6_counterexample(),
                (None, Some(GaussianExample::Psi4)) => gaussian::psi4([1.0; 3], sigma_c)?.into(),
                (None, None) => {
                    return Err(Error::InvalidConfig {
                        field: "gaussian".into(),
                        reason: "give --state <file> or --example".into(),
                    })
                }
            };
            let (v, w) = gaussian_witness(&mix)?;
            Ok(Outcome::ok(witness_text(Some(&v), &w)))
        }
        Command::Pump {
            common,
            bandwidth,
            scan,
            duration,
        } => {
            let cfg = common.resolve()?;
            let estimate_text = |s: &FPScan| -> Result<String> {
                let e = pump::estimate_bandwidth(s, cfg.pump.instrument_width)?;
                #[derive(Serialize)]
                struct Doc {
                    estimate: pump::BandwidthEstimate,
                }
                Ok(toml::to_string(&Doc { estimate: e }).expect("estimate serializes"))
            };
            if let Some(p) = scan {
                let s = FPScan::from_columns(&fs::read_to_string(&p)?)?;
                return Ok(Outcome::ok(estimate_text(&s)?));
            }
            if let Some(bw) = bandwidth {
                let s = pump::simulate_scan(bw, &cfg.pump, cfg.seed)?;
                write(&cfg.output.join("scan.txt"), s.to_columns())?;
                return Ok(Outcome::ok(estimate_text(&s)?));
            }
            let duration = duration.unwrap_or(cfg.duration);
            let drift = BandwidthDrift::simulate(
                &cfg.source,
                duration,
                &SeedTree::new(cfg.seed).child("source"),
            );
            let series = run_pump_series(&cfg, &drift, duration)?;
            write(&cfg.output.join("bandwidth.txt"), series.to_text())?;
            Ok(Outcome::ok(series.summary().to_text()))
        }
        Command::Reproduce { common, section } => {
            let cfg = common.resolve()?;
            let report = reproduce(cfg.seed, &section)?;
            if common.out.is_some() {
                write(&cfg.output.join("reproduce.toml"), report.to_text())?;
            }
            Ok(Outcome {
                stdout: report.to_table(),
                exit_code: if report.passed() { 0 } else { 1 },
            })
        }
    }
}

fn zero_error_stats(dt21: f64, dt32: f64, dt31: f64) -> TimingStats {
    let peak = |sigma: f64| PeakStats {
        center: 0.0,
        sigma,
        sigma_err: 0.0,
        counts: 0,
        background_per_bin: 0.0,
        background: 0.0,
    };
    TimingStats {
        dt21,
        dt32,
        dt31,
        dt21_err: 0.0,
        dt32_err: 0.0,
        dt31_err: 0.0,
        counts: 0,
        background: [0.0; 3],
        peaks: [peak(dt21), peak(dt32), peak(dt31)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
        let partial =
            RunConfig::parse("seed = 9\nduration = 10.0\n[analysis]\nwindow = 16\n").unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.analysis.window, 16);
        assert_eq!(partial.detectors, DetectorConfig::reference_triplets());
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let e = RunConfig::parse("duration = -1.0").unwrap_err();
        assert!(e.to_string().contains("duration"), "{e}");
        let e = RunConfig::parse("[analysis]\nwindow = 0").unwrap_err();
        assert!(e.to_string().contains("analysis.window"), "{e}");
        let e = RunConfig::parse("bogus = 1").unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
    }

    #[test]
    fn unknown_section_lists_sections() {
        let e = reproduce(1, &["nope".into()]).unwrap_err();
        let msg = e.to_string();
        for s in SECTIONS {
            assert!(msg.contains(s), "{msg}");
        }
    }

    #[test]
    fn gaussian_section_passes() {
        let r = reproduce(1, &["gaussian".into()]).unwrap();
        assert!(r.passed(), "{}", r.to_table());
        assert!(r.rows.iter().all(|row| row.section == "gaussian"));
    }

    #[test]
    fn witness_of_quoted_values() {
        let stats = zero_error_stats(0.37, 0.162, 0.31);
        let bw = SeriesSummary {
            scans: 1,
            mean: 6.0,
            std: 2.0,
        };
        let w = witness_from_stats(
            &stats,
            &bw,
            BandwidthConvention::Angular,
            Provenance::Measured,
        )
        .unwrap();
        assert_eq!(w.classification, Classification::GenuineTripartite);
        let inflated = zero_error_stats(37.0, 16.2, 31.0);
        let w = witness_from_stats(
            &inflated,
            &bw,
            BandwidthConvention::Angular,
            Provenance::Measured,
        )
        .unwrap();
        // Sum forms recover, one product stays below its bound.
        assert_ne!(w.classification, Classification::GenuineTripartite);
        assert!(w.sum_values.iter().all(|v| *v > w.bounds.sum));
        assert!(w.triple_sum_value > w.bounds.triple_sum);
    }

    #[test]
    fn pair_arguments_parse() {
        assert_eq!(parse_pair("1,2"), Ok([1, 2]));
        assert!(parse_pair("12").is_err());
    }
}
