//! Fabry-Perot pump-line scans: forward model and bandwidth recovery.
//!
//! "Bandwidth" is the standard deviation of the optical frequency ν in MHz.
//! The transmitted line is that Gaussian convolved with a Lorentzian
//! instrument response of the given FWHM (a Voigt profile).

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::source::BandwidthDrift;

const WEIDEMAN_N: usize = 32;
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

fn weideman_coefficients() -> &'static (f64, [f64; WEIDEMAN_N]) {
    static COEFFS: OnceLock<(f64, [f64; WEIDEMAN_N])> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let n = WEIDEMAN_N;
        let m = 2 * n;
        let l = (n as f64 / 2f64.sqrt()).sqrt();
        let f = |k: i64| {
            let t = l * (k as f64 * PI / (2 * m) as f64).tan();
            (-t * t).exp() * (l * l + t * t)
        };
        let mut a = [0.0; WEIDEMAN_N];
        for (j, aj) in a.iter_mut().enumerate() {
            let order = (j + 1) as f64;
            let s: f64 = (-(m as i64) + 1..m as i64)
                .map(|k| f(k) * (TAU * k as f64 * order / (2 * m) as f64).cos())
                .sum();
            *aj = s / (2 * m) as f64;
        }
        (l, a)
    })
}

/// Faddeeva function `w(z) = exp(-z²) erfc(-iz)` for `Im z ≥ 0`
/// (rational approximation, relative accuracy near 1e-13 for moderate z).
pub fn faddeeva(z: Complex64) -> Complex64 {
    let (l, a) = weideman_coefficients();
    let i = Complex64::i();
    let lz = *l - i * z;
    let zz = (*l + i * z) / lz;
    let mut p = Complex64::new(0.0, 0.0);
    for &c in a.iter().rev() {
        p = p * zz + c;
    }
    2.0 * p / (lz * lz) + (1.0 / PI.sqrt()) / lz
}

/// Area-normalized Voigt profile: Gaussian std `sigma` convolved with a
/// Lorentzian of half width `gamma`.
pub fn voigt(x: f64, sigma: f64, gamma: f64) -> f64 {
    if gamma <= 0.0 {
        return (-0.5 * (x / sigma).powi(2)).exp() / (sigma * TAU.sqrt());
    }
    if sigma <= 0.0 {
        return gamma / (PI * (x * x + gamma * gamma));
    }
    let z = Complex64::new(x, gamma) / (sigma * 2f64.sqrt());
    faddeeva(z).re / (sigma * TAU.sqrt())
}

fn line(x: f64, amplitude: f64, center: f64, sigma: f64, gamma: f64) -> f64 {
    amplitude * voigt(x - center, sigma, gamma) / voigt(0.0, sigma, gamma)
}

/// One interferometer sweep around the pump line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FPScan {
    pub offsets_mhz: Vec<f64>,
    pub intensities: Vec<f64>,
    /// Seconds since run start.
    pub timestamp: f64,
}

impl FPScan {
    pub const MIN_SAMPLES: usize = 100;

    pub fn to_columns(&self) -> String {
        let mut s = format!("# timestamp_s {}\n# offset_MHz intensity\n", self.timestamp);
        for (f, y) in self.offsets_mhz.iter().zip(&self.intensities) {
            let _ = writeln!(s, "{f:.6} {y:.9e}");
        }
        s
    }

    pub fn from_columns(text: &str) -> Result<Self> {
        let mut scan = FPScan {
            offsets_mhz: Vec::new(),
            intensities: Vec::new(),
            timestamp: 0.0,
        };
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix("# timestamp_s") {
                scan.timestamp = rest.trim().parse().map_err(|_| bad_line(n, raw))?;
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(f)), Some(Ok(y)), None) => {
                    scan.offsets_mhz.push(f);
                    scan.intensities.push(y);
                }
                _ => return Err(bad_line(n, raw)),
            }
        }
        Ok(scan)
    }
}

fn bad_line(n: usize, raw: &str) -> Error {
    Error::InvalidConfig {
        field: format!("scan line {}", n + 1),
        reason: format!("expected two numbers, got {raw:?}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSettings {
    /// Lorentzian instrument FWHM, MHz.
    pub instrument_width: f64,
    /// Relative std of the multiplicative intensity noise.
    pub noise_level: f64,
    pub points: usize,
    /// Half span of the sweep; widened automatically for broad lines.
    pub half_span: f64,
    /// Seconds between scans in a series.
    pub cadence: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            instrument_width: 1.0,
            noise_level: 0.05,
            points: 201,
            half_span: 40.0,
            cadence: 300.0,
        }
    }
}

impl ScanSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Error::InvalidConfig {
            field: format!("pump.{field}"),
            reason,
        };
        if !(self.instrument_width.is_finite() && self.instrument_width >= 0.0) {
            return Err(bad("instrument_width", "must be non-negative".into()));
        }
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return Err(bad("noise_level", "must be non-negative".into()));
        }
        if self.points < FPScan::MIN_SAMPLES {
            return Err(bad(
                "points",
                format!("need at least {}", FPScan::MIN_SAMPLES),
            ));
        }
        if !(self.half_span.is_finite() && self.half_span > 0.0) {
            return Err(bad("half_span", "must be positive".into()));
        }
        if !(self.cadence.is_finite() && self.cadence > 0.0) {
            return Err(bad("cadence", "must be positive".into()));
        }
        Ok(())
    }
}

fn scan_with(
    true_bandwidth: f64,
    settings: &ScanSettings,
    timestamp: f64,
    rng: &mut impl Rng,
) -> Result<FPScan> {
    settings.validate()?;
    if !(true_bandwidth.is_finite() && true_bandwidth > 0.0) {
        return Err(Error::InvalidConfig {
            field: "true_bandwidth".into(),
            reason: format!("must be positive, got {true_bandwidth}"),
        });
    }
    let gamma = 0.5 * settings.instrument_width;
    let half = settings.half_span.max(6.0 * (true_bandwidth + gamma));
    let n = settings.points;
    let mut scan = FPScan {
        offsets_mhz: Vec::with_capacity(n),
        intensities: Vec::with_capacity(n),
        timestamp,
    };
    for k in 0..n {
        let f = -half + 2.0 * half * k as f64 / (n - 1) as f64;
        let clean = line(f, 1.0, 0.0, true_bandwidth, gamma);
        let noise: f64 = rng.sample(StandardNormal);
        scan.offsets_mhz.push(f);
        scan.intensities
            .push((clean * (1.0 + settings.noise_level * noise)).max(0.0));
    }
    Ok(scan)
}

/// A single noisy scan of a line with std `true_bandwidth` MHz.
pub fn simulate_scan(true_bandwidth: f64, settings: &ScanSettings, seed: u64) -> Result<FPScan> {
    scan_with(
        true_bandwidth,
        settings,
        0.0,
        &mut SeedTree::new(seed).stream("scan"),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthEstimate {
    /// Deconvolved source bandwidth (std of ν), MHz.
    pub bandwidth: f64,
    pub center: f64,
    pub amplitude: f64,
    /// RMS fit residual relative to the fitted amplitude.
    pub residual: f64,
    pub iterations: usize,
}

fn initial_guess(scan: &FPScan, gamma: f64) -> Result<[f64; 3]> {
    let y = &scan.intensities;
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::NoPeak("empty scan".into()))?;
    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    if !(ymax > 0.0) || median > 0.5 * ymax {
        return Err(Error::NoPeak("no dominant peak in scan".into()));
    }
    let above = y.iter().filter(|&&v| v >= 0.5 * ymax).count();
    let df = (scan.offsets_mhz[scan.offsets_mhz.len() - 1] - scan.offsets_mhz[0])
        / (scan.offsets_mhz.len() - 1) as f64;
    let fwhm_v = above as f64 * df;
    let fl = 2.0 * gamma;
    let fg2 = (fwhm_v - 0.5346 * fl).powi(2) - 0.2166 * fl * fl;
    let sigma = (fg2.max(0.0).sqrt() / FWHM_PER_SIGMA).max(df);
    Ok([ymax, scan.offsets_mhz[imax], sigma.ln()])
}

fn residuals(scan: &FPScan, p: &[f64; 3], gamma: f64, out: &mut Vec<f64>) -> f64 {
    out.clear();
    let sigma = p[2].exp();
    let norm = voigt(0.0, sigma, gamma);
    let mut ss = 0.0;
    for (&f, &y) in scan.offsets_mhz.iter().zip(&scan.intensities) {
        let r = y - p[0] * voigt(f - p[1], sigma, gamma) / norm;
        ss += r * r;
        out.push(r);
    }
    ss
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    if !(d.abs() > 0.0) || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (col, xc) in x.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        *xc = det(&m) / d;
    }
    Some(x)
}

/// Least-squares Voigt fit with the instrument width held fixed;
/// returns the deconvolved Gaussian width.
pub fn estimate_bandwidth(scan: &FPScan, instrument_width: f64) -> Result<BandwidthEstimate> {
    if scan.offsets_mhz.len() != scan.intensities.len() || scan.offsets_mhz.len() < 3 {
        return Err(Error::NoPeak("scan has too few samples".into()));
    }
    let gamma = 0.5 * instrument_width.max(0.0);
    let mut p = initial_guess(scan, gamma)?;
    let n = scan.offsets_mhz.len();
    let mut r = Vec::with_capacity(n);
    let mut trial = Vec::with_capacity(n);
    let mut cost = residuals(scan, &p, gamma, &mut r);
    let mut lambda = 1e-3;
    let mut jac = vec![[0.0; 3]; n];
    for iter in 1..=200 {
        for k in 0..3 {
            let h = 1e-6 * p[k].abs().max(1e-3);
            let mut q = p;
            q[k] += h;
            residuals(scan, &q, gamma, &mut trial);
            for i in 0..n {
                // derivative of the model, i.e. minus that of the residual
                jac[i][k] = (r[i] - trial[i]) / h;
            }
        }
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for i in 0..n {
            for a in 0..3 {
                jtr[a] += jac[i][a] * r[i];
                for b in 0..3 {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for (a, row) in damped.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(1e-12);
            }
            let Some(step) = solve3(damped, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let q = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let c = residuals(scan, &q, gamma, &mut trial);
            if c.is_finite() && c < cost {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                p = q;
                cost = c;
                std::mem::swap(&mut r, &mut trial);
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-12 {
                    return finish(p, cost, n, iter);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return finish(p, cost, n, iter);
        }
    }
    Err(Error::FitFailed(
        "Levenberg-Marquardt did not converge in 200 iterations".into(),
    ))
}

fn finish(p: [f64; 3], cost: f64, n: usize, iterations: usize) -> Result<BandwidthEstimate> {
    let bandwidth = p[2].exp();
    if !(bandwidth.is_finite() && bandwidth > 0.0 && p[0] > 0.0) {
        return Err(Error::FitFailed(format!("unphysical fit parameters {p:?}")));
    }
    Ok(BandwidthEstimate {
        bandwidth,
        center: p[1],
        amplitude: p[0],
        residual: (cost / n as f64).sqrt() / p[0],
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSample {
    pub timestamp: f64,
    pub bandwidth: f64,
    pub truth: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSeries {
    pub samples: Vec<BandwidthSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub scans: usize,
    /// MHz.
    pub mean: f64,
    /// Sample standard deviation, MHz.
    pub std: f64,
}

impl SeriesSummary {
    /// Pump bandwidth in rad/ns (angular std, 2π × ν std).
    pub fn mean_rad_per_ns(&self) -> f64 {
        crate::source::mhz_to_rad_per_ns(self.mean)
    }

    pub fn to_text(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            bandwidth: &'a SeriesSummary,
        }
        toml::to_string(&Doc { bandwidth: self }).expect("summary serializes")
    }

    pub fn parse(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            bandwidth: SeriesSummary,
        }
        toml::from_str::<Doc>(text)
            .map(|d| d.bandwidth)
            .map_err(|e| Error::InvalidConfig {
                field: "bandwidth".into(),
                reason: e.to_string(),
            })
    }
}

impl BandwidthSeries {
    pub fn summary(&self) -> SeriesSummary {
        let n = self.samples.len();
        let mean = self.samples.iter().map(|s| s.bandwidth).sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 {
            self.samples
                .iter()
                .map(|s| (s.bandwidth - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64
        } else {
            0.0
        };
        SeriesSummary {
            scans: n,
            mean,
            std: var.sqrt(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = self.summary().to_text();
        s.push_str("\n# timestamp_s bandwidth_MHz truth_MHz residual\n");
        for x in &self.samples {
            let _ = writeln!(
                s,
                "# {:.1} {:.6} {:.6} {:.3e}",
                x.timestamp, x.bandwidth, x.truth, x.residual
            );
        }
        s
    }
}

/// Scans the drifting pump line every `settings.cadence` seconds and fits
/// each scan. Scans are independent; each uses its own indexed stream.
pub fn monitor_series(
    drift: &BandwidthDrift,
    duration_s: f64,
    settings: &ScanSettings,
    seeds: &SeedTree,
) -> Result<BandwidthSeries> {
    settings.validate()?;
    let n = (duration_s / settings.cadence).floor() as u64 + 1;
    let samples = (0..n)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 * settings.cadence;
            let truth = drift.at(t) / crate::source::mhz_to_rad_per_ns(1.0);
            let mut rng = seeds.indexed("fp-scan", k);
            let scan = scan_with(truth, settings, t, &mut rng)?;
            let est = estimate_bandwidth(&scan, settings.instrument_width)?;
            Ok(BandwidthSample {
                timestamp: t,
                bandwidth: est.bandwidth,
                truth,
                residual: est.residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BandwidthSeries { samples })
}
