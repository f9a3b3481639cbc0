//! Coincidence extraction and timing statistics over time-tag streams.
//!
//! Matching is greedy and single-pass: a coincidence is emitted by the tag
//! that completes it, every tag is used at most once, and among several
//! candidates the one with the smallest `|t2 - t1|` wins (then smallest
//! `|t3 - t2|`, then earliest).

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::ttag::{TimeTag, TICK_NS};

/// 32 ticks ≈ 5 ns.
pub const DEFAULT_WINDOW: u64 = 32;
pub const MIN_COUNTS: u64 = 30;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Half-width of the signal region in units of the initial width estimate.
pub const SIGNAL_HALF_WIDTH_SIGMAS: f64 = 10.0;

/// Settings for peak-width estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsOptions {
    pub tick_ns: f64,
    /// Bins beyond this many initial widths from the peak are sidebands.
    pub signal_sigmas: f64,
    pub resamples: usize,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self {
            tick_ns: TICK_NS,
            signal_sigmas: SIGNAL_HALF_WIDTH_SIGMAS,
            resamples: BOOTSTRAP_RESAMPLES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TripletEvent {
    pub t1: u64,
    pub t2: u64,
    pub t3: u64,
}

impl TripletEvent {
    pub fn d21(&self) -> i64 {
        self.t2 as i64 - self.t1 as i64
    }
    pub fn d32(&self) -> i64 {
        self.t3 as i64 - self.t2 as i64
    }
    pub fn d31(&self) -> i64 {
        self.t3 as i64 - self.t1 as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairEvent {
    pub ta: u64,
    pub tb: u64,
}

impl PairEvent {
    pub fn delta(&self) -> i64 {
        self.tb as i64 - self.ta as i64
    }
}

fn check_stream(stream: &[TimeTag], window: u64) -> Result<()> {
    if window == 0 {
        return Err(Error::ZeroWindow);
    }
    for (i, w) in stream.windows(2).enumerate() {
        if w[1].tick < w[0].tick {
            return Err(Error::UnsortedStream {
                index: i + 1,
                tick: w[1].tick,
                previous: w[0].tick,
            });
        }
    }
    Ok(())
}

fn purge(buf: &mut VecDeque<u64>, now: u64, window: u64) {
    while let Some(&t) = buf.front() {
        if t + window < now {
            buf.pop_front();
        } else {
            break;
        }
    }
}

/// Sequential triple matcher over a sorted slice.
fn triples_sequential(stream: &[TimeTag], window: u64) -> Vec<TripletEvent> {
    let mut bufs: [VecDeque<u64>; 3] = Default::default();
    let mut out = Vec::new();
    for tag in stream {
        let ch = tag.channel as usize;
        if !(1..=3).contains(&ch) {
            continue;
        }
        let now = tag.tick;
        for b in bufs.iter_mut() {
            purge(b, now, window);
        }
        let c = ch - 1;
        let (oa, ob) = match c {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        if bufs[oa].is_empty() || bufs[ob].is_empty() {
            bufs[c].push_back(now);
            continue;
        }
        // All buffered tags lie in [now - window, now], so every
        // combination is mutually within the window.
        let mut best: Option<((u64, u64, u64, u64), usize, usize)> = None;
        for (ia, &ta) in bufs[oa].iter().enumerate() {
            for (ib, &tb) in bufs[ob].iter().enumerate() {
                let mut t = [0u64; 3];
                t[c] = now;
                t[oa] = ta;
                t[ob] = tb;
                let key = (
                    t[1].abs_diff(t[0]),
                    t[2].abs_diff(t[1]),
                    ta.min(tb),
                    ta.max(tb),
                );
                if best.is_none_or(|(k, _, _)| key < k) {
                    best = Some((key, ia, ib));
                }
            }
        }
        let (_, ia, ib) = best.expect("non-empty buffers");
        let ta = bufs[oa].remove(ia).expect("index valid");
        let tb = bufs[ob].remove(ib).expect("index valid");
        let mut t = [0u64; 3];
        t[c] = now;
        t[oa] = ta;
        t[ob] = tb;
        out.push(TripletEvent {
            t1: t[0],
            t2: t[1],
            t3: t[2],
        });
    }
    out
}

/// Splits a sorted stream at gaps longer than `window`, aiming for about
/// `target` tags per piece. No coincidence can span such a gap and every
/// buffer is empty after it, so pieces can be matched independently.
fn split_at_gaps(stream: &[TimeTag], window: u64, target: usize) -> Vec<&[TimeTag]> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut i = target;
    while i < stream.len() {
        if stream[i].tick - stream[i - 1].tick > window {
            pieces.push(&stream[start..i]);
            start = i;
            i += target;
        } else {
            i += 1;
        }
    }
    pieces.push(&stream[start..]);
    pieces
}

/// Extracts three-fold coincidences (one tag per channel 1, 2, 3, pairwise
/// within `window` ticks). Tags on other channels are ignored.
pub fn find_triples(stream: &[TimeTag], window: u64) -> Result<Vec<TripletEvent>> {
    check_stream(stream, window)?;
    Ok(triples_sequential(stream, window))
}

/// As [`find_triples`], matching independent pieces of the stream on the
/// rayon pool. The result is identical to the sequential one.
pub fn find_triples_parallel(
    stream: &[TimeTag],
    window: u64,
    chunk: usize,
) -> Result<Vec<TripletEvent>> {
    check_stream(stream, window)?;
    let pieces = split_at_gaps(stream, window, chunk.max(1));
    let parts: Vec<Vec<TripletEvent>> = pieces
        .into_par_iter()
        .map(|p| triples_sequential(p, window))
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

fn doubles_sequential(stream: &[TimeTag], a: u8, b: u8, window: u64) -> Vec<PairEvent> {
    let mut bufs: [VecDeque<u64>; 2] = Default::default();
    let mut out = Vec::new();
    for tag in stream {
        let side = if tag.channel == a {
            0
        } else if tag.channel == b {
            1
        } else {
            continue;
        };
        let now = tag.tick;
        purge(&mut bufs[0], now, window);
        purge(&mut bufs[1], now, window);
        let other = &mut bufs[1 - side];
        // smallest |Δ| is the most recent buffered tag
        if let Some(t) = other.pop_back() {
            out.push(if side == 0 {
                PairEvent { ta: now, tb: t }
            } else {
                PairEvent { ta: t, tb: now }
            });
        } else {
            bufs[side].push_back(now);
        }
    }
    out
}

/// Two-fold coincidences between channels `a` and `b`, with the histogram
/// of `t_b - t_a` in ticks.
pub fn find_doubles(
    stream: &[TimeTag],
    channels: (u8, u8),
    window: u64,
) -> Result<(Vec<PairEvent>, Histogram1D)> {
    check_stream(stream, window)?;
    if channels.0 == channels.1 {
        return Err(Error::InvalidConfig {
            field: "channels".into(),
            reason: "doubles need two distinct channels".into(),
        });
    }
    let pairs = doubles_sequential(stream, channels.0, channels.1, window);
    let mut h = Histogram1D::new(-(window as i64), window as i64);
    for p in &pairs {
        h.add(p.delta());
    }
    Ok((pairs, h))
}

/// Counts per integer tick difference.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Histogram1D {
    pub counts: BTreeMap<i64, u64>,
    /// Inclusive range the histogram covers, used for rendering and for
    /// locating background sidebands.
    pub lo: i64,
    pub hi: i64,
}

impl Histogram1D {
    pub fn new(lo: i64, hi: i64) -> Self {
        Self {
            counts: BTreeMap::new(),
            lo,
            hi,
        }
    }

    pub fn add(&mut self, bin: i64) {
        self.add_n(bin, 1);
    }

    pub fn add_n(&mut self, bin: i64, n: u64) {
        if n > 0 {
            *self.counts.entry(bin).or_insert(0) += n;
            self.lo = self.lo.min(bin);
            self.hi = self.hi.max(bin);
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn get(&self, bin: i64) -> u64 {
        self.counts.get(&bin).copied().unwrap_or(0)
    }

    /// Columnar text: `bin_center_ns count`, one line per bin in range.
    pub fn to_columns(&self, tick_ns: f64) -> String {
        let mut s = String::from("# bin_center_ns count\n");
        if self.counts.is_empty() && self.lo > self.hi {
            return s;
        }
        for bin in self.lo..=self.hi {
            let _ = writeln!(s, "{:.4} {}", bin as f64 * tick_ns, self.get(bin));
        }
        s
    }
}

/// Triple counts over `(t2 - t1, t3 - t2)` in one-tick bins.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Histogram2D {
    pub counts: BTreeMap<(i64, i64), u64>,
    /// Rendering bounds per axis, inclusive, in ticks.
    pub bounds: ((i64, i64), (i64, i64)),
}

impl Histogram2D {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Columnar text: `t21_ns t32_ns count` over the rendering bounds.
    pub fn to_columns(&self, tick_ns: f64) -> String {
        let mut s = String::from("# t21_ns t32_ns count\n");
        let ((a0, a1), (b0, b1)) = self.bounds;
        for x in a0..=a1 {
            for y in b0..=b1 {
                let n = self.counts.get(&(x, y)).copied().unwrap_or(0);
                let _ = writeln!(
                    s,
                    "{:.4} {:.4} {}",
                    x as f64 * tick_ns,
                    y as f64 * tick_ns,
                    n
                );
            }
        }
        s
    }
}

/// Bins triples; rendering bounds default to `±window` on both axes.
pub fn histogram2d(triples: &[TripletEvent], window: u64) -> Histogram2D {
    let w = window as i64;
    let mut h = Histogram2D {
        counts: BTreeMap::new(),
        bounds: ((-w, w), (-w, w)),
    };
    for t in triples {
        *h.counts.entry((t.d21(), t.d32())).or_insert(0) += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marginals {
    pub d21: Histogram1D,
    pub d32: Histogram1D,
    pub d31: Histogram1D,
}

/// Projects onto `t2 - t1`, `t3 - t2` and the diagonal `t3 - t1`.
pub fn marginals(h: &Histogram2D) -> Marginals {
    let ((a0, a1), (b0, b1)) = h.bounds;
    let mut d21 = Histogram1D::new(a0, a1);
    let mut d32 = Histogram1D::new(b0, b1);
    let mut d31 = Histogram1D::new(a0.min(b0), a1.max(b1));
    for (&(x, y), &n) in &h.counts {
        d21.add_n(x, n);
        d32.add_n(y, n);
        d31.add_n(x + y, n);
    }
    Marginals { d21, d32, d31 }
}

/// Width of one timing peak after background subtraction, in ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakStats {
    pub center: f64,
    pub sigma: f64,
    pub sigma_err: f64,
    pub counts: u64,
    /// Estimated background counts per bin.
    pub background_per_bin: f64,
    /// Estimated background counts inside the signal region.
    pub background: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub dt21: f64,
    pub dt32: f64,
    pub dt31: f64,
    pub dt21_err: f64,
    pub dt32_err: f64,
    pub dt31_err: f64,
    pub counts: u64,
    pub background: [f64; 3],
    pub peaks: [PeakStats; 3],
}

impl TimingStats {
    pub fn to_text(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            timing: &'a TimingStats,
        }
        toml::to_string(&Doc { timing: self }).expect("timing stats serialize")
    }
}

/// Sidebands and signal region of one peak, fixed from the observed data.
#[derive(Debug, Clone, Copy)]
struct Regions {
    lo: i64,
    hi: i64,
    sig_lo: i64,
    sig_hi: i64,
}

impl Regions {
    fn locate(h: &Histogram1D, signal_sigmas: f64) -> Regions {
        let total = h.total() as f64;
        // robust center and width: weighted median and MAD
        let quantile = |q: f64| {
            let mut acc = 0.0;
            for (&bin, &n) in &h.counts {
                acc += n as f64;
                if acc >= q * total {
                    return bin as f64;
                }
            }
            h.hi as f64
        };
        let median = quantile(0.5);
        let mut dev: Vec<(f64, u64)> = h
            .counts
            .iter()
            .map(|(&b, &n)| ((b as f64 - median).abs(), n))
            .collect();
        dev.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let mut mad = 0.0;
        for (d, n) in dev {
            acc += n as f64;
            if acc >= 0.5 * total {
                mad = d;
                break;
            }
        }
        let sigma0 = (1.4826 * mad).max(1.0);
        let half = (signal_sigmas * sigma0).ceil() as i64;
        let center = median.round() as i64;
        // the outer quarter of the range on each side is always sideband
        let reserve = (h.hi - h.lo + 1) / 4;
        Regions {
            lo: h.lo,
            hi: h.hi,
            sig_lo: (center - half).max(h.lo + reserve).min(center),
            sig_hi: (center + half).min(h.hi - reserve).max(center),
        }
    }
}

/// `(center, sigma, background per bin, net counts)` in ticks.
fn peak_moments(h: &Histogram1D, r: &Regions) -> (f64, f64, f64, f64) {
    let side_bins = (r.sig_lo - r.lo) + (r.hi - r.sig_hi);
    let side_counts: u64 = h
        .counts
        .iter()
        .filter(|(&b, _)| b < r.sig_lo || b > r.sig_hi)
        .map(|(_, &n)| n)
        .sum();
    let bkg = if side_bins > 0 {
        side_counts as f64 / side_bins as f64
    } else {
        0.0
    };
    let mut w = 0.0;
    let mut m1 = 0.0;
    for bin in r.sig_lo..=r.sig_hi {
        let net = h.get(bin) as f64 - bkg;
        w += net;
        m1 += net * bin as f64;
    }
    if w <= 0.0 {
        return (f64::NAN, f64::NAN, bkg, w);
    }
    let mean = m1 / w;
    let mut m2 = 0.0;
    for bin in r.sig_lo..=r.sig_hi {
        let net = h.get(bin) as f64 - bkg;
        m2 += net * (bin as f64 - mean).powi(2);
    }
    (mean, (m2 / w).max(0.0).sqrt(), bkg, w)
}

/// Background-subtracted width of a single timing peak.
///
/// A flat background is estimated from the sidebands outside ±10 initial
/// widths of the peak and subtracted bin by bin; the width is the standard
/// deviation of the net counts. The uncertainty is the spread over
/// multinomial resamples of the bins.
pub fn peak_stats(
    h: &Histogram1D,
    opts: &StatsOptions,
    seeds: &SeedTree,
    label: &str,
) -> Result<PeakStats> {
    let tick_ns = opts.tick_ns;
    let total = h.total();
    if total < MIN_COUNTS {
        return Err(Error::InsufficientCounts {
            count: total,
            required: MIN_COUNTS,
        });
    }
    let regions = Regions::locate(h, opts.signal_sigmas);
    let (center, sigma, bkg, net) = peak_moments(h, &regions);
    let sig_bins = (regions.sig_hi - regions.sig_lo + 1) as f64;
    let side_bins = ((regions.sig_lo - regions.lo) + (regions.hi - regions.sig_hi)) as f64;
    let background = bkg * sig_bins;
    // net counts must exceed 5 standard deviations of the background estimate
    let noise = (background * (1.0 + sig_bins / side_bins.max(1.0))).sqrt();
    if !(net > 0.0) || !sigma.is_finite() || net < 5.0 * noise {
        return Err(Error::NoPeak(label.to_string()));
    }

    let bins: Vec<(i64, u64)> = h.counts.iter().map(|(&b, &n)| (b, n)).collect();
    let cumulative: Vec<u64> = bins
        .iter()
        .scan(0u64, |acc, (_, n)| {
            *acc += n;
            Some(*acc)
        })
        .collect();
    let mut rng = seeds.stream(&format!("bootstrap-{label}"));
    let mut widths = Vec::with_capacity(opts.resamples);
    for _ in 0..opts.resamples {
        let mut sample = Histogram1D::new(h.lo, h.hi);
        for _ in 0..total {
            let u = rng.random_range(0..total);
            let k = cumulative.partition_point(|&c| c <= u);
            sample.add(bins[k].0);
        }
        let (_, s, _, _) = peak_moments(&sample, &regions);
        if s.is_finite() {
            widths.push(s);
        }
    }
    let sigma_err = if widths.len() > 1 {
        let m = widths.iter().sum::<f64>() / widths.len() as f64;
        (widths.iter().map(|w| (w - m).powi(2)).sum::<f64>() / (widths.len() - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(PeakStats {
        center: center * tick_ns,
        sigma: sigma * tick_ns,
        sigma_err: sigma_err * tick_ns,
        counts: total,
        background_per_bin: bkg,
        background,
    })
}

/// Timing widths of all three marginals of a triple histogram.
pub fn timing_stats(h: &Histogram2D, opts: &StatsOptions, seeds: &SeedTree) -> Result<TimingStats> {
    let total = h.total();
    if total < MIN_COUNTS {
        return Err(Error::InsufficientCounts {
            count: total,
            required: MIN_COUNTS,
        });
    }
    let m = marginals(h);
    let p21 = peak_stats(&m.d21, opts, seeds, "t2-t1")?;
    let p32 = peak_stats(&m.d32, opts, seeds, "t3-t2")?;
    let p31 = peak_stats(&m.d31, opts, seeds, "t3-t1")?;
    Ok(TimingStats {
        dt21: p21.sigma,
        dt32: p32.sigma,
        dt31: p31.sigma,
        dt21_err: p21.sigma_err,
        dt32_err: p32.sigma_err,
        dt31_err: p31.sigma_err,
        counts: total,
        background: [p21.background, p32.background, p31.background],
        peaks: [p21, p32, p31],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn tags(v: &[(u8, u64)]) -> Vec<TimeTag> {
        v.iter().map(|&(c, t)| TimeTag::new(c, t)).collect()
    }

    #[test]
    fn simple_triple() {
        let s = tags(&[(1, 1000), (2, 1002), (3, 1003)]);
        assert_eq!(
            find_triples(&s, 32).unwrap(),
            vec![TripletEvent {
                t1: 1000,
                t2: 1002,
                t3: 1003
            }]
        );
        assert!(find_triples(&s, 1).unwrap().is_empty());
    }

    #[test]
    fn mutual_window_is_enforced() {
        // t3 - t1 = 40 > 32 although both neighbours are within 32 of t2
        let s = tags(&[(1, 1000), (2, 1020), (3, 1040)]);
        assert!(find_triples(&s, 32).unwrap().is_empty());
    }

    #[test]
    fn each_tag_used_once_and_tie_break() {
        let s = tags(&[(1, 100), (1, 104), (2, 105), (3, 106), (3, 107)]);
        let t = find_triples(&s, 32).unwrap();
        assert_eq!(
            t,
            vec![TripletEvent {
                t1: 104,
                t2: 105,
                t3: 106
            }]
        );
    }

    #[test]
    fn unsorted_stream_is_rejected() {
        let s = tags(&[(1, 10), (2, 5)]);
        assert!(matches!(
            find_triples(&s, 32),
            Err(Error::UnsortedStream { index: 1, .. })
        ));
        assert!(matches!(find_triples(&s, 0), Err(Error::ZeroWindow)));
        assert!(find_doubles(&s, (1, 2), 32).is_err());
    }

    #[test]
    fn doubles_and_disjoint_streams() {
        let s = tags(&[(1, 10), (2, 12), (1, 500), (3, 501), (2, 900)]);
        let (pairs, h) = find_doubles(&s, (1, 2), 32).unwrap();
        assert_eq!(pairs, vec![PairEvent { ta: 10, tb: 12 }]);
        assert_eq!(h.get(2), 1);
        let s = tags(&[(1, 10), (1, 20), (2, 1000), (2, 1010)]);
        assert!(find_doubles(&s, (1, 2), 32).unwrap().0.is_empty());
    }

    #[test]
    fn single_triple_histogram() {
        let t = [TripletEvent {
            t1: 10,
            t2: 12,
            t3: 15,
        }];
        let h = histogram2d(&t, 32);
        assert_eq!(h.counts.len(), 1);
        assert_eq!(h.counts[&(2, 3)], 1);
        let m = marginals(&h);
        assert_eq!((m.d21.total(), m.d32.total(), m.d31.total()), (1, 1, 1));
        assert_eq!(m.d31.get(5), 1);
        let e = histogram2d(&[], 32);
        assert_eq!(e.total(), 0);
        assert_eq!(marginals(&e).d21.total(), 0);
    }

    fn gaussian_hist(sigma_ticks: f64, n: usize, bkg_per_bin: u64, seed: u64) -> Histogram1D {
        let mut rng = SeedTree::new(seed).stream("h");
        let d = Normal::new(3.0, sigma_ticks).unwrap();
        let mut h = Histogram1D::new(-32, 32);
        for _ in 0..n {
            h.add(d.sample(&mut rng).floor() as i64);
        }
        for b in -32..=32 {
            h.add_n(b, bkg_per_bin);
        }
        h
    }

    #[test]
    fn delta_peak_is_quantization_limited() {
        let mut h = Histogram1D::new(-32, 32);
        h.add_n(4, 500);
        let p = peak_stats(&h, &StatsOptions::default(), &SeedTree::new(1), "delta").unwrap();
        assert!(p.sigma <= TICK_NS / 12f64.sqrt() + TICK_NS);
    }

    #[test]
    fn background_subtraction_recovers_width() {
        let clean = gaussian_hist(2.2, 20_000, 0, 11);
        let noisy = gaussian_hist(2.2, 20_000, 40, 11);
        let seeds = SeedTree::new(2);
        let a = peak_stats(&clean, &StatsOptions::default(), &seeds, "a").unwrap();
        let b = peak_stats(&noisy, &StatsOptions::default(), &seeds, "b").unwrap();
        assert!(
            (b.sigma / a.sigma - 1.0).abs() < 0.05,
            "{} {}",
            a.sigma,
            b.sigma
        );
        assert!((b.background_per_bin - 40.0).abs() < 5.0);
        assert!(a.sigma_err > 0.0 && a.sigma_err < 0.05 * a.sigma);
    }

    #[test]
    fn too_few_counts_and_flat_histograms_fail() {
        let mut h = Histogram1D::new(-32, 32);
        h.add_n(0, 10);
        assert!(matches!(
            peak_stats(&h, &StatsOptions::default(), &SeedTree::new(0), "x"),
            Err(Error::InsufficientCounts { .. })
        ));
        let mut rng = SeedTree::new(9).stream("flat");
        let mut flat = Histogram1D::new(-32, 32);
        for _ in 0..6500 {
            flat.add(rng.random_range(-32..=32));
        }
        assert!(matches!(
            peak_stats(&flat, &StatsOptions::default(), &SeedTree::new(0), "flat"),
            Err(Error::NoPeak(_))
        ));
    }

    #[test]
    fn columns_render_every_bin() {
        let mut h = Histogram1D::new(-2, 2);
        h.add(1);
        let text = h.to_columns(TICK_NS);
        assert_eq!(text.lines().count(), 6);
        assert!(text.contains("0.1560 1"));
    }

    fn random_stream(seed: u64, n: usize) -> Vec<TimeTag> {
        let mut rng = SeedTree::new(seed).stream("s");
        let mut t = 0u64;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            t += rng.random_range(0..40);
            out.push(TimeTag::new(rng.random_range(1..=3), t));
        }
        out.sort_unstable();
        out
    }

    #[test]
    fn parallel_matches_sequential() {
        let s = random_stream(3, 200_000);
        let seq = find_triples(&s, 32).unwrap();
        assert!(!seq.is_empty());
        for chunk in [1, 100, 5000, 1 << 20] {
            assert_eq!(find_triples_parallel(&s, 32, chunk).unwrap(), seq);
        }
    }

    proptest! {
        #[test]
        fn shuffle_then_sort_is_order_independent(seed in 0u64..1000) {
            let s = random_stream(seed, 2000);
            let mut shuffled = s.clone();
            shuffled.shuffle(&mut SeedTree::new(seed).stream("shuffle"));
            shuffled.sort_unstable();
            prop_assert_eq!(find_triples(&shuffled, 16).unwrap(), find_triples(&s, 16).unwrap());
        }

        #[test]
        fn histogram_conserves_counts(seed in 0u64..1000) {
            let s = random_stream(seed, 3000);
            let t = find_triples(&s, 24).unwrap();
            let h = histogram2d(&t, 24);
            prop_assert_eq!(h.total(), t.len() as u64);
            let m = marginals(&h);
            prop_assert_eq!(m.d21.total(), t.len() as u64);
            prop_assert_eq!(m.d32.total(), t.len() as u64);
            prop_assert_eq!(m.d31.total(), t.len() as u64);
            for e in &t {
                prop_assert!(e.d21().abs() <= 24 && e.d32().abs() <= 24 && e.d31().abs() <= 24);
            }
        }
    }
}
