//! Monte Carlo cascaded-downconversion source and detection chain.
//!
//! Times are carried as integer picoseconds from the start of the run so
//! that multi-day runs keep sub-tick resolution; angular frequencies are in
//! rad/ns.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::ttag::{TimeTag, TICK_PS};

/// Speed of light in nm/ns.
const C_NM_PER_NS: f64 = 2.997_924_58e8;
const PS_PER_S: f64 = 1e12;
/// Emission is generated in independent slices of this length.
const SLICE_S: f64 = 600.0;
const DETECT_CHUNK: usize = 1 << 15;

/// Angular frequency in rad/ns of light at `wavelength_nm`.
pub fn angular_frequency(wavelength_nm: f64) -> f64 {
    TAU * C_NM_PER_NS / wavelength_nm
}

/// Converts a linear-frequency figure in MHz to rad/ns.
pub fn mhz_to_rad_per_ns(mhz: f64) -> f64 {
    TAU * mhz * 1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    /// Pump line center, rad/ns.
    pub pump_center: f64,
    /// Long-run mean of the pump bandwidth (std of ω_p), rad/ns.
    pub pump_bandwidth_mean: f64,
    /// Stationary standard deviation of the drifting bandwidth, rad/ns.
    pub pump_bandwidth_spread: f64,
    /// Correlation time of the bandwidth drift, s.
    pub drift_timescale: f64,
    /// Generated triples (or pairs) per second.
    pub pair_rate: f64,
    /// Center of photon 1, rad/ns.
    pub center_1: f64,
    /// Center of photon 2, rad/ns.
    pub center_2: f64,
    pub jsa_width_1: f64,
    pub jsa_width_2: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            pump_center: angular_frequency(404.0),
            pump_bandwidth_mean: mhz_to_rad_per_ns(6.0),
            pump_bandwidth_spread: mhz_to_rad_per_ns(2.0),
            drift_timescale: 1200.0,
            pair_rate: 0.75,
            center_1: angular_frequency(842.0),
            center_2: angular_frequency(1530.0),
            jsa_width_1: TAU * 1000.0,
            jsa_width_2: TAU * 1000.0,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pump_center", self.pump_center),
            ("pump_bandwidth_mean", self.pump_bandwidth_mean),
            ("drift_timescale", self.drift_timescale),
            ("pair_rate", self.pair_rate),
            ("center_1", self.center_1),
            ("center_2", self.center_2),
            ("jsa_width_1", self.jsa_width_1),
            ("jsa_width_2", self.jsa_width_2),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig {
                    field: format!("source.{field}"),
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if !(self.pump_bandwidth_spread.is_finite() && self.pump_bandwidth_spread >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "source.pump_bandwidth_spread".into(),
                reason: format!("must be non-negative, got {}", self.pump_bandwidth_spread),
            });
        }
        Ok(())
    }
}

/// Sampled trajectory of the pump bandwidth: a mean-reverting
/// (Ornstein-Uhlenbeck) process, linearly interpolated between knots.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthDrift {
    step_s: f64,
    knots: Vec<f64>,
}

impl BandwidthDrift {
    pub const STEP_S: f64 = 60.0;

    pub fn simulate(cfg: &SourceConfig, duration_s: f64, seeds: &SeedTree) -> Self {
        let step_s = Self::STEP_S;
        let n = (duration_s / step_s).ceil().max(0.0) as usize + 2;
        let mean = cfg.pump_bandwidth_mean;
        let spread = cfg.pump_bandwidth_spread;
        let floor = 0.05 * mean;
        let mut rng = seeds.stream("drift");
        let decay = (-step_s / cfg.drift_timescale).exp();
        let kick = spread * (1.0 - decay * decay).sqrt();
        let mut dev: f64 = if spread > 0.0 {
            spread * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        let mut knots = Vec::with_capacity(n);
        for _ in 0..n {
            knots.push((mean + dev).max(floor));
            if spread > 0.0 {
                dev = decay * dev + kick * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Self { step_s, knots }
    }

    /// Bandwidth (rad/ns) at time `t_s` seconds into the run.
    pub fn at(&self, t_s: f64) -> f64 {
        let x = (t_s / self.step_s).max(0.0);
        let i = x.floor() as usize;
        if i + 1 >= self.knots.len() {
            return *self.knots.last().expect("non-empty trajectory");
        }
        let f = x - i as f64;
        self.knots[i] * (1.0 - f) + self.knots[i + 1] * f
    }
}

/// One downconversion event before detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueEvent {
    /// Emission time, ps since the start of the run.
    pub t_emit_ps: u64,
    /// Pump photon angular frequency, rad/ns.
    pub pump: f64,
    /// Daughter angular frequencies, rad/ns; only the first `photons`
    /// entries are meaningful.
    pub omega: [f64; 3],
    pub photons: u8,
}

impl TrueEvent {
    pub fn total_omega(&self) -> f64 {
        self.omega[..self.photons as usize].iter().sum()
    }
}

fn poisson_times(rate: f64, start_ps: u64, len_s: f64, rng: &mut impl Rng) -> Vec<u64> {
    let mut out = Vec::new();
    if rate <= 0.0 || len_s <= 0.0 {
        return out;
    }
    let exp = Exp::new(rate).expect("positive rate");
    let mut t = 0.0;
    loop {
        t += exp.sample(rng);
        if t >= len_s {
            break;
        }
        out.push(start_ps + (t * PS_PER_S).round() as u64);
    }
    out
}

fn slices(duration_s: f64) -> Vec<(u64, f64)> {
    let n = (duration_s / SLICE_S).ceil() as u64;
    (0..n)
        .map(|k| {
            let start = k as f64 * SLICE_S;
            let len = (duration_s - start).min(SLICE_S);
            (k, len)
        })
        .collect()
}

fn generate(
    cfg: &SourceConfig,
    duration_s: f64,
    seeds: &SeedTree,
    photons: u8,
) -> Result<(Vec<TrueEvent>, BandwidthDrift)> {
    cfg.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::InvalidConfig {
            field: "duration".into(),
            reason: format!("must be positive, got {duration_s}"),
        });
    }
    let drift = BandwidthDrift::simulate(cfg, duration_s, seeds);
    let per_slice: Vec<Vec<TrueEvent>> = slices(duration_s)
        .into_par_iter()
        .map(|(k, len)| {
            let mut rng = seeds.indexed("emission", k);
            let start_ps = (k as f64 * SLICE_S * PS_PER_S) as u64;
            let times = poisson_times(cfg.pair_rate, start_ps, len, &mut rng);
            let n1 = Normal::new(cfg.center_1, cfg.jsa_width_1).expect("valid width");
            let n2 = Normal::new(cfg.center_2, cfg.jsa_width_2).expect("valid width");
            times
                .into_iter()
                .map(|t| {
                    let bw = drift.at(t as f64 / PS_PER_S);
                    let pump = cfg.pump_center + bw * rng.sample::<f64, _>(StandardNormal);
                    let w1 = n1.sample(&mut rng);
                    let omega = if photons == 3 {
                        let w2 = n2.sample(&mut rng);
                        [w1, w2, pump - w1 - w2]
                    } else {
                        [w1, pump - w1, 0.0]
                    };
                    TrueEvent {
                        t_emit_ps: t,
                        pump,
                        omega,
                        photons,
                    }
                })
                .collect()
        })
        .collect();
    Ok((per_slice.into_iter().flatten().collect(), drift))
}

/// Photon triplets: Poisson emission at `pair_rate`, pump frequency drawn
/// from the drifting pump line, `ω₁`, `ω₂` from the Gaussian joint spectra
/// and `ω₃ = ω_p − ω₁ − ω₂`.
pub fn generate_triplets(
    cfg: &SourceConfig,
    duration_s: f64,
    seeds: &SeedTree,
) -> Result<(Vec<TrueEvent>, BandwidthDrift)> {
    generate(cfg, duration_s, seeds, 3)
}

/// Photon pairs from a single downconversion stage, `ω₁ = ω_p − ω₀`.
pub fn generate_pairs(
    cfg: &SourceConfig,
    duration_s: f64,
    seeds: &SeedTree,
) -> Result<(Vec<TrueEvent>, BandwidthDrift)> {
    generate(cfg, duration_s, seeds, 2)
}

/// A gate opened on this channel by every tag of `trigger_channel`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub trigger_channel: u8,
    /// ns
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub efficiency: f64,
    /// Gaussian timing jitter, ns.
    pub jitter_sigma: f64,
    /// Dark counts per second, or per ns of open gate for a gated channel.
    pub dark_rate: f64,
    /// Fixed propagation delay, ns.
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub gate: Option<Gate>,
}

/// Detection chain; photon `k` of an event goes to channel `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub channels: Vec<ChannelConfig>,
    #[serde(default = "default_tick_ps")]
    pub tick_ps: u64,
}

fn default_tick_ps() -> u64 {
    TICK_PS
}

impl DetectorConfig {
    /// Si detector (ch 1), free-running InGaAs (ch 2) gating a second
    /// InGaAs detector (ch 3). The overall efficiency gives about 7
    /// detected triples per hour from 45 generated per minute.
    pub fn reference_triplets() -> Self {
        Self {
            channels: vec![
                ChannelConfig {
                    efficiency: 0.1037,
                    jitter_sigma: 0.326,
                    dark_rate: 100.0,
                    offset: 0.0,
                    gate: None,
                },
                ChannelConfig {
                    efficiency: 0.10,
                    jitter_sigma: 0.134,
                    dark_rate: 100.0,
                    offset: 0.0,
                    gate: None,
                },
                ChannelConfig {
                    efficiency: 0.25,
                    jitter_sigma: 0.0654,
                    dark_rate: 5e-5,
                    offset: 1.5,
                    gate: Some(Gate {
                        trigger_channel: 2,
                        width: 50.0,
                    }),
                },
            ],
            tick_ps: TICK_PS,
        }
    }

    /// Two free-running detectors for the single-stage pair experiment.
    pub fn reference_pairs() -> Self {
        let ch = ChannelConfig {
            efficiency: 0.3,
            jitter_sigma: 0.2074,
            dark_rate: 100.0,
            offset: 0.0,
            gate: None,
        };
        Self {
            channels: vec![ch, ch],
            tick_ps: TICK_PS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.len() > 255 {
            return Err(Error::InvalidConfig {
                field: "detectors.channels".into(),
                reason: "need between 1 and 255 channels".into(),
            });
        }
        if self.tick_ps == 0 {
            return Err(Error::InvalidConfig {
                field: "detectors.tick_ps".into(),
                reason: "must be positive".into(),
            });
        }
        for (i, c) in self.channels.iter().enumerate() {
            let name = |f: &str| format!("detectors.channels[{i}].{f}");
            if !(0.0..=1.0).contains(&c.efficiency) {
                return Err(Error::InvalidConfig {
                    field: name("efficiency"),
                    reason: format!("must lie in [0, 1], got {}", c.efficiency),
                });
            }
            for (f, v) in [("jitter_sigma", c.jitter_sigma), ("dark_rate", c.dark_rate)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidConfig {
                        field: name(f),
                        reason: format!("must be non-negative, got {v}"),
                    });
                }
            }
            if !c.offset.is_finite() {
                return Err(Error::InvalidConfig {
                    field: name("offset"),
                    reason: "must be finite".into(),
                });
            }
            if let Some(g) = c.gate {
                if !(g.width.is_finite() && g.width > 0.0) {
                    return Err(Error::InvalidConfig {
                        field: name("gate.width"),
                        reason: format!("must be positive, got {}", g.width),
                    });
                }
                let t = g.trigger_channel as usize;
                if t == 0 || t > self.channels.len() || t == i + 1 {
                    return Err(Error::InvalidConfig {
                        field: name("gate.trigger_channel"),
                        reason: format!("channel {t} cannot trigger channel {}", i + 1),
                    });
                }
                if self.channels[t - 1].gate.is_some() {
                    return Err(Error::InvalidConfig {
                        field: name("gate.trigger_channel"),
                        reason: "trigger channel must be free-running".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Union of `[start, end]` intervals in ps, sorted and disjoint.
fn merge_gates(mut triggers: Vec<u64>, width_ps: u64) -> Vec<(u64, u64)> {
    triggers.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::new();
    for t in triggers {
        let end = t + width_ps;
        match out.last_mut() {
            Some(last) if t <= last.1 => last.1 = last.1.max(end),
            _ => out.push((t, end)),
        }
    }
    out
}

fn in_gates(gates: &[(u64, u64)], t: u64) -> bool {
    let idx = gates.partition_point(|g| g.0 <= t);
    idx > 0 && t <= gates[idx - 1].1
}

/// Passes events through the detectors: Bernoulli survival, propagation
/// offset, Gaussian jitter, dark counts, gating and floor quantization to
/// ticks. `duration_s` bounds the dark-count streams.
///
/// `events` must be sorted by emission time. The output is sorted by
/// `(tick, channel)`.
pub fn detect(
    events: &[TrueEvent],
    det: &DetectorConfig,
    duration_s: f64,
    seeds: &SeedTree,
) -> Result<Vec<TimeTag>> {
    det.validate()?;
    if let Some(i) = events
        .windows(2)
        .position(|w| w[1].t_emit_ps < w[0].t_emit_ps)
    {
        return Err(Error::InvalidConfig {
            field: "events".into(),
            reason: format!("emission times not sorted at event {}", i + 1),
        });
    }
    let n_ch = det.channels.len();

    // Continuous arrival times per channel, in ps.
    let photon_chunks: Vec<Vec<Vec<u64>>> = events
        .par_chunks(DETECT_CHUNK)
        .enumerate()
        .map(|(k, chunk)| {
            let mut rng = seeds.indexed("photons", k as u64);
            let mut arrivals = vec![Vec::new(); n_ch];
            for ev in chunk {
                for p in 0..(ev.photons as usize).min(n_ch) {
                    let c = &det.channels[p];
                    let jitter: f64 = rng.sample(StandardNormal);
                    if !rng.random_bool(c.efficiency) {
                        continue;
                    }
                    let t = ev.t_emit_ps as f64 + 1e3 * (c.offset + c.jitter_sigma * jitter);
                    if t >= 0.0 {
                        arrivals[p].push(t.round() as u64);
                    }
                }
            }
            arrivals
        })
        .collect();
    let mut arrivals: Vec<Vec<u64>> = vec![Vec::new(); n_ch];
    for chunk in photon_chunks {
        for (ch, v) in chunk.into_iter().enumerate() {
            arrivals[ch].extend(v);
        }
    }

    // Free-running dark counts.
    let slices = slices(duration_s.max(0.0));
    for (ch, c) in det.channels.iter().enumerate() {
        if c.gate.is_some() || c.dark_rate <= 0.0 {
            continue;
        }
        let name = format!("dark-{}", ch + 1);
        let darks: Vec<Vec<u64>> = slices
            .par_iter()
            .map(|&(k, len)| {
                let mut rng = seeds.indexed(&name, k);
                let start_ps = (k as f64 * SLICE_S * PS_PER_S) as u64;
                poisson_times(c.dark_rate, start_ps, len, &mut rng)
            })
            .collect();
        arrivals[ch].extend(darks.into_iter().flatten());
    }

    // Gated channels: keep photons inside open gates, add gate darks.
    for (ch, c) in det.channels.iter().enumerate() {
        let Some(gate) = c.gate else { continue };
        let width_ps = (gate.width * 1e3).round() as u64;
        let gates = merge_gates(
            arrivals[gate.trigger_channel as usize - 1].clone(),
            width_ps,
        );
        arrivals[ch].retain(|&t| in_gates(&gates, t));
        if c.dark_rate > 0.0 {
            let mut rng = seeds.stream(&format!("gated-dark-{}", ch + 1));
            let exp = Exp::new(c.dark_rate * 1e-3).expect("positive rate"); // per ps
            for &(start, end) in &gates {
                let mut t = start as f64;
                loop {
                    t += exp.sample(&mut rng);
                    if t > end as f64 {
                        break;
                    }
                    arrivals[ch].push(t.floor() as u64);
                }
            }
        }
    }

    let mut tags: Vec<TimeTag> = arrivals
        .into_iter()
        .enumerate()
        .flat_map(|(ch, v)| {
            let channel = (ch + 1) as u8;
            let tick_ps = det.tick_ps;
            v.into_iter().map(move |t| TimeTag {
                tick: t / tick_ps,
                channel,
            })
        })
        .collect();
    tags.par_sort_unstable();
    Ok(tags)
}
