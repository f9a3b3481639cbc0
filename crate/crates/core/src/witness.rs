//! Continuous-variable entanglement inequalities for three particles.
//!
//! Given the four uncertainties of a [`VarianceSet`], the witness evaluates
//!
//! * three product forms `Δ(x_j - x_i)·Δ(p₁+p₂+p₃) ≥ 1`, which detect
//!   entanglement (one violation) and full inseparability (two);
//! * three pairwise sum forms `[Δ(x_j - x_i) + Δ(x_l - x_k)]·Δ(p₁+p₂+p₃) ≥ 1`
//!   and the triple sum `[ΣΔ(x_j - x_i)]·Δ(p₁+p₂+p₃) ≥ 2`, any violation of
//!   which rules out every mixture of biseparable states;
//! * the additive forms `Δ²(x_j - x_i) + Δ²(p₁+p₂+p₃) ≥ 2`.
//!
//! Energy-time inputs use `t ↔ x` and `ω ↔ p`, with times in ns and angular
//! frequencies in rad/ns.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{Domain, VarianceSet};

pub const PRODUCT_BOUND: f64 = 1.0;
pub const SUM_BOUND: f64 = 1.0;
pub const TRIPLE_SUM_BOUND: f64 = 2.0;
pub const ADDITIVE_BOUND: f64 = 2.0;
/// Relative margin below a bound before a value counts as violating it.
/// Limit evaluations of boundary states land within ~1e-9 of the bound.
pub const VIOLATION_MARGIN: f64 = 1e-6;

/// `value < bound`, discounting values within the numerical margin.
pub fn violates(value: f64, bound: f64) -> bool {
    value < bound * (1.0 - VIOLATION_MARGIN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    NoWitness,
    SomeEntanglement,
    FullyInseparable,
    GenuineTripartite,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::NoWitness => "no-witness",
            Classification::SomeEntanglement => "some-entanglement",
            Classification::FullyInseparable => "fully-inseparable",
            Classification::GenuineTripartite => "genuine-tripartite",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub product: f64,
    pub sum: f64,
    pub triple_sum: f64,
    pub additive: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            product: PRODUCT_BOUND,
            sum: SUM_BOUND,
            triple_sum: TRIPLE_SUM_BOUND,
            additive: ADDITIVE_BOUND,
        }
    }
}

/// One-sigma uncertainties of every reported value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueUncertainties {
    pub product: [f64; 3],
    pub sum: [f64; 3],
    pub triple_sum: f64,
    pub additive: [f64; 3],
}

/// Distance below each bound in units of the value's uncertainty,
/// `(bound - value) / σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub product: [f64; 3],
    pub sum: [f64; 3],
    pub triple_sum: f64,
    pub additive: [f64; 3],
}

/// All inequality values for one state.
///
/// Index order is `(2,1), (3,2), (3,1)` for the product and additive forms
/// and `21+31, 21+32, 32+31` for the pairwise sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub domain: Domain,
    pub product_values: [f64; 3],
    pub sum_values: [f64; 3],
    pub triple_sum_value: f64,
    pub additive_vlf_values: [f64; 3],
    pub classification: Classification,
    pub bounds: Bounds,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub uncertainties: Option<ValueUncertainties>,
}

impl WitnessReport {
    pub fn significance(&self) -> Option<Significance> {
        let u = self.uncertainties?;
        let b = self.bounds;
        let sig = |bound: f64, value: f64, sigma: f64| (bound - value) / sigma;
        Some(Significance {
            product: std::array::from_fn(|k| sig(b.product, self.product_values[k], u.product[k])),
            sum: std::array::from_fn(|k| sig(b.sum, self.sum_values[k], u.sum[k])),
            triple_sum: sig(b.triple_sum, self.triple_sum_value, u.triple_sum),
            additive: std::array::from_fn(|k| {
                sig(b.additive, self.additive_vlf_values[k], u.additive[k])
            }),
        })
    }

    pub fn product_violations(&self) -> usize {
        self.product_values
            .iter()
            .filter(|v| violates(**v, self.bounds.product))
            .count()
    }

    /// Key-value text rendering (TOML).
    pub fn to_text(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            witness: &'a WitnessReport,
            #[serde(skip_serializing_if = "Option::is_none")]
            significance: Option<Significance>,
        }
        toml::to_string(&Doc {
            witness: self,
            significance: self.significance(),
        })
        .expect("witness report serializes")
    }
}

fn classify(products: &[f64; 3], sums: &[f64; 3], triple: f64) -> Classification {
    let violated = products
        .iter()
        .filter(|v| violates(**v, PRODUCT_BOUND))
        .count();
    if sums.iter().any(|v| violates(*v, SUM_BOUND)) || violates(triple, TRIPLE_SUM_BOUND) {
        Classification::GenuineTripartite
    } else if violated >= 2 {
        Classification::FullyInseparable
    } else if violated == 1 {
        Classification::SomeEntanglement
    } else {
        Classification::NoWitness
    }
}

/// The three additive left-hand sides `Δ²(x_j - x_i) + Δ²(p₁+p₂+p₃)`.
pub fn additive_vlf(v: &VarianceSet) -> [f64; 3] {
    let p2 = v.dpsum * v.dpsum;
    v.dx().map(|dx| dx * dx + p2)
}

pub fn evaluate(v: &VarianceSet) -> WitnessReport {
    let p = v.dpsum;
    let [d21, d32, d31] = v.dx();
    let product_values = [d21 * p, d32 * p, d31 * p];
    let sum_values = [(d21 + d31) * p, (d21 + d32) * p, (d32 + d31) * p];
    let triple_sum_value = (d21 + d31 + d32) * p;
    WitnessReport {
        domain: v.domain,
        product_values,
        sum_values,
        triple_sum_value,
        additive_vlf_values: additive_vlf(v),
        classification: classify(&product_values, &sum_values, triple_sum_value),
        bounds: Bounds::default(),
        uncertainties: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Measured,
    Simulated,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTimeUncertainties {
    pub dt21: f64,
    pub dt32: f64,
    pub dt31: f64,
    pub domega: f64,
}

/// Measured or simulated energy-time uncertainties: timing standard
/// deviations in ns and the total angular-frequency spread in rad/ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTimeInput {
    pub dt21: f64,
    pub dt32: f64,
    pub dt31: f64,
    pub domega: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainties: Option<EnergyTimeUncertainties>,
    pub provenance: Provenance,
}

/// How a quoted bandwidth in MHz maps onto the angular spread in rad/ns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthConvention {
    /// The MHz figure is `Δω/2π`; `Δω = 2π·ν`.
    #[default]
    Angular,
    /// The MHz figure is used directly as `Δω`.
    Direct,
}

impl BandwidthConvention {
    pub fn to_rad_per_ns(self, mhz: f64) -> f64 {
        match self {
            BandwidthConvention::Angular => TAU * mhz * 1e-3,
            BandwidthConvention::Direct => mhz * 1e-3,
        }
    }
}

/// Evaluates the witness for energy-time data, propagating quoted
/// uncertainties to first order.
pub fn evaluate_energy_time(e: &EnergyTimeInput) -> Result<WitnessReport> {
    let v = VarianceSet::new(e.dt21, e.dt32, e.dt31, e.domega, Domain::EnergyTime)?;
    let mut report = evaluate(&v);
    if let Some(u) = e.uncertainties {
        for (name, x) in [
            ("dt21", u.dt21),
            ("dt32", u.dt32),
            ("dt31", u.dt31),
            ("domega", u.domega),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::InvalidVariances(format!(
                    "uncertainty of {name} = {x} must be finite and non-negative"
                )));
            }
        }
        let w = e.domega;
        let sw = u.domega;
        let dt = [e.dt21, e.dt32, e.dt31];
        let sdt = [u.dt21, u.dt32, u.dt31];
        // f = S·ω with S a sum of timings: σ_f² = ω²Σσ_t² + S²σ_ω²
        let lin = |terms: &[usize]| {
            let s: f64 = terms.iter().map(|&k| dt[k]).sum();
            let var_s: f64 = terms.iter().map(|&k| sdt[k] * sdt[k]).sum();
            (w * w * var_s + s * s * sw * sw).sqrt()
        };
        let additive = |k: usize| {
            let a = 2.0 * dt[k] * sdt[k];
            let b = 2.0 * w * sw;
            (a * a + b * b).sqrt()
        };
        report.uncertainties = Some(ValueUncertainties {
            product: [lin(&[0]), lin(&[1]), lin(&[2])],
            sum: [lin(&[0, 2]), lin(&[0, 1]), lin(&[1, 2])],
            triple_sum: lin(&[0, 1, 2]),
            additive: [additive(0), additive(1), additive(2)],
        });
    }
    Ok(report)
}

/// Two-party time-bandwidth product `Δ(t₀-t₁)·Δ(ω₀+ω₁)` (bound 1) with its
/// first-order uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairProduct {
    pub value: f64,
    pub uncertainty: f64,
    pub bound: f64,
    pub violated: bool,
}

impl PairProduct {
    /// Standard deviations by which the value sits below the bound.
    pub fn significance(&self) -> f64 {
        (self.bound - self.value) / self.uncertainty
    }
}

pub fn pair_time_bandwidth(dt: f64, sigma_dt: f64, domega: f64, sigma_domega: f64) -> PairProduct {
    let value = dt * domega;
    let uncertainty = ((domega * sigma_dt).powi(2) + (dt * sigma_domega).powi(2)).sqrt();
    PairProduct {
        value,
        uncertainty,
        bound: PRODUCT_BOUND,
        violated: violates(value, PRODUCT_BOUND),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingOptimum {
    pub s_opt: f64,
    pub minimized_value: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const SCALING_TOLERANCE: f64 = 1e-10;

/// Minimizes `s²·var_x + var_p/s²` over `s > 0` by golden-section search.
///
/// The search runs in `u = ln s`, where the objective is convex, so a
/// tolerance on `u` is a relative tolerance on `s`.
pub fn optimize_scaling(var_x: f64, var_p: f64) -> Result<ScalingOptimum> {
    if !(var_x > 0.0 && var_p > 0.0 && var_x.is_finite() && var_p.is_finite()) {
        return Err(Error::NonPositiveVariance { var_x, var_p });
    }
    let f = |u: f64| var_x * (2.0 * u).exp() + var_p * (-2.0 * u).exp();

    // bracket a < b < c with f(b) <= f(a), f(c)
    let (mut a, mut b, mut c) = (-1.0, 0.0, 1.0);
    let (mut fa, mut fb, mut fc) = (f(a), f(b), f(c));
    while fa < fb {
        let step = 2.0 * (c - b);
        (c, fc) = (b, fb);
        (b, fb) = (a, fa);
        a -= step;
        fa = f(a);
    }
    while fc < fb {
        let step = 2.0 * (b - a);
        (a, fa) = (b, fb);
        (b, fb) = (c, fc);
        c += step;
        fc = f(c);
    }
    let _ = (fa, fc);

    let mut lo = a;
    let mut hi = c;
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > SCALING_TOLERANCE {
        if f1 <= f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    let u = 0.5 * (lo + hi);
    Ok(ScalingOptimum {
        s_opt: u.exp(),
        minimized_value: f(u),
    })
}
