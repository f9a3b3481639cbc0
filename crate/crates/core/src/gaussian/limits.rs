use serde::{Deserialize, Serialize};

use super::mixture::{mixture_variance, Basis, GaussianMixture};
use crate::error::{Error, Result};

pub const DIFF_21: [f64; 3] = [-1.0, 1.0, 0.0];
pub const DIFF_32: [f64; 3] = [0.0, -1.0, 1.0];
pub const DIFF_31: [f64; 3] = [-1.0, 0.0, 1.0];
pub const TOTAL: [f64; 3] = [1.0, 1.0, 1.0];

/// Regularization parameters used for limit evaluation, in decreasing order.
pub const LIMIT_EPSILONS: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Largest accepted change between the last two regularized evaluations,
/// relative to `max(1, |value|)`.
pub const LIMIT_CONVERGENCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// Dimensionless x/p quadratures.
    Dimensionless,
    /// Times in ns and angular frequencies in rad/ns.
    EnergyTime,
}

/// The four uncertainties entering every witness: standard deviations of
/// `x2-x1`, `x3-x2`, `x3-x1` and `p1+p2+p3` (or their time/frequency twins).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceSet {
    pub dx21: f64,
    pub dx32: f64,
    pub dx31: f64,
    pub dpsum: f64,
    pub domain: Domain,
}

impl VarianceSet {
    pub fn new(dx21: f64, dx32: f64, dx31: f64, dpsum: f64, domain: Domain) -> Result<Self> {
        for (name, v) in [
            ("dx21", dx21),
            ("dx32", dx32),
            ("dx31", dx31),
            ("dpsum", dpsum),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidVariances(format!(
                    "{name} = {v} must be finite and non-negative"
                )));
            }
        }
        Ok(Self {
            dx21,
            dx32,
            dx31,
            dpsum,
            domain,
        })
    }

    pub fn dx(&self) -> [f64; 3] {
        [self.dx21, self.dx32, self.dx31]
    }
}

fn squared_uncertainties(mix: &GaussianMixture) -> Result<[f64; 4]> {
    Ok([
        mixture_variance(mix, DIFF_21, Basis::Position)?,
        mixture_variance(mix, DIFF_32, Basis::Position)?,
        mixture_variance(mix, DIFF_31, Basis::Position)?,
        mixture_variance(mix, TOTAL, Basis::Momentum)?,
    ])
}

const QUANTITIES: [&str; 4] = ["Var(x2-x1)", "Var(x3-x2)", "Var(x3-x1)", "Var(p1+p2+p3)"];

/// Evaluates the [`VarianceSet`] of a state or mixture, resolving `σ = ∞`
/// and `σ_c = 0` as limits.
///
/// Limit parameters are replaced by `1/ε` and `ε` for each `ε` in
/// [`LIMIT_EPSILONS`]. The variances are rational in `ε²`, so once the last
/// two evaluations agree the value is extrapolated to `ε = 0` assuming an
/// `ε²` leading correction.
pub fn variances_with_limits(mix: &GaussianMixture) -> Result<VarianceSet> {
    let squared = if mix.is_regular() {
        squared_uncertainties(mix)?
    } else {
        let mut seq = Vec::with_capacity(LIMIT_EPSILONS.len());
        for eps in LIMIT_EPSILONS {
            seq.push(squared_uncertainties(&mix.regularized(eps))?);
        }
        let prev = seq[seq.len() - 2];
        let last = seq[seq.len() - 1];
        let ratio = (LIMIT_EPSILONS[1] / LIMIT_EPSILONS[2]).powi(2);
        let mut out = [0.0; 4];
        for k in 0..4 {
            let diff = last[k] - prev[k];
            if !last[k].is_finite() || diff.abs() > LIMIT_CONVERGENCE * last[k].abs().max(1.0) {
                return Err(Error::NonConvergent {
                    quantity: QUANTITIES[k],
                    parameters: mix.limit_parameters().join(", "),
                    previous: prev[k],
                    last: last[k],
                });
            }
            out[k] = (last[k] + diff / (ratio - 1.0)).max(0.0);
        }
        out
    };
    VarianceSet::new(
        squared[0].sqrt(),
        squared[1].sqrt(),
        squared[2].sqrt(),
        squared[3].sqrt(),
        Domain::Dimensionless,
    )
}
