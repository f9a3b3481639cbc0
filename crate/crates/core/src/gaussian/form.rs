use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pairwise correlation factor `exp(-((x_i - x_j) / 2σ_c)²)` in the
/// wavefunction. Particles are indexed from 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub pair: (usize, usize),
    pub sigma_c: f64,
}

/// Width parameters of a real three-particle Gaussian wavefunction
///
/// ```text
/// ψ(x) ∝ Π_i exp(-(x_i / 2σ_i)²) · Π_(i,j) exp(-((x_i - x_j) / 2σ_c)²)
/// ```
///
/// An envelope width may be `f64::INFINITY` (no envelope) and a correlation
/// width may be `0.0` (perfect correlation). Such specs describe limits and
/// are only evaluated through [`super::variances_with_limits`].
#[derive(Debug, Clone, PartialEq)]
pub struct WidthSpec {
    sigma: [f64; 3],
    correlations: Vec<Correlation>,
}

impl WidthSpec {
    pub fn new(sigma: [f64; 3], correlations: Vec<Correlation>) -> Result<Self> {
        for (i, s) in sigma.iter().enumerate() {
            if s.is_nan() || *s <= 0.0 {
                return Err(Error::InvalidWidthSpec(format!(
                    "sigma_{} = {s} must be positive",
                    i + 1
                )));
            }
        }
        let mut seen = Vec::with_capacity(correlations.len());
        let mut normalized = Vec::with_capacity(correlations.len());
        for c in correlations {
            let (i, j) = c.pair;
            if i > 2 || j > 2 || i == j {
                return Err(Error::InvalidWidthSpec(format!(
                    "correlation pair ({}, {}) must join two distinct particles in 1..=3",
                    i + 1,
                    j + 1
                )));
            }
            if c.sigma_c.is_nan() || c.sigma_c < 0.0 || c.sigma_c.is_infinite() {
                return Err(Error::InvalidWidthSpec(format!(
                    "sigma_c = {} for pair ({}, {}) must be finite and non-negative",
                    c.sigma_c,
                    i + 1,
                    j + 1
                )));
            }
            let key = (i.min(j), i.max(j));
            if seen.contains(&key) {
                return Err(Error::InvalidWidthSpec(format!(
                    "duplicate correlation for pair ({}, {})",
                    key.0 + 1,
                    key.1 + 1
                )));
            }
            seen.push(key);
            normalized.push(Correlation {
                pair: key,
                sigma_c: c.sigma_c,
            });
        }
        let spec = Self {
            sigma,
            correlations: normalized,
        };
        if spec.is_regular() {
            build_quadratic_form(&spec)?;
        }
        Ok(spec)
    }

    /// Uncorrelated product state.
    pub fn product(sigma: [f64; 3]) -> Result<Self> {
        Self::new(sigma, Vec::new())
    }

    /// Adds a correlation between particles `i` and `j` (0-based).
    pub fn with_correlation(self, i: usize, j: usize, sigma_c: f64) -> Result<Self> {
        let mut correlations = self.correlations;
        correlations.push(Correlation {
            pair: (i, j),
            sigma_c,
        });
        Self::new(self.sigma, correlations)
    }

    pub fn sigma(&self) -> [f64; 3] {
        self.sigma
    }

    pub fn correlations(&self) -> &[Correlation] {
        &self.correlations
    }

    /// True when every parameter is finite and strictly positive.
    pub fn is_regular(&self) -> bool {
        self.sigma.iter().all(|s| s.is_finite())
            && self.correlations.iter().all(|c| c.sigma_c > 0.0)
    }

    /// Human-readable names of the parameters sitting at a limit value.
    pub fn limit_parameters(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, s) in self.sigma.iter().enumerate() {
            if s.is_infinite() {
                out.push(format!("sigma_{} = inf", i + 1));
            }
        }
        for c in &self.correlations {
            if c.sigma_c == 0.0 {
                out.push(format!("sigma_c({},{}) = 0", c.pair.0 + 1, c.pair.1 + 1));
            }
        }
        out
    }

    /// Replaces `σ = ∞` by `1/eps` and `σ_c = 0` by `eps`.
    pub(crate) fn regularized(&self, eps: f64) -> WidthSpec {
        let sigma = self
            .sigma
            .map(|s| if s.is_infinite() { 1.0 / eps } else { s });
        let correlations = self
            .correlations
            .iter()
            .map(|c| Correlation {
                pair: c.pair,
                sigma_c: if c.sigma_c == 0.0 { eps } else { c.sigma_c },
            })
            .collect();
        WidthSpec {
            sigma,
            correlations,
        }
    }

    /// Whether the state factorizes across at least one bipartition.
    pub fn is_biseparable(&self) -> bool {
        let mut touched = [false; 3];
        for c in &self.correlations {
            touched[c.pair.0] = true;
            touched[c.pair.1] = true;
        }
        self.correlations.len() <= 1 || touched.iter().any(|t| !t)
    }
}

impl fmt::Display for WidthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sigma = [{}, {}, {}]",
            self.sigma[0], self.sigma[1], self.sigma[2]
        )?;
        for c in &self.correlations {
            write!(
                f,
                ", sigma_c({},{}) = {}",
                c.pair.0 + 1,
                c.pair.1 + 1,
                c.sigma_c
            )?;
        }
        Ok(())
    }
}

pub type Matrix3 = [[f64; 3]; 3];

/// Symmetric matrix `M` with `ψ(x) ∝ exp(-½ xᵀ M x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticForm {
    m: Matrix3,
}

impl QuadraticForm {
    pub fn matrix(&self) -> &Matrix3 {
        &self.m
    }

    pub fn determinant(&self) -> f64 {
        det3(&self.m)
    }
}

/// Builds `M` from a regular width spec.
///
/// Each envelope adds `1/(2σ_i²)` to `M_ii`; each correlation adds
/// `1/(2σ_c²)` to both diagonal entries and `-1/(2σ_c²)` to the off-diagonal.
pub fn build_quadratic_form(spec: &WidthSpec) -> Result<QuadraticForm> {
    if !spec.is_regular() {
        return Err(Error::LimitRequired {
            parameters: spec.limit_parameters().join(", "),
        });
    }
    let mut m = [[0.0; 3]; 3];
    for (i, s) in spec.sigma.iter().enumerate() {
        m[i][i] += 1.0 / (2.0 * s * s);
    }
    for c in &spec.correlations {
        let k = 1.0 / (2.0 * c.sigma_c * c.sigma_c);
        let (i, j) = c.pair;
        m[i][i] += k;
        m[j][j] += k;
        m[i][j] -= k;
        m[j][i] -= k;
    }
    // Sylvester's criterion on the leading principal minors.
    let d1 = m[0][0];
    let d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let d3 = det3(&m);
    if !(d1 > 0.0 && d2 > 0.0 && d3 > 0.0) {
        return Err(Error::NotPositiveDefinite {
            parameters: spec.to_string(),
        });
    }
    Ok(QuadraticForm { m })
}

/// A 3×3 covariance matrix of positions or momenta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance(pub Matrix3);

impl Covariance {
    pub fn variance_of(&self, coeffs: [f64; 3]) -> f64 {
        variance_of_combination(self, coeffs)
    }
}

/// Covariance of `|ψ|² ∝ exp(-xᵀ M x)`, i.e. `(2M)⁻¹`, by adjugate.
pub fn position_covariance(q: &QuadraticForm) -> Result<Covariance> {
    let two_m = q.m.map(|row| row.map(|v| 2.0 * v));
    let det = det3(&two_m);
    let scale = two_m
        .iter()
        .flatten()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    // Limit regularization legitimately produces condition numbers near
    // 1e16; only reject forms that are singular outright.
    if !(det > 0.0 && det.is_finite()) || det <= 1e-30 * scale.powi(3) {
        return Err(Error::Singular { det });
    }
    let a = &two_m;
    let adj = [
        [
            a[1][1] * a[2][2] - a[1][2] * a[2][1],
            a[0][2] * a[2][1] - a[0][1] * a[2][2],
            a[0][1] * a[1][2] - a[0][2] * a[1][1],
        ],
        [
            a[1][2] * a[2][0] - a[1][0] * a[2][2],
            a[0][0] * a[2][2] - a[0][2] * a[2][0],
            a[0][2] * a[1][0] - a[0][0] * a[1][2],
        ],
        [
            a[1][0] * a[2][1] - a[1][1] * a[2][0],
            a[0][1] * a[2][0] - a[0][0] * a[2][1],
            a[0][0] * a[1][1] - a[0][1] * a[1][0],
        ],
    ];
    Ok(Covariance(adj.map(|row| row.map(|v| v / det))))
}

/// Momentum covariance of a real Gaussian wavefunction, `M/2` (ħ = 1).
pub fn momentum_covariance(q: &QuadraticForm) -> Covariance {
    Covariance(q.m.map(|row| row.map(|v| 0.5 * v)))
}

/// `cᵀ Σ c`, clamped at zero against rounding.
pub fn variance_of_combination(cov: &Covariance, coeffs: [f64; 3]) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            acc += coeffs[i] * cov.0[i][j] * coeffs[j];
        }
    }
    acc.max(0.0)
}

fn det3(a: &Matrix3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}
