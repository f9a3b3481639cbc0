use serde::{Deserialize, Serialize};

use super::form::{
    build_quadratic_form, momentum_covariance, position_covariance, variance_of_combination,
    WidthSpec,
};
use crate::error::{Error, Result};

const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Position,
    Momentum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub spec: WidthSpec,
    /// Position displacement of each particle. Momentum means are zero
    /// since the wavefunctions are real.
    pub mean: [f64; 3],
}

/// A convex combination of Gaussian pure states.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<MixtureComponent>,
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidMixture("no components".into()));
        }
        for (k, c) in components.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(Error::InvalidMixture(format!(
                    "weight {} of component {k} outside (0, 1]",
                    c.weight
                )));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::InvalidMixture(format!(
                    "non-finite mean offset in component {k}"
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidMixture(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { components })
    }

    /// Equal-weight mixture of zero-mean states.
    pub fn equal(specs: Vec<WidthSpec>) -> Result<Self> {
        let n = specs.len();
        let w = 1.0 / n as f64;
        let mut components: Vec<MixtureComponent> = specs
            .into_iter()
            .map(|spec| MixtureComponent {
                weight: w,
                spec,
                mean: [0.0; 3],
            })
            .collect();
        // absorb rounding so the weights sum to exactly one
        if let Some(last) = components.last_mut() {
            last.weight = 1.0 - w * (n as f64 - 1.0);
        }
        Self::new(components)
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn is_regular(&self) -> bool {
        self.components.iter().all(|c| c.spec.is_regular())
    }

    pub(crate) fn regularized(&self, eps: f64) -> GaussianMixture {
        GaussianMixture {
            components: self
                .components
                .iter()
                .map(|c| MixtureComponent {
                    weight: c.weight,
                    spec: c.spec.regularized(eps),
                    mean: c.mean,
                })
                .collect(),
        }
    }

    pub(crate) fn limit_parameters(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, c) in self.components.iter().enumerate() {
            for p in c.spec.limit_parameters() {
                out.push(format!("component {k}: {p}"));
            }
        }
        out
    }
}

impl From<WidthSpec> for GaussianMixture {
    fn from(spec: WidthSpec) -> Self {
        GaussianMixture {
            components: vec![MixtureComponent {
                weight: 1.0,
                spec,
                mean: [0.0; 3],
            }],
        }
    }
}

/// Variance of `c·x` (or `c·p`) in the mixture:
/// `Σ η_i Var_i + Σ η_i ⟨c·v⟩_i² − (Σ η_i ⟨c·v⟩_i)²`.
pub fn mixture_variance(mix: &GaussianMixture, coeffs: [f64; 3], basis: Basis) -> Result<f64> {
    let mut within = 0.0;
    let mut mean_sq = 0.0;
    let mut mean = 0.0;
    for c in &mix.components {
        let q = build_quadratic_form(&c.spec)?;
        let (var, m) = match basis {
            Basis::Position => {
                let cov = position_covariance(&q)?;
                let m: f64 = (0..3).map(|i| coeffs[i] * c.mean[i]).sum();
                (variance_of_combination(&cov, coeffs), m)
            }
            Basis::Momentum => (
                variance_of_combination(&momentum_covariance(&q), coeffs),
                0.0,
            ),
        };
        within += c.weight * var;
        mean_sq += c.weight * m * m;
        mean += c.weight * m;
    }
    Ok((within + (mean_sq - mean * mean).max(0.0)).max(0.0))
}

/// Weighted average of the component variances, `Σ η_i Var_i`.
pub fn component_average_variance(
    mix: &GaussianMixture,
    coeffs: [f64; 3],
    basis: Basis,
) -> Result<f64> {
    let mut acc = 0.0;
    for c in &mix.components {
        let q = build_quadratic_form(&c.spec)?;
        let var = match basis {
            Basis::Position => variance_of_combination(&position_covariance(&q)?, coeffs),
            Basis::Momentum => variance_of_combination(&momentum_covariance(&q), coeffs),
        };
        acc += c.weight * var;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::form::Correlation;

    #[test]
    fn equal_variances_zero_means() {
        let a = WidthSpec::product([1.0, 2.0, 0.5]).unwrap();
        let mix = GaussianMixture::equal(vec![a.clone(), a.clone()]).unwrap();
        let single = GaussianMixture::from(a);
        for basis in [Basis::Position, Basis::Momentum] {
            let v = mixture_variance(&mix, [-1.0, 1.0, 0.0], basis).unwrap();
            let s = mixture_variance(&single, [-1.0, 1.0, 0.0], basis).unwrap();
            assert!((v - s).abs() < 1e-14);
        }
    }

    #[test]
    fn pure_mean_spread() {
        // Components so narrow their own variance is negligible, means at ±1
        // along x2 - x1.
        let narrow = WidthSpec::product([1e-6; 3]).unwrap();
        let mix = GaussianMixture::new(vec![
            MixtureComponent {
                weight: 0.5,
                spec: narrow.clone(),
                mean: [0.0, 1.0, 0.0],
            },
            MixtureComponent {
                weight: 0.5,
                spec: narrow,
                mean: [0.0, -1.0, 0.0],
            },
        ])
        .unwrap();
        let v = mixture_variance(&mix, [-1.0, 1.0, 0.0], Basis::Position).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mixture_variance_bounds_component_average() {
        let a = WidthSpec::new(
            [1.0, 0.7, 1.4],
            vec![Correlation {
                pair: (0, 1),
                sigma_c: 0.3,
            }],
        )
        .unwrap();
        let b = WidthSpec::product([0.5, 1.5, 1.0]).unwrap();
        let mix = GaussianMixture::new(vec![
            MixtureComponent {
                weight: 0.3,
                spec: a,
                mean: [0.2, -0.4, 1.0],
            },
            MixtureComponent {
                weight: 0.7,
                spec: b,
                mean: [-0.1, 0.3, 0.0],
            },
        ])
        .unwrap();
        for c in [[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [1.0, 1.0, 1.0]] {
            let v = mixture_variance(&mix, c, Basis::Position).unwrap();
            let avg = component_average_variance(&mix, c, Basis::Position).unwrap();
            assert!(v >= avg);
        }
    }

    #[test]
    fn rejects_bad_weights() {
        let a = WidthSpec::product([1.0; 3]).unwrap();
        let comp = |w| MixtureComponent {
            weight: w,
            spec: a.clone(),
            mean: [0.0; 3],
        };
        assert!(GaussianMixture::new(vec![comp(0.5), comp(0.4)]).is_err());
        assert!(GaussianMixture::new(vec![comp(1.2), comp(-0.2)]).is_err());
        assert!(GaussianMixture::new(vec![]).is_err());
        assert!(GaussianMixture::new(vec![comp(0.5), comp(0.5)]).is_ok());
    }

    #[test]
    fn limit_components_must_use_limit_evaluation() {
        let a = WidthSpec::product([1.0, 1.0, f64::INFINITY]).unwrap();
        let mix = GaussianMixture::from(a);
        assert!(matches!(
            mixture_variance(&mix, [1.0, 1.0, 1.0], Basis::Momentum),
            Err(Error::LimitRequired { .. })
        ));
    }
}
