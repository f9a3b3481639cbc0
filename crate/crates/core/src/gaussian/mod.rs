//! Analytic three-particle Gaussian pure states and their mixtures.
//!
//! Conventions: ħ = 1 and `[x, p] = i`, so a single particle at minimum
//! uncertainty has `Δx·Δp = 1/2`.

mod form;
mod limits;
mod mixture;
mod state_file;

pub use form::{
    build_quadratic_form, momentum_covariance, position_covariance, variance_of_combination,
    Correlation, Covariance, Matrix3, QuadraticForm, WidthSpec,
};
pub use limits::{
    variances_with_limits, Domain, VarianceSet, DIFF_21, DIFF_31, DIFF_32, LIMIT_CONVERGENCE,
    LIMIT_EPSILONS, TOTAL,
};
pub use mixture::{
    component_average_variance, mixture_variance, Basis, GaussianMixture, MixtureComponent,
};
pub use state_file::{load_state, parse_state};

/// The two-component mixture `½ψ₁ + ½ψ₂` with `σ_c = 0`, `σ_{2,3,5,6} = 1`
/// and `σ_{1,4} = ∞`: fully inseparable but biseparable as a mixture.
pub fn sqrt2_counterexample() -> GaussianMixture {
    let inf = f64::INFINITY;
    let psi1 = WidthSpec::new(
        [inf, 1.0, 1.0],
        vec![Correlation {
            pair: (0, 1),
            sigma_c: 0.0,
        }],
    )
    .expect("valid spec");
    let psi2 = WidthSpec::new(
        [inf, 1.0, 1.0],
        vec![Correlation {
            pair: (0, 2),
            sigma_c: 0.0,
        }],
    )
    .expect("valid spec");
    GaussianMixture::equal(vec![psi1, psi2]).expect("valid mixture")
}

/// The three-component mixture of ψ₁, ψ₂, ψ₃ with `σ_c = 0`,
/// `σ_{1,2,4,6,8,9} = 1` and `σ_{3,5,7} = 1/√2`.
pub fn sqrt6_counterexample() -> GaussianMixture {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let psi1 = WidthSpec::new(
        [1.0, 1.0, h],
        vec![Correlation {
            pair: (0, 1),
            sigma_c: 0.0,
        }],
    )
    .expect("valid spec");
    let psi2 = WidthSpec::new(
        [1.0, h, 1.0],
        vec![Correlation {
            pair: (0, 2),
            sigma_c: 0.0,
        }],
    )
    .expect("valid spec");
    let psi3 = WidthSpec::new(
        [h, 1.0, 1.0],
        vec![Correlation {
            pair: (1, 2),
            sigma_c: 0.0,
        }],
    )
    .expect("valid spec");
    GaussianMixture::equal(vec![psi1, psi2, psi3]).expect("valid mixture")
}

/// ψ₄: particle 1 correlated with both 2 and 3 at the same width.
pub fn psi4(sigma: [f64; 3], sigma_c: f64) -> crate::error::Result<WidthSpec> {
    WidthSpec::new(
        sigma,
        vec![
            Correlation {
                pair: (0, 1),
                sigma_c,
            },
            Correlation {
                pair: (0, 2),
                sigma_c,
            },
        ],
    )
}
