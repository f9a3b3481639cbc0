//! Independent reference calculations shared by the integration tests.
//! Nothing here reuses the library's quadratic-form or covariance code.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Explicit log-amplitude of a pure state with envelope widths `sigma`
/// and correlation factors `(i, j, sigma_c)`:
/// `ln ψ = -Σ (x_i / 2σ_i)² - Σ ((x_i - x_j) / 2σ_c)²`.
pub fn log_psi(x: [f64; 3], sigma: [f64; 3], corr: &[(usize, usize, f64)]) -> f64 {
    let mut e = 0.0;
    for k in 0..3 {
        if sigma[k].is_finite() {
            e -= (x[k] / (2.0 * sigma[k])).powi(2);
        }
    }
    for &(i, j, sc) in corr {
        e -= ((x[i] - x[j]) / (2.0 * sc)).powi(2);
    }
    e
}

/// Hessian of `-2 ln ψ` (the precision matrix of |ψ|²) by central
/// differences of the explicit exponent.
pub fn precision_by_differences(sigma: [f64; 3], corr: &[(usize, usize, f64)]) -> [[f64; 3]; 3] {
    let f = |x: [f64; 3]| -2.0 * log_psi(x, sigma, corr);
    let h = 1e-2;
    let mut hess = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let mut s = 0.0;
            for (da, db, sign) in [(h, h, 1.0), (h, -h, -1.0), (-h, h, -1.0), (-h, -h, 1.0)] {
                let mut x = [0.0; 3];
                x[a] += da;
                x[b] += db;
                s += sign * f(x);
            }
            hess[a][b] = s / (4.0 * h * h);
        }
    }
    hess
}

fn cholesky(a: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Monte Carlo variances of `c·x` under |ψ|² for each coefficient vector.
/// Samples solve `Lᵀx = z` with `LLᵀ` the precision matrix, so `Cov x`
/// is its inverse.
pub fn monte_carlo_position_variances(
    sigma: [f64; 3],
    corr: &[(usize, usize, f64)],
    coeffs: &[[f64; 3]],
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    let l = cholesky(precision_by_differences(sigma, corr));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; coeffs.len()];
    let mut sum2 = vec![0.0; coeffs.len()];
    for _ in 0..samples {
        let z: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let mut x = [0.0; 3];
        for i in (0..3).rev() {
            let s: f64 = (i + 1..3).map(|k| l[k][i] * x[k]).sum();
            x[i] = (z[i] - s) / l[i][i];
        }
        for (k, c) in coeffs.iter().enumerate() {
            let v = c[0] * x[0] + c[1] * x[1] + c[2] * x[2];
            sum[k] += v;
            sum2[k] += v * v;
        }
    }
    let n = samples as f64;
    sum.iter()
        .zip(&sum2)
        .map(|(s, s2)| s2 / n - (s / n).powi(2))
        .collect()
}

/// Momentum-space variances of `c·p` from a 3-D FFT of ψ sampled on an
/// `n³` grid over `[-half_width, half_width)³` (ħ = 1).
pub fn fourier_momentum_variances(
    sigma: [f64; 3],
    corr: &[(usize, usize, f64)],
    coeffs: &[[f64; 3]],
    n: usize,
    half_width: f64,
) -> Vec<f64> {
    let dx = 2.0 * half_width / n as f64;
    let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    let mut data = vec![Complex64::new(0.0, 0.0); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x = [i, j, k].map(|m| -half_width + m as f64 * dx);
                data[idx(i, j, k)] = Complex64::new(log_psi(x, sigma, corr).exp(), 0.0);
            }
        }
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..3 {
        for a in 0..n {
            for b in 0..n {
                let at = |m: usize| match axis {
                    0 => idx(m, a, b),
                    1 => idx(a, m, b),
                    _ => idx(a, b, m),
                };
                for m in 0..n {
                    line[m] = data[at(m)];
                }
                fft.process(&mut line);
                for m in 0..n {
                    data[at(m)] = line[m];
                }
            }
        }
    }
    let freq = |m: usize| {
        let f = if m < n / 2 {
            m as f64
        } else {
            m as f64 - n as f64
        };
        2.0 * PI * f / (n as f64 * dx)
    };
    let mut w = 0.0;
    let mut s1 = vec![0.0; coeffs.len()];
    let mut s2 = vec![0.0; coeffs.len()];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let prob = data[idx(i, j, k)].norm_sqr();
                let p = [freq(i), freq(j), freq(k)];
                w += prob;
                for (q, c) in coeffs.iter().enumerate() {
                    let v = c[0] * p[0] + c[1] * p[1] + c[2] * p[2];
                    s1[q] += prob * v;
                    s2[q] += prob * v * v;
                }
            }
        }
    }
    s1.iter()
        .zip(&s2)
        .map(|(a, b)| b / w - (a / w).powi(2))
        .collect()
}

/// Variances of `(x2-x1, x3-x2, x3-x1)` and of `p1+p2+p3` for a pure state
/// whose `σ_c = 0` correlations glue particles into rigid groups. Each
/// group's common coordinate has |ψ|² ∝ exp(-y² Σ 1/(2σ_k²)); the total
/// momentum variance is Σ 1/(4σ_k²) because the correlation terms cancel.
pub fn glued_state_variances(sigma: [f64; 3], glued: &[(usize, usize)]) -> ([f64; 3], f64) {
    let mut group = [0usize, 1, 2];
    for &(i, j) in glued {
        let (gi, gj) = (group[i], group[j]);
        for g in group.iter_mut() {
            if *g == gj {
                *g = gi;
            }
        }
    }
    let var_of_group = |g: usize| {
        let precision: f64 = (0..3)
            .filter(|&k| group[k] == g)
            .map(|k| 1.0 / sigma[k].powi(2))
            .sum();
        1.0 / precision
    };
    let diff = |a: usize, b: usize| {
        if group[a] == group[b] {
            0.0
        } else {
            var_of_group(group[a]) + var_of_group(group[b])
        }
    };
    let p: f64 = sigma
        .iter()
        .filter(|s| s.is_finite())
        .map(|s| 1.0 / (4.0 * s * s))
        .sum();
    ([diff(0, 1), diff(1, 2), diff(0, 2)], p)
}
