//! Riemann-sum L^p norms and the rescaled Sobolev machinery
//! `||f||_{L~^p_k} = ||(1 - hbar Laplacian)^{k/2} f||_{L^p}`.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::fft::apply_multiplier;
use crate::grid::WaveFunction;

/// Fixed-order pairwise summation; deterministic across thread counts.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BASE: usize = 64;
    if values.len() <= BASE {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_sum_complex(values: &[Complex64]) -> Complex64 {
    const BASE: usize = 64;
    if values.len() <= BASE {
        let mut acc = Complex64::new(0.0, 0.0);
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum_complex(&values[..mid]) + pairwise_sum_complex(&values[mid..])
}

/// `( sum |f(x_j)|^p dx )^{1/p}`, 1 < p < infinity.
pub fn lp_norm(f: &WaveFunction, p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(CoreError::InvalidParameter(format!(
            "p = {p} outside (1, infinity)"
        )));
    }
    let terms: Vec<f64> = f.values.iter().map(|v| v.norm().powf(p)).collect();
    Ok((pairwise_sum(&terms) * f.grid.dx()).powf(1.0 / p))
}

pub fn l2_norm(f: &WaveFunction) -> f64 {
    let terms: Vec<f64> = f.values.iter().map(|v| v.norm_sqr()).collect();
    (pairwise_sum(&terms) * f.grid.dx()).sqrt()
}

pub fn l2_distance(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    if a.grid != b.grid {
        return Err(CoreError::GridMismatch("l2_distance operands".into()));
    }
    let terms: Vec<f64> = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(u, v)| (u - v).norm_sqr())
        .collect();
    Ok((pairwise_sum(&terms) * a.grid.dx()).sqrt())
}

/// `(1 - hbar Laplacian)^{k/2}` as the Fourier multiplier `(1 + hbar |xi|^2)^{k/2}`.
pub fn sobolev_multiplier(f: &WaveFunction, k: f64, hbar: f64) -> WaveFunction {
    let mut out = f.clone();
    if k == 0.0 {
        return out;
    }
    apply_multiplier(&mut out, |xi| {
        Complex64::new((1.0 + hbar * xi * xi).powf(k / 2.0), 0.0)
    });
    out
}

/// Rescaled Sobolev norm at the Planck scale.
pub fn sobolev_norm(f: &WaveFunction, p: f64, k: f64, hbar: f64) -> Result<f64> {
    lp_norm(&sobolev_multiplier(f, k, hbar), p)
}

/// The sharp loss exponent `k_p = 2 d |1/2 - 1/p|`.
pub fn k_exponent(p: f64, d: usize) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(CoreError::InvalidParameter(format!(
            "p = {p} outside (1, infinity)"
        )));
    }
    Ok(2.0 * d as f64 * (0.5 - 1.0 / p).abs())
}
