//! Scaled discrete Fourier transforms matching the continuum convention
//! `fhat(xi) = \int e^{-i x xi} f(x) dx`, inverse carrying `(2 pi)^{-d}`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{CoreError, Result};
use crate::grid::WaveFunction;

#[cfg(test)]
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FftDirection {
    Forward,
    Inverse,
}

struct Plans {
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
}

fn plans() -> &'static Mutex<Plans> {
    static PLANS: OnceLock<Mutex<Plans>> = OnceLock::new();
    PLANS.get_or_init(|| {
        Mutex::new(Plans {
            forward: HashMap::new(),
            inverse: HashMap::new(),
        })
    })
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    let mut guard = plans().lock().expect("fft planner lock");
    let map = match direction {
        FftDirection::Forward => &mut guard.forward,
        FftDirection::Inverse => &mut guard.inverse,
    };
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            match direction {
                FftDirection::Forward => planner.plan_fft_forward(n),
                FftDirection::Inverse => planner.plan_fft_inverse(n),
            }
        })
        .clone()
}

/// Raw unnormalized DFT in standard bin order, in place.
pub fn fft_raw(values: &mut [Complex64], direction: FftDirection) {
    plan(values.len(), direction).process(values);
}

/// Apply a frequency multiplier `m(xi)` in place: `f <- IFFT( m(xi) FFT(f) ) / n`.
///
/// The phase conventions cancel between the two transforms, so no twiddle
/// factors are needed; `xi` is supplied per raw bin.
pub fn apply_multiplier(f: &mut WaveFunction, multiplier: impl Fn(f64) -> Complex64) {
    let n = f.grid.n();
    fft_raw(&mut f.values, FftDirection::Forward);
    for (k, v) in f.values.iter_mut().enumerate() {
        *v *= multiplier(f.grid.freq_bin(k));
    }
    fft_raw(&mut f.values, FftDirection::Inverse);
    let scale = 1.0 / n as f64;
    for v in f.values.iter_mut() {
        *v *= scale;
    }
}

/// Discrete realization of the continuum Fourier transform.
///
/// Forward output lives on the frequency grid in ascending-`xi` order and
/// approximates `fhat(xi) = \int e^{-i x xi} f(x) dx`; the inverse carries the
/// `(2 pi)^{-1}` factor so that forward then inverse is the identity.
pub fn fourier_transform(f: &WaveFunction, direction: FftDirection) -> Result<WaveFunction> {
    let n = f.grid.n();
    let target = f.grid.frequency_grid();
    match direction {
        FftDirection::Forward => {
            // fhat(xi_m) = dx * e^{i L xi_m} * sum_j f_j (-1)^j e^{-2 pi i j m / n}
            let mut buf: Vec<Complex64> = f
                .values
                .iter()
                .enumerate()
                .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
                .collect();
            fft_raw(&mut buf, FftDirection::Forward);
            let dx = f.grid.dx();
            let l = f.grid.half_width();
            let out: Vec<Complex64> = (0..n)
                .map(|m| {
                    let xi = target.point(m);
                    let phase = Complex64::from_polar(dx, l * xi);
                    phase * buf[m]
                })
                .collect();
            WaveFunction::new(target, f.hbar, out)
        }
        FftDirection::Inverse => {
            // f(x_j) = (2 pi)^{-1} dxi * (-1)^j * sum_m [fhat_m e^{-i L_x xi_m}] e^{+2 pi i j m / n}
            // where the input grid is the xi-grid and the output grid its dual.
            let lx = target.half_width();
            let mut buf: Vec<Complex64> = (0..n)
                .map(|m| {
                    let xi = f.grid.point(m);
                    f.values[m] * Complex64::from_polar(1.0, -lx * xi)
                })
                .collect();
            fft_raw(&mut buf, FftDirection::Inverse);
            let scale = f.grid.dx() / (2.0 * std::f64::consts::PI);
            let out: Vec<Complex64> = buf
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    v * scale * sign
                })
                .collect();
            WaveFunction::new(target, f.hbar, out)
        }
    }
    .and_then(|wf| {
        wf.check_finite()?;
        Ok(wf)
    })
}

/// Grid Plancherel defect `| ||fhat||^2 (2 pi)^{-1} dxi - ||f||^2 dx |` (relative).
pub fn plancherel_defect(f: &WaveFunction) -> Result<f64> {
    let fhat = fourier_transform(f, FftDirection::Forward)?;
    let x_side: f64 = f.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * f.grid.dx();
    let xi_side: f64 = fhat.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * fhat.grid.dx()
        / (2.0 * std::f64::consts::PI);
    if x_side == 0.0 {
        return Err(CoreError::InvalidParameter("zero function".into()));
    }
    Ok((x_side - xi_side).abs() / x_side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(grid: GridSpec) -> WaveFunction {
        WaveFunction::from_fn(grid, 1.0, |x| Complex64::new((-x * x / 2.0).exp(), 0.0)).unwrap()
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let g = GridSpec::new(1024, 20.0).unwrap();
        let f = gaussian(g);
        let fhat = fourier_transform(&f, FftDirection::Forward).unwrap();
        // fhat(xi) = sqrt(2 pi) e^{-xi^2/2} with this convention
        let mut worst = 0.0f64;
        for (m, v) in fhat.values.iter().enumerate() {
            let xi = fhat.grid.point(m);
            if xi.abs() > 5.0 {
                continue;
            }
            let expect = (2.0 * PI).sqrt() * (-xi * xi / 2.0).exp();
            let rel = (v - Complex64::new(expect, 0.0)).norm() / expect;
            worst = worst.max(rel);
        }
        assert!(worst < 1e-10, "worst rel err {worst:.3e}");
    }

    #[test]
    fn forward_then_inverse_is_identity() {
        let g = GridSpec::new(512, 16.0).unwrap();
        // smooth band-limited data: a few Gaussian-modulated modes
        let f = WaveFunction::from_fn(g, 1.0, |x| {
            Complex64::from_polar((-x * x / 8.0).exp(), 1.3 * x)
                + Complex64::from_polar(0.5 * (-(x - 2.0) * (x - 2.0) / 3.0).exp(), -2.0 * x)
        })
        .unwrap();
        let back = fourier_transform(
            &fourier_transform(&f, FftDirection::Forward).unwrap(),
            FftDirection::Inverse,
        )
        .unwrap();
        let num: f64 = f
            .values
            .iter()
            .zip(&back.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = f.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den < 1e-12, "roundtrip rel err {:.3e}", num / den);
    }

    #[test]
    fn shift_theorem() {
        let g = GridSpec::new(1024, 20.0).unwrap();
        let a = 1.0; // grid-aligned shift
        let f = gaussian(g);
        let shifted =
            WaveFunction::from_fn(g, 1.0, |x| Complex64::new((-(x - a) * (x - a) / 2.0).exp(), 0.0))
                .unwrap();
        let fhat = fourier_transform(&f, FftDirection::Forward).unwrap();
        let shat = fourier_transform(&shifted, FftDirection::Forward).unwrap();
        let mut worst = 0.0f64;
        for m in 0..g.n() {
            let xi = fhat.grid.point(m);
            if xi.abs() > 5.0 {
                continue;
            }
            let expect = Complex64::from_polar(1.0, -a * xi) * fhat.values[m];
            worst = worst.max((shat.values[m] - expect).norm());
        }
        assert!(worst < 1e-10, "shift theorem dev {worst:.3e}");
    }

    #[test]
    fn plancherel_on_grid() {
        let g = GridSpec::new(1024, 20.0).unwrap();
        let f = gaussian(g);
        assert!(plancherel_defect(&f).unwrap() < 1e-12);
    }
}
