//! Semiclassical dilations `D_{hbar^{-1/2}} f(x) = hbar^{d/4} f(hbar^{1/2} x)`
//! (and its inverse `D_{hbar^{1/2}}`), realized exactly on the grid.
//!
//! With `lambda = hbar^{-1/2}` required to be a power of two:
//! * `Compress` is `D_{hbar^{-1/2}}`: the function widens spatially
//!   (its frequency content compresses); computed by spectral cropping,
//!   which is exact on band-limited data.
//! * `Expand` is `D_{hbar^{1/2}}`: the function narrows; computed by exact
//!   subsampling of grid values.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::fft::{fourier_transform, FftDirection};
use crate::grid::{WaveFunction, BOUNDARY_MASS_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DilationDirection {
    /// `D_{hbar^{-1/2}}`
    Compress,
    /// `D_{hbar^{1/2}}`
    Expand,
}

fn power_of_two_scale(hbar: f64) -> Result<usize> {
    // lambda = hbar^{-1/2} must be an integer power of two
    let lam = hbar.powf(-0.5);
    let rounded = lam.round();
    if (lam - rounded).abs() > 1e-9 || rounded < 1.0 || !(rounded as usize).is_power_of_two() {
        return Err(CoreError::IncompatibleDilation { lambda: lam });
    }
    Ok(rounded as usize)
}

pub fn dilate(f: &WaveFunction, hbar: f64, direction: DilationDirection) -> Result<WaveFunction> {
    if !(hbar > 0.0 && hbar <= 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "dilation hbar = {hbar} outside (0, 1]"
        )));
    }
    let lam = power_of_two_scale(hbar)?;
    if lam == 1 {
        return Ok(f.clone());
    }
    let n = f.grid.n();
    match direction {
        DilationDirection::Compress => {
            // h(x) = lambda^{-1/2} f(x / lambda); hhat(xi) = lambda^{1/2} fhat(lambda xi).
            // The grid spectrum of h needs fhat only at the lambda-strided bins,
            // so the crop is exact on band-limited data.
            let fhat = fourier_transform(f, FftDirection::Forward)?;
            let half = n as isize / 2;
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (m, slot) in out.iter_mut().enumerate() {
                let rel = m as isize - half;
                let src = rel * lam as isize + half;
                if src >= 0 && (src as usize) < n {
                    *slot = (lam as f64).sqrt() * fhat.values[src as usize];
                }
            }
            let spectral = WaveFunction::new(fhat.grid, f.hbar, out)?;
            let result = fourier_transform(&spectral, FftDirection::Inverse)?;
            result.assert_concentrated(BOUNDARY_MASS_LIMIT)?;
            Ok(result)
        }
        DilationDirection::Expand => {
            // h(x_j) = lambda^{1/2} f(lambda x_j): exact subsampling. Valid only
            // while the narrowed function stays representable: f's spectrum times
            // lambda must fit under the grid Nyquist rate.
            f.assert_concentrated(BOUNDARY_MASS_LIMIT)?;
            let fhat = fourier_transform(f, FftDirection::Forward)?;
            let band = fhat.grid.half_width() / lam as f64;
            let mut outside = 0.0;
            let mut total = 0.0;
            for (m, v) in fhat.values.iter().enumerate() {
                let m2 = v.norm_sqr();
                total += m2;
                if fhat.grid.point(m).abs() > band {
                    outside += m2;
                }
            }
            if total > 0.0 && outside / total > 1e-8 {
                return Err(CoreError::BandwidthExceeded {
                    fraction: outside / total,
                });
            }
            let scale = (lam as f64).sqrt();
            let offset = (lam - 1) * (n / 2);
            let values: Vec<Complex64> = (0..n)
                .map(|j| {
                    let src = lam as isize * j as isize - offset as isize;
                    if src >= 0 && (src as usize) < n {
                        scale * f.values[src as usize]
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            WaveFunction::new(f.grid, f.hbar, values)
        }
    }
}
