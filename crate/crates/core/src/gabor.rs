//! Short-time Fourier transform `V_g f(z) = <f, pi(z) g>` with
//! `pi(z) f(y) = e^{i y xi} f(y - x)`, the inversion formula
//! `f = (2 pi)^{-d} ||g||^{-2} V_g^* V_g f`, and modulation norms.
//!
//! Position shifts are snapped to grid nodes; modulations are exact.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dilation::{dilate, DilationDirection};
use crate::error::{CoreError, Result};
use crate::grid::{GridSpec, WaveFunction};
use crate::norms::{pairwise_sum, pairwise_sum_complex};

/// A real window sampled on the grid (default: the unit L^2 Gaussian).
#[derive(Debug, Clone)]
pub struct Window {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl Window {
    pub fn gaussian(grid: GridSpec) -> Self {
        let c = std::f64::consts::PI.powf(-0.25);
        Window {
            grid,
            values: grid.points().map(|x| c * (-x * x / 2.0).exp()).collect(),
        }
    }

    /// First Hermite function, the single alternative-window smoke case.
    pub fn hermite1(grid: GridSpec) -> Self {
        let c = std::f64::consts::PI.powf(-0.25) * 2.0f64.sqrt();
        Window {
            grid,
            values: grid.points().map(|x| c * x * (-x * x / 2.0).exp()).collect(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        let terms: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        (pairwise_sum(&terms) * self.grid.dx()).sqrt()
    }
}

/// Truncated phase-space lattice with spacings (alpha, beta) and radius R;
/// position nodes are pre-snapped to the grid.
#[derive(Debug, Clone)]
pub struct PhaseLattice {
    pub alpha: f64,
    pub beta: f64,
    pub radius: f64,
    xs: Vec<f64>,
    xis: Vec<f64>,
}

impl PhaseLattice {
    pub fn new(grid: &GridSpec, alpha: f64, beta: f64, radius: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && radius > 0.0) {
            return Err(CoreError::InvalidParameter("lattice parameters".into()));
        }
        if radius >= grid.half_width() {
            return Err(CoreError::InvalidParameter(format!(
                "lattice radius {radius} does not fit the box {}",
                grid.half_width()
            )));
        }
        let k_max = (radius / alpha).floor() as i64;
        let m_max = (radius / beta).floor() as i64;
        let xs = (-k_max..=k_max)
            .map(|k| grid.snap(k as f64 * alpha))
            .collect();
        let xis = (-m_max..=m_max).map(|m| m as f64 * beta).collect();
        Ok(PhaseLattice {
            alpha,
            beta,
            radius,
            xs,
            xis,
        })
    }

    pub fn default_for(grid: &GridSpec) -> Result<Self> {
        PhaseLattice::new(grid, 0.5, 0.5, 8.0)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn xis(&self) -> &[f64] {
        &self.xis
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.xis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes in x-major order, matching the layout of [`stft`] output.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs
            .iter()
            .flat_map(move |&x| self.xis.iter().map(move |&xi| (x, xi)))
    }

    /// Cell area (alpha * beta)^d.
    pub fn cell(&self) -> f64 {
        self.alpha * self.beta
    }
}

/// The wave packet `pi(z) g` as a grid function (x snapped, xi exact).
pub fn wave_packet(window: &Window, hbar: f64, z: (f64, f64)) -> Result<WaveFunction> {
    let grid = window.grid;
    let shift = grid.nearest_index(z.0) as isize - grid.nearest_index(0.0) as isize;
    let n = grid.n();
    let values: Vec<Complex64> = (0..n)
        .map(|j| {
            let src = j as isize - shift;
            let g = if src >= 0 && (src as usize) < n {
                window.values[src as usize]
            } else {
                0.0
            };
            Complex64::from_polar(1.0, grid.point(j) * z.1) * g
        })
        .collect();
    WaveFunction::new(grid, hbar, values)
}

/// `V_g f(x, xi) = sum_y f(y) g(y - x) e^{-i y xi} dy` at one (snapped) node.
pub fn stft_at(f: &WaveFunction, window: &Window, x: f64, xi: f64) -> Result<Complex64> {
    if f.grid != window.grid {
        return Err(CoreError::GridMismatch("stft window grid".into()));
    }
    if x.abs() > f.grid.half_width() {
        return Err(CoreError::InvalidParameter(format!(
            "stft position {x} outside the box"
        )));
    }
    let grid = f.grid;
    let n = grid.n();
    let shift = grid.nearest_index(x) as isize - grid.nearest_index(0.0) as isize;
    let terms: Vec<Complex64> = (0..n)
        .map(|j| {
            let src = j as isize - shift;
            if src >= 0 && (src as usize) < n {
                f.values[j]
                    * window.values[src as usize]
                    * Complex64::from_polar(1.0, -grid.point(j) * xi)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(pairwise_sum_complex(&terms) * grid.dx())
}

/// Precomputed `e^{-i y_j xi_m}` phasors for every lattice frequency,
/// shared across repeated STFT calls on the same lattice.
pub struct StftModulators {
    n: usize,
    table: Vec<Complex64>,
}

impl StftModulators {
    pub fn new(grid: &GridSpec, lattice: &PhaseLattice) -> Self {
        let n = grid.n();
        let mut table = Vec::with_capacity(lattice.xis().len() * n);
        for &xi in lattice.xis() {
            for j in 0..n {
                table.push(Complex64::from_polar(1.0, -grid.point(j) * xi));
            }
        }
        StftModulators { n, table }
    }

    fn row(&self, m: usize) -> &[Complex64] {
        &self.table[m * self.n..(m + 1) * self.n]
    }
}

pub fn stft_with_modulators(
    f: &WaveFunction,
    window: &Window,
    lattice: &PhaseLattice,
    mods: &StftModulators,
) -> Result<Vec<Complex64>> {
    if f.grid != window.grid {
        return Err(CoreError::GridMismatch("stft window grid".into()));
    }
    let grid = f.grid;
    let n = grid.n();
    let rows: Vec<Vec<Complex64>> = lattice
        .xs()
        .par_iter()
        .map(|&x| {
            let shift = grid.nearest_index(x) as isize - grid.nearest_index(0.0) as isize;
            // windowed copy at this position
            let mut prod = vec![Complex64::new(0.0, 0.0); n];
            for (j, slot) in prod.iter_mut().enumerate() {
                let src = j as isize - shift;
                if src >= 0 && (src as usize) < n {
                    *slot = f.values[j] * window.values[src as usize];
                }
            }
            let mut row = Vec::with_capacity(lattice.xis().len());
            let mut scratch = vec![Complex64::new(0.0, 0.0); n];
            for m in 0..lattice.xis().len() {
                let phasors = mods.row(m);
                for ((slot, v), ph) in scratch.iter_mut().zip(&prod).zip(phasors) {
                    *slot = v * ph;
                }
                row.push(pairwise_sum_complex(&scratch) * grid.dx());
            }
            row
        })
        .collect();
    let mut out = Vec::with_capacity(lattice.len());
    for row in rows {
        out.extend(row);
    }
    Ok(out)
}

/// STFT sampled on the lattice, x-major order.
pub fn stft(f: &WaveFunction, window: &Window, lattice: &PhaseLattice) -> Result<Vec<Complex64>> {
    let mods = StftModulators::new(&f.grid, lattice);
    stft_with_modulators(f, window, lattice, &mods)
}

/// Relative L^2 error of the Riemann-sum reconstruction
/// `f ~ (alpha beta / (2 pi ||g||^2)) sum_z V_g f(z) pi(z) g`.
pub fn stft_inversion_check(
    f: &WaveFunction,
    window: &Window,
    lattice: &PhaseLattice,
) -> Result<f64> {
    let coeffs = stft(f, window, lattice)?;
    let grid = f.grid;
    let n = grid.n();
    let scale = lattice.cell() / (2.0 * std::f64::consts::PI * window.l2_norm().powi(2));
    let mut rec = vec![Complex64::new(0.0, 0.0); n];
    for (node, c) in lattice.nodes().zip(&coeffs) {
        let shift = grid.nearest_index(node.0) as isize - grid.nearest_index(0.0) as isize;
        let coeff = c * scale;
        for (j, slot) in rec.iter_mut().enumerate() {
            let src = j as isize - shift;
            if src >= 0 && (src as usize) < n {
                *slot += coeff
                    * window.values[src as usize]
                    * Complex64::from_polar(1.0, grid.point(j) * node.1);
            }
        }
    }
    let num: f64 = f
        .values
        .iter()
        .zip(&rec)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = f.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    Ok(num / den)
}

/// Discrete `L^p` norm of `V_g f` over the lattice; `p = infinity` takes the
/// max. With `hbar` given, computes the semiclassical `M^p_hbar` norm by first
/// applying the compressing dilation `D_{hbar^{-1/2}}`.
pub fn modulation_norm(
    f: &WaveFunction,
    window: &Window,
    p: f64,
    lattice: &PhaseLattice,
    hbar: Option<f64>,
) -> Result<f64> {
    let rescaled;
    let input = match hbar {
        Some(h) if h < 1.0 => {
            rescaled = dilate(f, h, DilationDirection::Compress)?;
            &rescaled
        }
        _ => f,
    };
    let coeffs = stft(input, window, lattice)?;
    // coverage: the outer ring of the lattice must carry a negligible share
    let nxi = lattice.xis().len();
    let nx = lattice.xs().len();
    let mut ring = 0.0f64;
    let mut total = 0.0f64;
    for (idx, c) in coeffs.iter().enumerate() {
        let ix = idx / nxi;
        let im = idx % nxi;
        let m = c.norm_sqr();
        total += m;
        if ix == 0 || ix == nx - 1 || im == 0 || im == nxi - 1 {
            ring = ring.max(m);
        }
    }
    if total > 0.0 && ring / total > 1e-8 {
        return Err(CoreError::LatticeCoverage {
            fraction: ring / total,
        });
    }
    if p.is_infinite() {
        return Ok(coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max));
    }
    if !(p >= 1.0) {
        return Err(CoreError::InvalidParameter(format!("p = {p} below 1")));
    }
    let terms: Vec<f64> = coeffs.iter().map(|c| c.norm().powf(p)).collect();
    Ok((pairwise_sum(&terms) * lattice.cell()).powf(1.0 / p))
}
