//! Uniform box grids and sampled wavefunctions.
//!
//! Conventions fixed here and imported by every other module:
//! * position grid: `x_j = -L + j*dx`, `j = 0..n-1`, `dx = 2L/n`, `n` a power of two;
//! * frequency grid: spacing `dxi = 2*pi/(n*dx) = pi/L`, symmetric about 0,
//!   with the Nyquist bucket `k = n/2` owned by the *negative* side
//!   (`xi = -pi/dx`);
//! * `dx * dxi * n = 2*pi` per axis.

use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Fraction of the half-width treated as the boundary shell for mass checks.
pub const BOUNDARY_SHELL: f64 = 0.05;
/// Default limit on the |f|^2 fraction allowed in the boundary shell.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-10;

/// Uniform symmetric box grid on [-L, L) with a power-of-two point count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    half_width: f64,
}

impl GridSpec {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if !n.is_power_of_two() || n < 8 {
            return Err(CoreError::InvalidParameter(format!(
                "grid size {n} must be a power of two >= 8"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "half width {half_width} must be positive and finite"
            )));
        }
        Ok(GridSpec { n, half_width })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn dxi(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    pub fn point(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.point(j))
    }

    /// Frequency of raw-FFT bin `k` (standard DFT ordering).
    pub fn freq_bin(&self, k: usize) -> f64 {
        let half = self.n / 2;
        let m = if k < half {
            k as isize
        } else {
            k as isize - self.n as isize
        };
        m as f64 * self.dxi()
    }

    /// Frequency of natural-order (ascending) spectral index `m`.
    pub fn freq_natural(&self, m: usize) -> f64 {
        (m as isize - (self.n / 2) as isize) as f64 * self.dxi()
    }

    /// The grid the Fourier transform of a function on `self` lives on.
    pub fn frequency_grid(&self) -> GridSpec {
        GridSpec {
            n: self.n,
            half_width: std::f64::consts::PI / self.dx(),
        }
    }

    /// Nearest grid index to position `x` (clamped into range).
    pub fn nearest_index(&self, x: f64) -> usize {
        let raw = ((x + self.half_width) / self.dx()).round();
        raw.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub fn snap(&self, x: f64) -> f64 {
        self.point(self.nearest_index(x))
    }
}

/// Complex samples on a [`GridSpec`] together with the semiclassical scale.
#[derive(Debug, Clone)]
pub struct WaveFunction {
    pub grid: GridSpec,
    pub hbar: f64,
    pub values: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: GridSpec, hbar: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(CoreError::GridMismatch(format!(
                "{} values on a grid of {} points",
                values.len(),
                grid.n()
            )));
        }
        if !(hbar > 0.0 && hbar <= 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "hbar = {hbar} outside (0, 1]"
            )));
        }
        let wf = WaveFunction { grid, hbar, values };
        wf.check_finite()?;
        Ok(wf)
    }

    pub fn from_fn(grid: GridSpec, hbar: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.points().map(f).collect();
        WaveFunction::new(grid, hbar, values)
    }

    pub fn check_finite(&self) -> Result<()> {
        for v in &self.values {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(CoreError::NonFinite {
                    context: "wavefunction samples",
                    tau: f64::NAN,
                });
            }
        }
        Ok(())
    }

    /// Fraction of the |f|^2 mass inside the outermost 5% shell of the box.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let edge = (1.0 - BOUNDARY_SHELL) * self.grid.half_width();
        let mut shell = 0.0;
        let mut total = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            let m = v.norm_sqr();
            total += m;
            if self.grid.point(j).abs() >= edge {
                shell += m;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            shell / total
        }
    }

    /// Fail loudly when the state is not box-concentrated.
    pub fn assert_concentrated(&self, limit: f64) -> Result<()> {
        let fraction = self.boundary_mass_fraction();
        if fraction > limit {
            Err(CoreError::BoundaryMass { fraction, limit })
        } else {
            Ok(())
        }
    }

    /// CSV snapshot with columns `index,x,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 48);
        out.push_str("index,x,re,im\n");
        for (j, v) in self.values.iter().enumerate() {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e}\n",
                j,
                self.grid.point(j),
                v.re,
                v.im
            ));
        }
        out
    }
}
