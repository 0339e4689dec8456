//! Short-time slice operators
//! `E^(N)(t,s) f(x) = (2 pi i (t-s) hbar)^{-1/2} \int e^{i S(t,s,x,y)/hbar} e_N f(y) dy`
//! with `e_0 = 1` and `e_1 = a_1` (Van Vleck), their composition over a
//! subdivision, and the residual operators `G^(N) = (i hbar d_t + hbar^2/2 Lap - V) E^(N)`.
//!
//! # Quadrature guard
//!
//! Direct quadrature of the chirped kernel on a step-`dy` grid produces alias
//! ghosts: full-amplitude copies of the output displaced by
//! `D = 2 pi hbar / (dy * |S_xy|)` in position. The guard certifies the
//! operator on states concentrated within a declared `aperture` by requiring
//! `D >= 2*aperture + margin`, and reports the per-sample phase step
//! `dy * max|dS/dy| / hbar` over the aperture as a diagnostic. This bounds the
//! usable `hbar * (t-s)` from below for a given grid; the error names the grid
//! size that would satisfy the clearance.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::classical::{classical_bvp_from, default_nsteps};
use crate::error::{CoreError, Result};
use crate::fft::apply_multiplier;
use crate::generating::{generating_table, table_nsteps, Axis, GeneratingTable, TableOpts};
use crate::grid::{GridSpec, WaveFunction, BOUNDARY_MASS_LIMIT};
use crate::norms::{l2_norm, pairwise_sum_complex};
use crate::potential::PotentialModel;

/// A subdivision s = t_0 < t_1 < ... < t_L = t.
#[derive(Debug, Clone, PartialEq)]
pub struct Subdivision {
    times: Vec<f64>,
}

impl Subdivision {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(CoreError::InvalidParameter(
                "subdivision needs at least two times".into(),
            ));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(CoreError::InvalidParameter(
                    "subdivision times must be strictly increasing".into(),
                ));
            }
        }
        Ok(Subdivision { times })
    }

    pub fn uniform(s: f64, t: f64, slices: usize) -> Result<Self> {
        if slices == 0 || !(t > s) {
            return Err(CoreError::InvalidParameter("bad uniform subdivision".into()));
        }
        let h = (t - s) / slices as f64;
        let mut times: Vec<f64> = (0..slices).map(|j| s + j as f64 * h).collect();
        times.push(t);
        Subdivision::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slices(&self) -> usize {
        self.times.len() - 1
    }

    pub fn gaps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.windows(2).map(|w| (w[0], w[1]))
    }

    /// The mesh omega(Omega): the largest gap.
    pub fn mesh(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Refine by inserting the midpoint of the largest gap.
    pub fn with_midpoint_of_largest_gap(&self) -> Subdivision {
        let (mut best, mut best_gap) = (0usize, 0.0f64);
        for (i, w) in self.times.windows(2).enumerate() {
            if w[1] - w[0] > best_gap {
                best_gap = w[1] - w[0];
                best = i;
            }
        }
        let mut times = self.times.clone();
        times.insert(best + 1, 0.5 * (self.times[best] + self.times[best + 1]));
        Subdivision { times }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GuardCfg {
    /// Position radius on which the operator is certified.
    pub aperture: f64,
    /// Extra clearance beyond the in/out apertures (tail allowance).
    pub margin: f64,
}

impl GuardCfg {
    pub fn for_grid(grid: &GridSpec) -> Self {
        GuardCfg {
            aperture: 0.8 * grid.half_width(),
            margin: 6.0,
        }
    }

    pub fn with_aperture(aperture: f64) -> Self {
        GuardCfg {
            aperture,
            margin: 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GuardReport {
    pub ghost_displacement: f64,
    pub required_clearance: f64,
    /// dy * max |dS/dy| / hbar over the aperture (per-sample kernel phase step).
    pub phase_step_max: f64,
    pub max_sxy: f64,
    pub pass: bool,
}

fn evaluate_guard(
    table: &GeneratingTable,
    grid: &GridSpec,
    hbar: f64,
    cfg: &GuardCfg,
) -> GuardReport {
    let dy = grid.dx();
    let max_sxy = table.max_sxy().max(1e-300);
    let displacement = 2.0 * std::f64::consts::PI * hbar / (dy * max_sxy);
    let required = 2.0 * cfg.aperture + cfg.margin;
    let phase_step = dy * table.max_eta_within(cfg.aperture) / hbar;
    GuardReport {
        ghost_displacement: displacement,
        required_clearance: required,
        phase_step_max: phase_step,
        max_sxy,
        pass: displacement >= required,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeMethod {
    VanVleck,
    TransportOde,
}

/// First transport amplitude a_1 on the (x, y) product grid.
#[derive(Debug, Clone)]
pub struct AmplitudeTable {
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub values: Arc<Vec<f64>>,
    pub method: AmplitudeMethod,
}

/// Van Vleck amplitude `a_1 = [ (t-s) det(-S_xy) ]^{1/2}` from the table's
/// mixed finite-difference Hessian (principal positive root).
pub fn amplitude_a1_van_vleck(table: &GeneratingTable) -> Result<AmplitudeTable> {
    let nx = table.x_axis.len();
    let ny = table.y_axis.len();
    let tau = table.interval();
    let mut values = vec![0.0f64; nx * ny];
    let rows: Vec<Result<Vec<f64>>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0f64; ny];
            for (j, slot) in row.iter_mut().enumerate() {
                let arg = tau * (-table.sxy_at(i, j));
                if !(arg > 0.0) {
                    return Err(CoreError::CausticSingular { tau });
                }
                *slot = arg.sqrt();
            }
            Ok(row)
        })
        .collect();
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        values[i * ny..(i + 1) * ny].copy_from_slice(&row);
    }
    Ok(AmplitudeTable {
        x_axis: table.x_axis.clone(),
        y_axis: table.y_axis.clone(),
        values: Arc::new(values),
        method: AmplitudeMethod::VanVleck,
    })
}

/// Transport-equation route: integrate `d(ln a_1)/dtau = -1/2 (S_xx(tau) - 1/(tau-s))`
/// along the classical path, with `S_xx(tau) = (dxi/deta)/(dx/deta)` from the
/// variational flow. The integrand extends continuously by 0 at tau = s.
pub fn amplitude_a1_transport(
    pot: &PotentialModel,
    s: f64,
    t: f64,
    x_axis: &Axis,
    y_axis: &Axis,
    tol: f64,
) -> Result<AmplitudeTable> {
    let nx = x_axis.len();
    let ny = y_axis.len();
    let nsteps = default_nsteps(t - s);
    let values: Vec<Result<f64>> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let i = idx / ny;
            let j = idx % ny;
            let x = x_axis.points()[i];
            let y = y_axis.points()[j];
            let traj = classical_bvp_from(pot, s, t, y, x, tol, None, nsteps)?;
            // re-run the variational system along the path, sampling the integrand
            let h = (t - s) / nsteps as f64;
            let mut state = (y, traj.eta_star, 0.0f64, 1.0f64); // (x, xi, bx, bxi)
            let mut integrand = Vec::with_capacity(nsteps + 1);
            integrand.push(0.0); // continuous limit at tau = s
            for m in 0..nsteps {
                let tau = s + m as f64 * h;
                let f = |tt: f64, st: (f64, f64, f64, f64)| {
                    let vpp = pot.hess_v(tt, st.0);
                    (st.1, -pot.grad_v(tt, st.0), st.3, -vpp * st.2)
                };
                let add = |a: (f64, f64, f64, f64), k: (f64, f64, f64, f64), w: f64| {
                    (a.0 + w * k.0, a.1 + w * k.1, a.2 + w * k.2, a.3 + w * k.3)
                };
                let k1 = f(tau, state);
                let k2 = f(tau + 0.5 * h, add(state, k1, 0.5 * h));
                let k3 = f(tau + 0.5 * h, add(state, k2, 0.5 * h));
                let k4 = f(tau + h, add(state, k3, h));
                state = (
                    state.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                    state.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
                    state.2 + h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
                    state.3 + h / 6.0 * (k1.3 + 2.0 * k2.3 + 2.0 * k3.3 + k4.3),
                );
                let dt = tau + h - s;
                integrand.push(-0.5 * (state.3 / state.2 - 1.0 / dt));
            }
            // composite Simpson over the sampled integrand
            let mut acc = integrand[0] + integrand[nsteps];
            for (m, g) in integrand.iter().enumerate().take(nsteps).skip(1) {
                acc += if m % 2 == 1 { 4.0 } else { 2.0 } * g;
            }
            Ok((acc * h / 3.0).exp())
        })
        .collect();
    let mut out = vec![0.0f64; nx * ny];
    for (idx, v) in values.into_iter().enumerate() {
        out[idx] = v?;
    }
    Ok(AmplitudeTable {
        x_axis: x_axis.clone(),
        y_axis: y_axis.clone(),
        values: Arc::new(out),
        method: AmplitudeMethod::TransportOde,
    })
}

/// Discretized oscillatory kernel of E^(N)(t, s), N in {0, 1}.
#[derive(Debug, Clone)]
pub struct SliceKernel {
    pub s: f64,
    pub t: f64,
    pub hbar: f64,
    pub order: u8,
    pub grid: GridSpec,
    /// prefactor * e^{i S / hbar}, row-major (output x major)
    phase: Arc<Vec<Complex64>>,
    amp: Option<Arc<Vec<f64>>>,
    pub weight: f64,
    pub guard: GuardReport,
}

impl SliceKernel {
    /// |prefactor| = (2 pi (t-s) hbar)^{-1/2}
    pub fn prefactor_modulus(&self) -> f64 {
        (2.0 * std::f64::consts::PI * (self.t - self.s) * self.hbar).powf(-0.5)
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let v = self.phase[i * self.grid.n() + j];
        match &self.amp {
            Some(a) => v * a[i * self.grid.n() + j],
            None => v,
        }
    }
}

/// Assemble the kernel with the principal branch
/// `(2 pi i (t-s) hbar)^{-1/2} = (2 pi (t-s) hbar)^{-1/2} e^{-i pi/4}` for t > s.
pub fn build_slice_kernel(
    table: &GeneratingTable,
    amp: Option<&AmplitudeTable>,
    order: u8,
    hbar: f64,
    grid: &GridSpec,
    guard_cfg: &GuardCfg,
) -> Result<SliceKernel> {
    let n = grid.n();
    if table.x_axis.len() != n || table.y_axis.len() != n {
        return Err(CoreError::GridMismatch(
            "kernel table must live on the full product grid".into(),
        ));
    }
    match (order, amp) {
        (0, None) | (1, Some(_)) => {}
        (0, Some(_)) => {
            return Err(CoreError::InvalidParameter(
                "order 0 takes no amplitude".into(),
            ))
        }
        (1, None) => {
            return Err(CoreError::InvalidParameter(
                "order 1 requires the a_1 amplitude".into(),
            ))
        }
        _ => {
            return Err(CoreError::InvalidParameter(
                "only N in {0, 1} is implemented".into(),
            ))
        }
    }
    let guard = evaluate_guard(table, grid, hbar, guard_cfg);
    if !guard.pass {
        let dy_needed = 2.0 * std::f64::consts::PI * hbar / (guard.required_clearance * guard.max_sxy);
        let required_n = ((2.0 * grid.half_width() / dy_needed).ceil() as usize)
            .max(n + 1)
            .next_power_of_two();
        return Err(CoreError::QuadratureGuard {
            displacement: guard.ghost_displacement,
            required: guard.required_clearance,
            required_n,
        });
    }

    let tau = table.interval();
    let modulus = (2.0 * std::f64::consts::PI * tau * hbar).powf(-0.5);
    let pref = Complex64::from_polar(modulus, -std::f64::consts::FRAC_PI_4);
    let mut phase = vec![Complex64::new(0.0, 0.0); n * n];
    phase
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            for (j, slot) in row.iter_mut().enumerate() {
                let s_val = table.s_values[i * n + j];
                *slot = pref * Complex64::from_polar(1.0, s_val / hbar);
            }
        });

    Ok(SliceKernel {
        s: table.s_time,
        t: table.t_time,
        hbar,
        order,
        grid: *grid,
        phase: Arc::new(phase),
        amp: amp.map(|a| a.values.clone()),
        weight: grid.dx(),
        guard,
    })
}

/// Matrix-free application `g(x_i) = sum_j K(x_i, y_j) f(y_j) dy`.
pub fn apply_kernel(kernel: &SliceKernel, f: &WaveFunction) -> Result<WaveFunction> {
    if f.grid != kernel.grid {
        return Err(CoreError::GridMismatch("kernel vs input grid".into()));
    }
    if (f.hbar - kernel.hbar).abs() > 1e-12 {
        return Err(CoreError::InvalidParameter(format!(
            "input hbar {} does not match kernel hbar {}",
            f.hbar, kernel.hbar
        )));
    }
    f.assert_concentrated(BOUNDARY_MASS_LIMIT)?;
    let n = kernel.grid.n();
    let phase = kernel.phase.clone();
    let amp = kernel.amp.clone();
    let weight = kernel.weight;
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    values
        .par_iter_mut()
        .enumerate()
        .for_each_init(
            || vec![Complex64::new(0.0, 0.0); n],
            |scratch, (i, out)| {
                let row = &phase[i * n..(i + 1) * n];
                match &amp {
                    Some(a) => {
                        let arow = &a[i * n..(i + 1) * n];
                        for j in 0..n {
                            scratch[j] = row[j] * arow[j] * f.values[j];
                        }
                    }
                    None => {
                        for j in 0..n {
                            scratch[j] = row[j] * f.values[j];
                        }
                    }
                }
                *out = pairwise_sum_complex(scratch) * weight;
            },
        );
    WaveFunction::new(kernel.grid, kernel.hbar, values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SliceKey {
    s: u64,
    t: u64,
    hbar: u64,
    order: u8,
    gap_only: bool,
}

/// Builds slice kernels, reusing the generating table and the most recent
/// kernel. For time-independent potentials kernels are keyed by the gap
/// length, so uniform subdivisions reuse a single kernel.
pub struct SliceFactory {
    pub pot: PotentialModel,
    pub grid: GridSpec,
    pub table_opts: TableOpts,
    pub guard: GuardCfg,
    table_slot: Option<(SliceKey, Arc<(GeneratingTable, AmplitudeTable)>)>,
    kernel_slot: Option<(SliceKey, Arc<SliceKernel>)>,
}

impl SliceFactory {
    pub fn new(pot: PotentialModel, grid: GridSpec, table_opts: TableOpts, guard: GuardCfg) -> Self {
        SliceFactory {
            pot,
            grid,
            table_opts,
            guard,
            table_slot: None,
            kernel_slot: None,
        }
    }

    fn key(&self, s: f64, t: f64, hbar: f64, order: u8) -> SliceKey {
        let gap_only = !self.pot.time_dependent();
        SliceKey {
            s: if gap_only { 0 } else { s.to_bits() },
            t: if gap_only { (t - s).to_bits() } else { t.to_bits() },
            hbar: hbar.to_bits(),
            order,
            gap_only,
        }
    }

    /// Fan spacing tightened for small hbar: the kernel phase S/hbar amplifies
    /// interpolation error by 1/hbar, and that error scales like spacing^4.
    pub fn fan_spacing_for(base: f64, hbar: f64) -> f64 {
        base * hbar.clamp(0.0, 1.0).powf(0.25)
    }

    pub fn table_for(
        &mut self,
        s: f64,
        t: f64,
        hbar: f64,
    ) -> Result<Arc<(GeneratingTable, AmplitudeTable)>> {
        let spacing = Self::fan_spacing_for(self.table_opts.fan_spacing, hbar);
        let key = self.key(s, t, spacing, 255);
        if let Some((k, tbl)) = &self.table_slot {
            if *k == key {
                return Ok(tbl.clone());
            }
        }
        let axis = Axis::from_grid(&self.grid);
        let mut opts = self.table_opts;
        opts.fan_spacing = spacing;
        let table = generating_table(&self.pot, s, t, &axis, &axis, &opts)?;
        let amp = amplitude_a1_van_vleck(&table)?;
        let pair = Arc::new((table, amp));
        self.table_slot = Some((key, pair.clone()));
        Ok(pair)
    }

    pub fn kernel_for(&mut self, s: f64, t: f64, hbar: f64, order: u8) -> Result<Arc<SliceKernel>> {
        let key = self.key(s, t, hbar, order);
        if let Some((k, kern)) = &self.kernel_slot {
            if *k == key {
                return Ok(kern.clone());
            }
        }
        let pair = self.table_for(s, t, hbar)?;
        let (table, amp) = (&pair.0, &pair.1);
        let kernel = build_slice_kernel(
            table,
            if order == 1 { Some(amp) } else { None },
            order,
            hbar,
            &self.grid,
            &self.guard,
        )?;
        let kernel = Arc::new(kernel);
        self.kernel_slot = Some((key, kernel.clone()));
        Ok(kernel)
    }
}

/// Right-to-left sequential application of the per-gap slice kernels:
/// `E^(N)(Omega, t, s) f = E(t, t_{L-1}) ... E(t_1, s) f`.
pub fn compose_slices(
    factory: &mut SliceFactory,
    subdivision: &Subdivision,
    hbar: f64,
    order: u8,
    f: &WaveFunction,
) -> Result<WaveFunction> {
    let mut state = f.clone();
    for (a, b) in subdivision.gaps() {
        let kernel = factory.kernel_for(a, b, hbar, order)?;
        state = apply_kernel(&kernel, &state)?;
    }
    Ok(state)
}

/// Residual field `G^(N)(t,s) f = (i hbar d_t + hbar^2/2 Lap - V) E^(N)(t,s) f`
/// with d_t by a centered difference over t +- dt_fd and the Laplacian as a
/// Fourier multiplier. Returns the field and its L^2 norm.
pub fn parametrix_residual(
    pot: &PotentialModel,
    hbar: f64,
    s: f64,
    t: f64,
    order: u8,
    f: &WaveFunction,
    guard: &GuardCfg,
) -> Result<(WaveFunction, f64)> {
    let dt_fd = 1e-4;
    let grid = f.grid;
    let axis = Axis::from_grid(&grid);
    let mut opts = TableOpts::default();
    opts.nsteps = Some(table_nsteps(t - s)); // correlated stepping for the three builds
    opts.fan_spacing = SliceFactory::fan_spacing_for(opts.fan_spacing, hbar);

    let kernel_at = |tt: f64| -> Result<SliceKernel> {
        let table = generating_table(pot, s, tt, &axis, &axis, &opts)?;
        let amp = if order == 1 {
            Some(amplitude_a1_van_vleck(&table)?)
        } else {
            None
        };
        build_slice_kernel(&table, amp.as_ref(), order, hbar, &grid, guard)
    };

    let e_plus = apply_kernel(&kernel_at(t + dt_fd)?, f)?;
    let e_minus = apply_kernel(&kernel_at(t - dt_fd)?, f)?;
    let e_center = apply_kernel(&kernel_at(t)?, f)?;

    // hbar^2/2 Lap as multiplier -hbar^2 xi^2 / 2
    let mut kinetic = e_center.clone();
    apply_multiplier(&mut kinetic, |xi| {
        Complex64::new(-0.5 * hbar * hbar * xi * xi, 0.0)
    });

    let i_hbar = Complex64::new(0.0, hbar);
    let values: Vec<Complex64> = (0..grid.n())
        .map(|j| {
            let ddt = (e_plus.values[j] - e_minus.values[j]) / (2.0 * dt_fd);
            let x = grid.point(j);
            i_hbar * ddt + kinetic.values[j] - pot.v(t, x) * e_center.values[j]
        })
        .collect();
    let field = WaveFunction::new(grid, hbar, values)?;
    let norm = l2_norm(&field);
    Ok((field, norm))
}
