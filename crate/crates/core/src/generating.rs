//! The generating function S(t, s, x, y) tabulated on an (x, y) product grid,
//! with finite-difference Hessian blocks and the tameness diagnostics
//! `|t-s| |d^2 S| <= C` and `|t-s| |det S_yy| >= delta~`.
//!
//! Build strategy: for each y the map `eta -> x(t; y, eta)` is integrated as a
//! monotone shooting fan (parameterized by u = (t-s) eta, which stays O(box)),
//! together with the action and the variational derivatives. Each x node is
//! then resolved by inverting the cubic Hermite interpolant of x(u); the same
//! interpolant machinery evaluates S and the terminal momentum. Before the
//! first caustic the fan is strictly monotone, so the boundary problem has the
//! unique solution the short-time theory guarantees.

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::grid::GridSpec;
use crate::potential::PotentialModel;

/// Uniform axis (a grid axis or a restriction of one).
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    points: Vec<f64>,
}

impl Axis {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(CoreError::InvalidParameter("axis needs >= 2 points".into()));
        }
        let h = points[1] - points[0];
        for w in points.windows(2) {
            if (w[1] - w[0] - h).abs() > 1e-9 * h.abs().max(1.0) {
                return Err(CoreError::InvalidParameter("axis must be uniform".into()));
            }
        }
        Ok(Axis { points })
    }

    pub fn from_grid(grid: &GridSpec) -> Self {
        Axis {
            points: grid.points().collect(),
        }
    }

    /// Restriction of a grid axis to |x| <= radius.
    pub fn restricted(grid: &GridSpec, radius: f64) -> Result<Self> {
        let points: Vec<f64> = grid.points().filter(|x| x.abs() <= radius).collect();
        Axis::new(points)
    }

    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !(hi > lo) {
            return Err(CoreError::InvalidParameter("bad uniform axis".into()));
        }
        let h = (hi - lo) / (count - 1) as f64;
        Axis::new((0..count).map(|i| lo + i as f64 * h).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.points[1] - self.points[0]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TableOpts {
    /// Fan spacing in the rescaled shooting variable u = (t-s) eta.
    pub fan_spacing: f64,
    /// Extra coverage beyond the axis ends, in u units.
    pub pad: f64,
    /// Position tolerance of the interpolant inversion (near machine level so
    /// that S inherits no inversion slack).
    pub tol: f64,
    /// Override the integrator step count (default: tau-adaptive).
    pub nsteps: Option<usize>,
    /// Target physical spacing of the Hessian finite-difference stencil;
    /// the stride is max(1, round(target / axis spacing)).
    pub fd_target_spacing: f64,
}

impl Default for TableOpts {
    fn default() -> Self {
        TableOpts {
            fan_spacing: 0.25,
            pad: 3.0,
            tol: 1e-12,
            nsteps: None,
            fd_target_spacing: 0.05,
        }
    }
}

/// tau-adaptive step count: dtau <= 0.005, at least 16 and at most 200 steps.
pub fn table_nsteps(interval: f64) -> usize {
    ((interval / 0.005).ceil() as usize).clamp(16, 200)
}

#[derive(Debug, Clone, Copy)]
struct FanState {
    x: f64,
    xi: f64,
    action: f64,
    bx: f64,
    bxi: f64,
}

fn fan_rhs(pot: &PotentialModel, t: f64, s: &FanState) -> FanState {
    let vp = pot.grad_v(t, s.x);
    let vpp = pot.hess_v(t, s.x);
    FanState {
        x: s.xi,
        xi: -vp,
        action: 0.5 * s.xi * s.xi - pot.v(t, s.x),
        bx: s.bxi,
        bxi: -vpp * s.bx,
    }
}

fn fan_add(a: &FanState, k: &FanState, h: f64) -> FanState {
    FanState {
        x: a.x + h * k.x,
        xi: a.xi + h * k.xi,
        action: a.action + h * k.action,
        bx: a.bx + h * k.bx,
        bxi: a.bxi + h * k.bxi,
    }
}

fn fan_shoot(
    pot: &PotentialModel,
    s: f64,
    t: f64,
    y: f64,
    eta: f64,
    nsteps: usize,
) -> Result<FanState> {
    let h = (t - s) / nsteps as f64;
    let mut state = FanState {
        x: y,
        xi: eta,
        action: 0.0,
        bx: 0.0,
        bxi: 1.0,
    };
    for m in 0..nsteps {
        let tau = s + m as f64 * h;
        let k1 = fan_rhs(pot, tau, &state);
        let k2 = fan_rhs(pot, tau + 0.5 * h, &fan_add(&state, &k1, 0.5 * h));
        let k3 = fan_rhs(pot, tau + 0.5 * h, &fan_add(&state, &k2, 0.5 * h));
        let k4 = fan_rhs(pot, tau + h, &fan_add(&state, &k3, h));
        state = FanState {
            x: state.x + h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
            xi: state.xi + h / 6.0 * (k1.xi + 2.0 * k2.xi + 2.0 * k3.xi + k4.xi),
            action: state.action
                + h / 6.0 * (k1.action + 2.0 * k2.action + 2.0 * k3.action + k4.action),
            bx: state.bx + h / 6.0 * (k1.bx + 2.0 * k2.bx + 2.0 * k3.bx + k4.bx),
            bxi: state.bxi + h / 6.0 * (k1.bxi + 2.0 * k2.bxi + 2.0 * k3.bxi + k4.bxi),
        };
        if !state.x.is_finite() {
            return Err(CoreError::NonFinite {
                context: "generating fan",
                tau: tau + h,
            });
        }
    }
    Ok(state)
}

/// Cubic Hermite on [0, h] with endpoint values and derivatives.
#[inline]
fn hermite(theta: f64, h: f64, fa: f64, fb: f64, da: f64, db: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * fa + h10 * h * da + h01 * fb + h11 * h * db
}

#[inline]
fn hermite_deriv(theta: f64, h: f64, fa: f64, fb: f64, da: f64, db: f64) -> f64 {
    let t2 = theta * theta;
    let d00 = (6.0 * t2 - 6.0 * theta) / h;
    let d10 = 3.0 * t2 - 4.0 * theta + 1.0;
    let d01 = (-6.0 * t2 + 6.0 * theta) / h;
    let d11 = 3.0 * t2 - 2.0 * theta;
    d00 * fa + d10 * da + d01 * fb + d11 * db
}

struct Column {
    s: Vec<f64>,
    xi_t: Vec<f64>,
    eta_s: Vec<f64>,
    converged: Vec<bool>,
}

fn build_column(
    pot: &PotentialModel,
    s_time: f64,
    t_time: f64,
    y: f64,
    x_points: &[f64],
    opts: &TableOpts,
    nsteps: usize,
) -> Result<Column> {
    let interval = t_time - s_time;
    let x_lo = x_points[0];
    let x_hi = *x_points.last().unwrap();
    // symmetric span so that the fans for y and -y mirror each other exactly
    // (kernel symmetry for even potentials holds to roundoff)
    let span = x_lo.abs().max(x_hi.abs()) + opts.pad;
    let mut u_lo = -span - y;
    let u_hi = span - y;
    let count = ((u_hi - u_lo) / opts.fan_spacing).ceil() as usize;
    let count = count.max(8);
    let h_u = (u_hi - u_lo) / count as f64;

    let mut nodes: Vec<FanState> = Vec::with_capacity(count + 1);
    for k in 0..=count {
        let u = u_lo + k as f64 * h_u;
        nodes.push(fan_shoot(pot, s_time, t_time, y, u / interval, nsteps)?);
    }

    // dx/deta <= 0 anywhere means the short-time regime ended at a caustic;
    // checked before coverage extension, which presumes monotonicity
    for n in &nodes {
        if n.bx <= 0.0 {
            return Err(CoreError::CausticSingular { tau: interval });
        }
    }

    // extend the fan until the target x-range is covered
    let mut extra = 0usize;
    while nodes.first().unwrap().x > x_lo {
        u_lo -= h_u;
        nodes.insert(0, fan_shoot(pot, s_time, t_time, y, u_lo / interval, nsteps)?);
        extra += 1;
        if extra > 4 * count {
            return Err(CoreError::ShortTimeExceeded(format!(
                "fan cannot cover x = {x_lo} from y = {y}"
            )));
        }
    }
    while nodes.last().unwrap().x < x_hi {
        let u = u_lo + nodes.len() as f64 * h_u;
        nodes.push(fan_shoot(pot, s_time, t_time, y, u / interval, nsteps)?);
        extra += 1;
        if extra > 4 * count {
            return Err(CoreError::ShortTimeExceeded(format!(
                "fan cannot cover x = {x_hi} from y = {y}"
            )));
        }
    }

    // strictly monotone fan = unique classical path; dx/deta <= 0 is a caustic
    for w in nodes.windows(2) {
        if w[0].bx <= 0.0 || w[1].x <= w[0].x {
            return Err(CoreError::CausticSingular { tau: interval });
        }
    }
    if nodes.last().unwrap().bx <= 0.0 {
        return Err(CoreError::CausticSingular { tau: interval });
    }

    let xs: Vec<f64> = nodes.iter().map(|n| n.x).collect();
    let nx = x_points.len();
    let mut col = Column {
        s: vec![0.0; nx],
        xi_t: vec![0.0; nx],
        eta_s: vec![0.0; nx],
        converged: vec![false; nx],
    };

    let mut seg = 0usize;
    for (i, &x) in x_points.iter().enumerate() {
        // fan and x_points are both increasing: advance the segment pointer
        while seg + 2 < xs.len() && xs[seg + 1] < x {
            seg += 1;
        }
        let (a, b) = (&nodes[seg], &nodes[seg + 1]);
        let hh = b.x - a.x; // used only for the initial guess
        let mut theta = ((x - a.x) / hh).clamp(0.0, 1.0);
        let h_seg = h_u;
        let dxa = a.bx / interval;
        let dxb = b.bx / interval;
        let mut ok = false;
        let tol = opts.tol * (1.0 + x.abs());
        for _ in 0..30 {
            let fx = hermite(theta, h_seg, a.x, b.x, dxa, dxb) - x;
            if fx.abs() <= tol {
                ok = true;
                break;
            }
            let dfx = hermite_deriv(theta, h_seg, a.x, b.x, dxa, dxb);
            let step = fx / dfx;
            theta -= step / h_seg;
            if !(0.0..=1.0).contains(&theta) {
                theta = theta.clamp(0.0, 1.0);
            }
        }
        let u_star = u_lo + (seg as f64 + theta) * h_u;
        let dsa = a.xi * a.bx / interval;
        let dsb = b.xi * b.bx / interval;
        col.s[i] = hermite(theta, h_seg, a.action, b.action, dsa, dsb);
        let dxia = a.bxi / interval;
        let dxib = b.bxi / interval;
        col.xi_t[i] = hermite(theta, h_seg, a.xi, b.xi, dxia, dxib);
        col.eta_s[i] = u_star / interval;
        col.converged[i] = ok;
    }
    Ok(col)
}

/// S(t, s, x, y) with terminal/initial momenta and convergence flags on the
/// product grid; values are stored x-major (`index = i_x * ny + j_y`).
#[derive(Debug, Clone)]
pub struct GeneratingTable {
    pub s_time: f64,
    pub t_time: f64,
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub s_values: Vec<f64>,
    /// dS/dx = xi(t) along the connecting path
    pub xi_t: Vec<f64>,
    /// -dS/dy = eta(s) along the connecting path
    pub eta_s: Vec<f64>,
    pub converged: Vec<bool>,
    pub fd_stride: usize,
}

pub fn generating_table(
    pot: &PotentialModel,
    s: f64,
    t: f64,
    x_axis: &Axis,
    y_axis: &Axis,
    opts: &TableOpts,
) -> Result<GeneratingTable> {
    if !(t > s) {
        return Err(CoreError::InvalidParameter("need t > s".into()));
    }
    let nsteps = opts.nsteps.unwrap_or_else(|| table_nsteps(t - s));
    let nx = x_axis.len();
    let ny = y_axis.len();

    let columns: Vec<Result<Column>> = y_axis
        .points()
        .par_iter()
        .map(|&y| build_column(pot, s, t, y, x_axis.points(), opts, nsteps))
        .collect();

    let mut s_values = vec![0.0f64; nx * ny];
    let mut xi_t = vec![0.0f64; nx * ny];
    let mut eta_s = vec![0.0f64; nx * ny];
    let mut converged = vec![false; nx * ny];
    for (j, col) in columns.into_iter().enumerate() {
        let col = col?;
        for i in 0..nx {
            if !col.converged[i] {
                return Err(CoreError::BvpNoConvergence {
                    x: x_axis.points()[i],
                    y: y_axis.points()[j],
                    iters: 30,
                    residual: f64::NAN,
                });
            }
            let idx = i * ny + j;
            s_values[idx] = col.s[i];
            xi_t[idx] = col.xi_t[i];
            eta_s[idx] = col.eta_s[i];
            converged[idx] = col.converged[i];
        }
    }

    let stride_x = ((opts.fd_target_spacing / x_axis.spacing()).round() as usize).max(1);
    let stride_y = ((opts.fd_target_spacing / y_axis.spacing()).round() as usize).max(1);
    let fd_stride = stride_x.max(stride_y).min((nx.min(ny) - 1) / 2);

    Ok(GeneratingTable {
        s_time: s,
        t_time: t,
        x_axis: x_axis.clone(),
        y_axis: y_axis.clone(),
        s_values,
        xi_t,
        eta_s,
        converged,
        fd_stride: fd_stride.max(1),
    })
}

impl GeneratingTable {
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.y_axis.len() + j
    }

    pub fn interval(&self) -> f64 {
        self.t_time - self.s_time
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    fn clamp_center(&self, i: usize, n: usize) -> usize {
        let k = self.fd_stride;
        i.clamp(k, n - 1 - k)
    }

    /// Centered second difference in x (stencil center clamped at the border).
    pub fn sxx_at(&self, i: usize, j: usize) -> f64 {
        let k = self.fd_stride;
        let i = self.clamp_center(i, self.x_axis.len());
        let h = k as f64 * self.x_axis.spacing();
        (self.s_values[self.idx(i + k, j)] - 2.0 * self.s_values[self.idx(i, j)]
            + self.s_values[self.idx(i - k, j)])
            / (h * h)
    }

    pub fn syy_at(&self, i: usize, j: usize) -> f64 {
        let k = self.fd_stride;
        let j = self.clamp_center(j, self.y_axis.len());
        let h = k as f64 * self.y_axis.spacing();
        (self.s_values[self.idx(i, j + k)] - 2.0 * self.s_values[self.idx(i, j)]
            + self.s_values[self.idx(i, j - k)])
            / (h * h)
    }

    pub fn sxy_at(&self, i: usize, j: usize) -> f64 {
        let k = self.fd_stride;
        let i = self.clamp_center(i, self.x_axis.len());
        let j = self.clamp_center(j, self.y_axis.len());
        let hx = k as f64 * self.x_axis.spacing();
        let hy = k as f64 * self.y_axis.spacing();
        (self.s_values[self.idx(i + k, j + k)] - self.s_values[self.idx(i + k, j - k)]
            - self.s_values[self.idx(i - k, j + k)]
            + self.s_values[self.idx(i - k, j - k)])
            / (4.0 * hx * hy)
    }

    /// Max over the interior of |dS/dx - xi(t)| and |dS/dy + eta(s)|
    /// (first differences at the table spacing).
    pub fn identity_residuals(&self) -> (f64, f64) {
        let nx = self.x_axis.len();
        let ny = self.y_axis.len();
        let hx = self.x_axis.spacing();
        let hy = self.y_axis.spacing();
        let mut dev_x = 0.0f64;
        let mut dev_y = 0.0f64;
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                let sx =
                    (self.s_values[self.idx(i + 1, j)] - self.s_values[self.idx(i - 1, j)])
                        / (2.0 * hx);
                let sy =
                    (self.s_values[self.idx(i, j + 1)] - self.s_values[self.idx(i, j - 1)])
                        / (2.0 * hy);
                dev_x = dev_x.max((sx - self.xi_t[self.idx(i, j)]).abs());
                dev_y = dev_y.max((sy + self.eta_s[self.idx(i, j)]).abs());
            }
        }
        (dev_x, dev_y)
    }

    /// Max |eta(s)| over entries with |x|, |y| <= aperture (quadrature guard input).
    pub fn max_eta_within(&self, aperture: f64) -> f64 {
        let mut m = 0.0f64;
        for (i, &x) in self.x_axis.points().iter().enumerate() {
            if x.abs() > aperture {
                continue;
            }
            for (j, &y) in self.y_axis.points().iter().enumerate() {
                if y.abs() > aperture {
                    continue;
                }
                m = m.max(self.eta_s[self.idx(i, j)].abs());
            }
        }
        m
    }

    /// Max |S_xy| over the interior (sets the alias ghost displacement).
    pub fn max_sxy(&self) -> f64 {
        let k = self.fd_stride;
        let nx = self.x_axis.len();
        let ny = self.y_axis.len();
        let mut m = 0.0f64;
        // probing on a coarsened sub-lattice is enough for a smooth mixed Hessian
        let step = ((nx.min(ny)) / 128).max(1);
        let mut i = k;
        while i < nx - k {
            let mut j = k;
            while j < ny - k {
                m = m.max(self.sxy_at(i, j).abs());
                j += step;
            }
            i += step;
        }
        m
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("x,y,S,Sxx,Sxy,Syy,converged\n");
        for (i, &x) in self.x_axis.points().iter().enumerate() {
            for (j, &y) in self.y_axis.points().iter().enumerate() {
                out.push_str(&format!(
                    "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
                    x,
                    y,
                    self.s_values[self.idx(i, j)],
                    self.sxx_at(i, j),
                    self.sxy_at(i, j),
                    self.syy_at(i, j),
                    self.converged[self.idx(i, j)] as u8
                ));
            }
        }
        out
    }
}

/// Tameness diagnostics over the interior of the table.
#[derive(Debug, Clone, Copy)]
pub struct TamenessReport {
    pub max_t_sxx: f64,
    pub max_t_sxy: f64,
    pub max_t_syy: f64,
    pub min_t_det_syy: f64,
    pub delta_tilde: f64,
    pub pass: bool,
}

pub fn tameness_report(table: &GeneratingTable, delta_tilde: f64) -> TamenessReport {
    let tau = table.interval();
    let k = table.fd_stride;
    let nx = table.x_axis.len();
    let ny = table.y_axis.len();
    let mut max_sxx = 0.0f64;
    let mut max_sxy = 0.0f64;
    let mut max_syy = 0.0f64;
    let mut min_det = f64::INFINITY;
    for i in k..nx - k {
        for j in k..ny - k {
            max_sxx = max_sxx.max(table.sxx_at(i, j).abs());
            max_sxy = max_sxy.max(table.sxy_at(i, j).abs());
            let syy = table.syy_at(i, j).abs();
            max_syy = max_syy.max(syy);
            min_det = min_det.min(syy); // d = 1: det of the 1x1 block
        }
    }
    TamenessReport {
        max_t_sxx: tau * max_sxx,
        max_t_sxy: tau * max_sxy,
        max_t_syy: tau * max_syy,
        min_t_det_syy: tau * min_det,
        delta_tilde,
        pass: tau * min_det >= delta_tilde,
    }
}

/// Max Hamilton-Jacobi residual |dS/dt + |grad_x S|^2/2 + V(t, x)| over
/// interior nodes. dS/dt is a centered difference of two table builds with
/// identical stepping (so integrator bias cancels); grad_x S is the stored
/// terminal momentum xi(t), whose agreement with the finite difference of S
/// is certified separately by [`GeneratingTable::identity_residuals`].
pub fn hj_residual_max(
    pot: &PotentialModel,
    s: f64,
    t: f64,
    x_axis: &Axis,
    y_axis: &Axis,
    opts: &TableOpts,
    dt: f64,
) -> Result<f64> {
    let nsteps = opts.nsteps.unwrap_or_else(|| table_nsteps(t - s));
    let mut o = *opts;
    o.nsteps = Some(nsteps); // same stepping for all three builds
    let plus = generating_table(pot, s, t + dt, x_axis, y_axis, &o)?;
    let minus = generating_table(pot, s, t - dt, x_axis, y_axis, &o)?;
    let center = generating_table(pot, s, t, x_axis, y_axis, &o)?;
    let nx = x_axis.len();
    let ny = y_axis.len();
    let mut worst = 0.0f64;
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let idx = center.idx(i, j);
            let st = (plus.s_values[idx] - minus.s_values[idx]) / (2.0 * dt);
            let sx = center.xi_t[idx];
            let x = x_axis.points()[i];
            worst = worst.max((st + 0.5 * sx * sx + pot.v(t, x)).abs());
        }
    }
    Ok(worst)
}
