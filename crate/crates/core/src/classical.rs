//! Classical side: the Hamiltonian flow `chi(t, s)`, its variational system,
//! the two-point boundary value problem, and the action along solutions of
//! `xdot = xi, xidot = -V'(t, x)`.

use crate::error::{CoreError, Result};
use crate::potential::PotentialModel;

/// A point of phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowPoint {
    pub x: f64,
    pub xi: f64,
}

impl FlowPoint {
    pub fn new(x: f64, xi: f64) -> Self {
        FlowPoint { x, xi }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.xi.is_finite()
    }
}

/// Default step count: dtau = (t - s) / 200.
pub fn default_nsteps(_interval: f64) -> usize {
    200
}

/// Flow state with first variations with respect to initial (y, eta):
/// columns of the 2x2 monodromy matrix.
#[derive(Debug, Clone, Copy)]
struct VarState {
    x: f64,
    xi: f64,
    // d(x, xi)/dy
    ax: f64,
    axi: f64,
    // d(x, xi)/deta
    bx: f64,
    bxi: f64,
    // running action integral of (xi^2/2 - V)
    action: f64,
}

fn rhs(pot: &PotentialModel, t: f64, s: &VarState) -> VarState {
    let vp = pot.grad_v(t, s.x);
    let vpp = pot.hess_v(t, s.x);
    VarState {
        x: s.xi,
        xi: -vp,
        ax: s.axi,
        axi: -vpp * s.ax,
        bx: s.bxi,
        bxi: -vpp * s.bx,
        action: 0.5 * s.xi * s.xi - pot.v(t, s.x),
    }
}

fn add_scaled(a: &VarState, k: &VarState, h: f64) -> VarState {
    VarState {
        x: a.x + h * k.x,
        xi: a.xi + h * k.xi,
        ax: a.ax + h * k.ax,
        axi: a.axi + h * k.axi,
        bx: a.bx + h * k.bx,
        bxi: a.bxi + h * k.bxi,
        action: a.action + h * k.action,
    }
}

fn rk4_step(pot: &PotentialModel, t: f64, h: f64, s: &VarState) -> VarState {
    let k1 = rhs(pot, t, s);
    let k2 = rhs(pot, t + 0.5 * h, &add_scaled(s, &k1, 0.5 * h));
    let k3 = rhs(pot, t + 0.5 * h, &add_scaled(s, &k2, 0.5 * h));
    let k4 = rhs(pot, t + h, &add_scaled(s, &k3, h));
    VarState {
        x: s.x + h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
        xi: s.xi + h / 6.0 * (k1.xi + 2.0 * k2.xi + 2.0 * k3.xi + k4.xi),
        ax: s.ax + h / 6.0 * (k1.ax + 2.0 * k2.ax + 2.0 * k3.ax + k4.ax),
        axi: s.axi + h / 6.0 * (k1.axi + 2.0 * k2.axi + 2.0 * k3.axi + k4.axi),
        bx: s.bx + h / 6.0 * (k1.bx + 2.0 * k2.bx + 2.0 * k3.bx + k4.bx),
        bxi: s.bxi + h / 6.0 * (k1.bxi + 2.0 * k2.bxi + 2.0 * k3.bxi + k4.bxi),
        action: s.action + h / 6.0 * (k1.action + 2.0 * k2.action + 2.0 * k3.action + k4.action),
    }
}

fn integrate(
    pot: &PotentialModel,
    s: f64,
    t: f64,
    y: f64,
    eta: f64,
    nsteps: usize,
    mut record: Option<&mut Vec<(f64, f64, f64)>>,
) -> Result<VarState> {
    let h = (t - s) / nsteps as f64;
    let mut state = VarState {
        x: y,
        xi: eta,
        ax: 1.0,
        axi: 0.0,
        bx: 0.0,
        bxi: 1.0,
        action: 0.0,
    };
    if let Some(rec) = record.as_deref_mut() {
        rec.clear();
        rec.push((s, state.x, state.xi));
    }
    for m in 0..nsteps {
        let tau = s + m as f64 * h;
        state = rk4_step(pot, tau, h, &state);
        if !state.x.is_finite() || !state.xi.is_finite() {
            return Err(CoreError::NonFinite {
                context: "hamiltonian flow",
                tau: tau + h,
            });
        }
        if let Some(rec) = record.as_deref_mut() {
            rec.push((tau + h, state.x, state.xi));
        }
    }
    Ok(state)
}

/// Integrate Hamilton's equations from `(y, eta)` at time `s` to time `t`.
pub fn hamiltonian_flow(
    pot: &PotentialModel,
    s: f64,
    t: f64,
    y: f64,
    eta: f64,
    nsteps: usize,
) -> Result<FlowPoint> {
    if nsteps == 0 {
        return Err(CoreError::InvalidParameter("nsteps must be >= 1".into()));
    }
    let st = integrate(pot, s, t, y, eta, nsteps, None)?;
    Ok(FlowPoint::new(st.x, st.xi))
}

/// The 2x2 Jacobian d(x, xi)/d(y, eta) of the flow map.
pub fn flow_jacobian(
    pot: &PotentialModel,
    s: f64,
    t: f64,
    y: f64,
    eta: f64,
    nsteps: usize,
) -> Result<[[f64; 2]; 2]> {
    let st = integrate(pot, s, t, y, eta, nsteps, None)?;
    Ok([[st.ax, st.bx], [st.axi, st.bxi]])
}

/// A solved two-point boundary problem with its dense trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub s: f64,
    pub t: f64,
    pub y: f64,
    pub x: f64,
    pub eta_star: f64,
    /// (tau, position, momentum) along the path, nsteps + 1 nodes.
    pub nodes: Vec<(f64, f64, f64)>,
}

impl Trajectory {
    pub fn terminal_momentum(&self) -> f64 {
        self.nodes.last().map(|n| n.2).unwrap_or(f64::NAN)
    }
}

/// Newton shooting on the initial momentum, using the variational dx/deta.
///
/// `eta0` warm start optional; defaults to the free-particle guess
/// `(x - y)/(t - s)`. A singular dx/deta is reported as a caustic.
pub fn classical_bvp_from(
    pot: &PotentialModel,
    s: f64,
    t: f64,
    y: f64,
    x: f64,
    tol: f64,
    eta0: Option<f64>,
    nsteps: usize,
) -> Result<Trajectory> {
    if !(t > s) {
        return Err(CoreError::InvalidParameter("need t > s".into()));
    }
    if !(tol > 0.0) {
        return Err(CoreError::InvalidParameter("tol must be positive".into()));
    }
    let mut eta = eta0.unwrap_or((x - y) / (t - s));
    let mut residual = f64::INFINITY;
    for _iter in 0..50 {
        let st = integrate(pot, s, t, y, eta, nsteps, None)?;
        residual = st.x - x;
        if residual.abs() <= tol {
            let mut nodes = Vec::with_capacity(nsteps + 1);
            let final_state = integrate(pot, s, t, y, eta, nsteps, Some(&mut nodes))?;
            debug_assert!((final_state.x - st.x).abs() < 1e-14);
            return Ok(Trajectory {
                s,
                t,
                y,
                x,
                eta_star: eta,
                nodes,
            });
        }
        let dxdeta = st.bx;
        // integrator noise floors the observable dx/deta near a focal point
        if dxdeta.abs() < 1e-6 * (t - s).abs() {
            return Err(CoreError::CausticSingular { tau: t - s });
        }
        eta -= residual / dxdeta;
        if !eta.is_finite() {
            return Err(CoreError::NonFinite {
                context: "shooting momentum",
                tau: t - s,
            });
        }
    }
    Err(CoreError::BvpNoConvergence {
        x,
        y,
        iters: 50,
        residual: residual.abs(),
    })
}

pub fn classical_bvp(
    pot: &PotentialModel,
    s: f64,
    t: f64,
    y: f64,
    x: f64,
    tol: f64,
) -> Result<Trajectory> {
    classical_bvp_from(pot, s, t, y, x, tol, None, default_nsteps(t - s))
}

/// Composite Simpson quadrature of the Lagrangian along a stored trajectory.
pub fn action_integral(pot: &PotentialModel, traj: &Trajectory) -> Result<f64> {
    let n = traj.nodes.len();
    if n < 3 || (n - 1) % 2 != 0 {
        return Err(CoreError::InvalidParameter(
            "trajectory needs an even number of steps for Simpson".into(),
        ));
    }
    let lagrangian = |node: &(f64, f64, f64)| {
        let (tau, q, p) = *node;
        0.5 * p * p - pot.v(tau, q)
    };
    let h = (traj.t - traj.s) / (n - 1) as f64;
    let mut acc = lagrangian(&traj.nodes[0]) + lagrangian(&traj.nodes[n - 1]);
    for (i, node) in traj.nodes.iter().enumerate().take(n - 1).skip(1) {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * lagrangian(node);
    }
    Ok(acc * h / 3.0)
}

/// Action + terminal data for a shooting fan node, used by the table builder.
#[derive(Debug, Clone, Copy)]
pub struct FanNode {
    pub eta: f64,
    pub x: f64,
    pub xi: f64,
    pub action: f64,
    /// dx/deta
    pub bx: f64,
    /// dxi/deta
    pub bxi: f64,
}

/// Integrate flow + action + variational state for one fan node.
pub fn shoot(pot: &PotentialModel, s: f64, t: f64, y: f64, eta: f64, nsteps: usize) -> Result<FanNode> {
    let st = integrate(pot, s, t, y, eta, nsteps, None)?;
    Ok(FanNode {
        eta,
        x: st.x,
        xi: st.xi,
        action: st.action,
        bx: st.bx,
        bxi: st.bxi,
    })
}

/// Energy `H = xi^2/2 + V` at a phase point (time-frozen).
pub fn energy(pot: &PotentialModel, t: f64, p: FlowPoint) -> f64 {
    0.5 * p.xi * p.xi + pot.v(t, p.x)
}
