//! Operators as phase-space objects: Gabor matrices
//! `|<T pi(z) g, pi(w) g>|`, the seminorms
//! `||T||_{m,chi} = sup <w - chi(z)>^m |<T pi(z) g, pi(w) g>|`, empirical
//! decay-order fits, and the composition law `T1 T2 in FIO(chi1 o chi2)`.
//!
//! The semiclassical class FIO_hbar(chi) is probed through the conjugation
//! `D_{hbar^{-1/2}} T D_{hbar^{1/2}}`, so a single unit-scale lattice serves
//! every hbar.

use std::sync::Arc;

use rayon::prelude::*;

use crate::classical::hamiltonian_flow;
use crate::dilation::{dilate, DilationDirection};
use crate::error::{CoreError, Result};
use crate::gabor::{stft_with_modulators, wave_packet, PhaseLattice, StftModulators, Window};
use crate::grid::WaveFunction;
use crate::parametrix::{apply_kernel, SliceKernel};
use crate::potential::PotentialModel;
use crate::reference::{free_propagator, mehler_propagator, mehler_propagator_guarded, split_step_reference};

/// A canonical transformation of the phase plane.
#[derive(Clone)]
pub enum CanonicalMap {
    Identity,
    /// (x, xi) -> (x + tau xi, xi)
    FreeShear { tau: f64 },
    /// clockwise rotation by tau (the harmonic flow)
    Rotation { tau: f64 },
    /// the Hamiltonian flow chi(t, s) of a potential
    Flow {
        pot: PotentialModel,
        s: f64,
        t: f64,
        nsteps: usize,
    },
    /// chi^hbar(z) = hbar^{-1/2} chi(hbar^{1/2} z)
    Rescaled {
        inner: Box<CanonicalMap>,
        hbar: f64,
    },
    /// outer o inner
    Composed {
        outer: Box<CanonicalMap>,
        inner: Box<CanonicalMap>,
    },
}

impl CanonicalMap {
    pub fn flow(pot: PotentialModel, s: f64, t: f64) -> Self {
        CanonicalMap::Flow {
            pot,
            s,
            t,
            nsteps: 200,
        }
    }

    pub fn composed(outer: CanonicalMap, inner: CanonicalMap) -> Self {
        CanonicalMap::Composed {
            outer: Box::new(outer),
            inner: Box::new(inner),
        }
    }

    pub fn eval(&self, z: (f64, f64)) -> Result<(f64, f64)> {
        match self {
            CanonicalMap::Identity => Ok(z),
            CanonicalMap::FreeShear { tau } => Ok((z.0 + tau * z.1, z.1)),
            CanonicalMap::Rotation { tau } => {
                let (c, s) = (tau.cos(), tau.sin());
                Ok((c * z.0 + s * z.1, -s * z.0 + c * z.1))
            }
            CanonicalMap::Flow { pot, s, t, nsteps } => {
                let p = hamiltonian_flow(pot, *s, *t, z.0, z.1, *nsteps)?;
                Ok((p.x, p.xi))
            }
            CanonicalMap::Rescaled { inner, hbar } => {
                let r = hbar.sqrt();
                let w = inner.eval((r * z.0, r * z.1))?;
                Ok((w.0 / r, w.1 / r))
            }
            CanonicalMap::Composed { outer, inner } => outer.eval(inner.eval(z)?),
        }
    }

    /// Finite-difference Jacobian determinant at z.
    pub fn jacobian_det(&self, z: (f64, f64)) -> Result<f64> {
        let h = 1e-5;
        let xp = self.eval((z.0 + h, z.1))?;
        let xm = self.eval((z.0 - h, z.1))?;
        let pp = self.eval((z.0, z.1 + h))?;
        let pm = self.eval((z.0, z.1 - h))?;
        let a = (xp.0 - xm.0) / (2.0 * h);
        let c = (xp.1 - xm.1) / (2.0 * h);
        let b = (pp.0 - pm.0) / (2.0 * h);
        let d = (pp.1 - pm.1) / (2.0 * h);
        Ok(a * d - b * c)
    }

    /// Max |det Dchi - 1| over a (count x count) sample of [-r, r]^2.
    pub fn symplectic_defect(&self, radius: f64, count: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for i in 0..count {
            for j in 0..count {
                let x = -radius + 2.0 * radius * i as f64 / (count - 1) as f64;
                let xi = -radius + 2.0 * radius * j as f64 / (count - 1) as f64;
                worst = worst.max((self.jacobian_det((x, xi))? - 1.0).abs());
            }
        }
        Ok(worst)
    }
}

/// The semiclassically rescaled flow `chi^hbar`.
pub fn rescaled_flow(map: CanonicalMap, hbar: f64) -> CanonicalMap {
    if hbar == 1.0 {
        map
    } else {
        CanonicalMap::Rescaled {
            inner: Box::new(map),
            hbar,
        }
    }
}

/// Anything that acts linearly on grid wavefunctions.
pub trait LinearOp: Send + Sync {
    fn apply_op(&self, f: &WaveFunction) -> Result<WaveFunction>;
}

pub struct IdentityOp;

impl LinearOp for IdentityOp {
    fn apply_op(&self, f: &WaveFunction) -> Result<WaveFunction> {
        Ok(f.clone())
    }
}

pub struct FreeOp {
    pub hbar: f64,
    pub tau: f64,
}

impl LinearOp for FreeOp {
    fn apply_op(&self, f: &WaveFunction) -> Result<WaveFunction> {
        Ok(free_propagator(f, self.hbar, self.tau))
    }
}

pub struct MehlerOp {
    pub hbar: f64,
    pub tau: f64,
    /// alias-clearance aperture; None uses the grid default
    pub aperture: Option<f64>,
}

impl LinearOp for MehlerOp {
    fn apply_op(&self, f: &WaveFunction) -> Result<WaveFunction> {
        match self.aperture {
            Some(a) => mehler_propagator_guarded(
                f,
                self.hbar,
                self.tau,
                &crate::parametrix::GuardCfg::with_aperture(a),
            ),
            None => mehler_propagator(f, self.hbar, self.tau),
        }
    }
}

pub struct SplitStepOp {
    pub pot: PotentialModel,
    pub hbar: f64,
    pub s: f64,
    pub t: f64,
    pub nsteps: usize,
}

impl LinearOp for SplitStepOp {
    fn apply_op(&self, f: &WaveFunction) -> Result<WaveFunction> {
        split_step_reference(&self.pot, f, self.hbar, self.s, self.t, self.nsteps)
    }
}

impl LinearOp for SliceKernel {
    fn apply_op(&self, f: &WaveFunction) -> Result<WaveFunction> {
        apply_kernel(self, f)
    }
}

/// `ops[0] o ops[1] o ...` — the last listed acts first.
pub struct ComposedOp {
    pub ops: Vec<Arc<dyn LinearOp>>,
}

impl ComposedOp {
    pub fn of(outer: Arc<dyn LinearOp>, inner: Arc<dyn LinearOp>) -> Self {
        ComposedOp {
            ops: vec![outer, inner],
        }
    }
}

impl LinearOp for ComposedOp {
    fn apply_op(&self, f: &WaveFunction) -> Result<WaveFunction> {
        let mut state = f.clone();
        for op in self.ops.iter().rev() {
            state = op.apply_op(&state)?;
        }
        Ok(state)
    }
}

/// `D_{hbar^{-1/2}} T D_{hbar^{1/2}}` — the FIO_hbar conjugation.
pub struct ConjugatedOp {
    pub inner: Arc<dyn LinearOp>,
    pub hbar: f64,
}

impl LinearOp for ConjugatedOp {
    fn apply_op(&self, f: &WaveFunction) -> Result<WaveFunction> {
        let narrowed = dilate(f, self.hbar, DilationDirection::Expand)?;
        let propagated = self.inner.apply_op(&narrowed)?;
        dilate(&propagated, self.hbar, DilationDirection::Compress)
    }
}

/// One entry of the Gabor matrix of an operator.
#[derive(Debug, Clone, Copy)]
pub struct GaborMatrixSample {
    pub z: (f64, f64),
    pub w: (f64, f64),
    pub magnitude: f64,
}

/// `|<T pi(z) g, pi(w) g>|` over latticeZ x latticeW: one operator application
/// per z, then an STFT row over all w.
pub fn gabor_matrix(
    op: &dyn LinearOp,
    window: &Window,
    hbar: f64,
    lattice_z: &PhaseLattice,
    lattice_w: &PhaseLattice,
) -> Result<Vec<GaborMatrixSample>> {
    let mods = StftModulators::new(&window.grid, lattice_w);
    let z_nodes: Vec<(f64, f64)> = lattice_z.nodes().collect();
    let rows: Vec<Result<Vec<GaborMatrixSample>>> = z_nodes
        .par_iter()
        .map(|&z| {
            let packet = wave_packet(window, hbar, z)?;
            let image = op.apply_op(&packet)?;
            let coeffs = stft_with_modulators(&image, window, lattice_w, &mods)?;
            Ok(lattice_w
                .nodes()
                .zip(coeffs)
                .map(|(w, c)| GaborMatrixSample {
                    z,
                    w,
                    magnitude: c.norm(),
                })
                .collect())
        })
        .collect();
    let mut out = Vec::with_capacity(z_nodes.len() * lattice_w.len());
    for row in rows {
        out.extend(row?);
    }
    Ok(out)
}

/// `sup <w - chi(z)>^m |G(z, w)|` over the samples.
pub fn fio_seminorm(samples: &[GaborMatrixSample], map: &CanonicalMap, m: f64) -> Result<f64> {
    fio_seminorm_within(samples, map, m, f64::INFINITY)
}

/// Seminorm restricted to `|z|_inf, |w|_inf <= radius` (truncation studies).
pub fn fio_seminorm_within(
    samples: &[GaborMatrixSample],
    map: &CanonicalMap,
    m: f64,
    radius: f64,
) -> Result<f64> {
    let mut sup = 0.0f64;
    for s in samples {
        if s.z.0.abs() > radius
            || s.z.1.abs() > radius
            || s.w.0.abs() > radius
            || s.w.1.abs() > radius
        {
            continue;
        }
        let img = map.eval(s.z)?;
        let r2 = (s.w.0 - img.0).powi(2) + (s.w.1 - img.1).powi(2);
        sup = sup.max((1.0 + r2).powf(m / 2.0) * s.magnitude);
    }
    Ok(sup)
}

/// Empirical decay order: bin by `r = |w - chi(z)|`, per-bin max magnitude
/// (the Definition is a sup bound), least-squares slope of `log max` against
/// `log(1 + r)` over `r in [r_min, r_max]`; returns the negated slope.
pub fn decay_fit(
    samples: &[GaborMatrixSample],
    map: &CanonicalMap,
    r_min: f64,
    r_max: f64,
) -> Result<f64> {
    let bin_width = 0.5;
    let nbins = ((r_max - r_min) / bin_width).ceil() as usize;
    let mut bins = vec![0.0f64; nbins];
    for s in samples {
        let img = map.eval(s.z)?;
        let r = ((s.w.0 - img.0).powi(2) + (s.w.1 - img.1).powi(2)).sqrt();
        if r < r_min || r >= r_max {
            continue;
        }
        let b = ((r - r_min) / bin_width) as usize;
        if b < nbins {
            bins[b] = bins[b].max(s.magnitude);
        }
    }
    let points: Vec<(f64, f64)> = bins
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(b, &v)| {
            let r = r_min + (b as f64 + 0.5) * bin_width;
            ((1.0 + r).ln(), v.ln())
        })
        .collect();
    if points.len() < 6 {
        return Err(CoreError::InsufficientData(format!(
            "decay fit needs >= 6 nonempty bins, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(-slope)
}

/// Fraction of z rows whose arg-max over w lands within `cells` lattice cells
/// of chi(z); rows whose image leaves the w lattice are skipped.
pub fn argmax_tracking(
    samples: &[GaborMatrixSample],
    map: &CanonicalMap,
    lattice_w: &PhaseLattice,
    cells: f64,
) -> Result<f64> {
    use std::collections::HashMap;
    let mut best: HashMap<(u64, u64), ((f64, f64), f64)> = HashMap::new();
    for s in samples {
        let key = (s.z.0.to_bits(), s.z.1.to_bits());
        let entry = best.entry(key).or_insert((s.w, 0.0));
        if s.magnitude > entry.1 {
            *entry = (s.w, s.magnitude);
        }
    }
    let tol = cells * lattice_w.alpha.max(lattice_w.beta) * 1.5;
    let mut counted = 0usize;
    let mut hits = 0usize;
    for (key, (w_best, _)) in best {
        let z = (f64::from_bits(key.0), f64::from_bits(key.1));
        let img = map.eval(z)?;
        if img.0.abs() > lattice_w.radius || img.1.abs() > lattice_w.radius {
            continue; // image outside the sampled window
        }
        counted += 1;
        let dist = ((w_best.0 - img.0).powi(2) + (w_best.1 - img.1).powi(2)).sqrt();
        if dist <= tol {
            hits += 1;
        }
    }
    if counted == 0 {
        return Err(CoreError::InsufficientData("argmax tracking".into()));
    }
    Ok(hits as f64 / counted as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct CompositionReport {
    pub seminorm_composed: f64,
    pub seminorm_first: f64,
    pub seminorm_second: f64,
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Checks `||T1 T2||_{m, chi1 o chi2} <= bound * ||T1||_{m,chi1} ||T2||_{m,chi2}`.
#[allow(clippy::too_many_arguments)]
pub fn composition_decay_check(
    op1: Arc<dyn LinearOp>,
    op2: Arc<dyn LinearOp>,
    map1: &CanonicalMap,
    map2: &CanonicalMap,
    m: f64,
    window: &Window,
    hbar: f64,
    lattice_z: &PhaseLattice,
    lattice_w: &PhaseLattice,
    bound: f64,
) -> Result<CompositionReport> {
    let sem1 = fio_seminorm(
        &gabor_matrix(op1.as_ref(), window, hbar, lattice_z, lattice_w)?,
        map1,
        m,
    )?;
    let sem2 = fio_seminorm(
        &gabor_matrix(op2.as_ref(), window, hbar, lattice_z, lattice_w)?,
        map2,
        m,
    )?;
    let composed = ComposedOp::of(op1, op2);
    let comp_map = CanonicalMap::composed(map1.clone(), map2.clone());
    let semc = fio_seminorm(
        &gabor_matrix(&composed, window, hbar, lattice_z, lattice_w)?,
        &comp_map,
        m,
    )?;
    let ratio = semc / (sem1 * sem2);
    Ok(CompositionReport {
        seminorm_composed: semc,
        seminorm_first: sem1,
        seminorm_second: sem2,
        ratio,
        bound,
        pass: ratio <= bound,
    })
}

/// CSV export of Gabor samples, with the off-graph distance per row.
pub fn samples_to_csv(samples: &[GaborMatrixSample], map: &CanonicalMap) -> Result<String> {
    let mut out = String::from("zx,zxi,wx,wxi,magnitude,r\n");
    for s in samples {
        let img = map.eval(s.z)?;
        let r = ((s.w.0 - img.0).powi(2) + (s.w.1 - img.1).powi(2)).sqrt();
        out.push_str(&format!(
            "{:.6e},{:.6e},{:.6e},{:.6e},{:.12e},{:.6e}\n",
            s.z.0, s.z.1, s.w.0, s.w.1, s.magnitude, r
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid() -> GridSpec {
        GridSpec::new(1024, 20.0).unwrap()
    }

    #[test]
    fn identity_gabor_matrix_matches_the_gaussian_overlap() {
        let g = grid();
        let w = Window::gaussian(g);
        let lat = PhaseLattice::new(&g, 1.0, 1.0, 4.0).unwrap();
        let samples = gabor_matrix(&IdentityOp, &w, 1.0, &lat, &lat).unwrap();
        let mut worst = 0.0f64;
        for s in &samples {
            let r2 = (s.w.0 - s.z.0).powi(2) + (s.w.1 - s.z.1).powi(2);
            worst = worst.max((s.magnitude - (-r2 / 4.0).exp()).abs());
        }
        assert!(worst < 1e-6, "identity overlap dev {worst:.3e}");
    }

    #[test]
    fn identity_seminorm_matches_the_scan_oracle() {
        let g = grid();
        let w = Window::gaussian(g);
        let lat = PhaseLattice::new(&g, 0.5, 0.5, 8.0).unwrap();
        let samples = gabor_matrix(&IdentityOp, &w, 1.0, &lat, &lat).unwrap();
        let sem = fio_seminorm(&samples, &CanonicalMap::Identity, 4.0).unwrap();
        // 1-D scan oracle for sup_r (1 + r^2)^2 e^{-r^2/4}
        let mut oracle = 0.0f64;
        let mut r = 0.0f64;
        while r < 12.0 {
            oracle = oracle.max((1.0 + r * r).powi(2) * (-r * r / 4.0).exp());
            r += 1e-4;
        }
        assert!((oracle - 11.12).abs() < 0.02, "oracle {oracle}");
        assert!(
            (sem - oracle).abs() < 0.3,
            "seminorm {sem:.3} vs oracle {oracle:.3}"
        );
    }

    #[test]
    fn unitary_m0_seminorm_is_at_most_one() {
        let g = grid();
        let w = Window::gaussian(g);
        let lat = PhaseLattice::new(&g, 1.0, 1.0, 5.0).unwrap();
        let op = FreeOp { hbar: 1.0, tau: 0.5 };
        let samples = gabor_matrix(&op, &w, 1.0, &lat, &lat).unwrap();
        let sem = fio_seminorm(&samples, &CanonicalMap::FreeShear { tau: 0.5 }, 0.0).unwrap();
        assert!(sem <= 1.0 + 1e-9, "m=0 seminorm {sem}");
    }

    #[test]
    fn free_flow_argmax_tracks_the_shear() {
        let g = grid();
        let w = Window::gaussian(g);
        let tau = 1.0;
        let latz = PhaseLattice::new(&g, 1.0, 1.0, 4.0).unwrap();
        let latw = PhaseLattice::new(&g, 1.0, 1.0, 9.0).unwrap();
        let op = FreeOp { hbar: 1.0, tau };
        let samples = gabor_matrix(&op, &w, 1.0, &latz, &latw).unwrap();
        let frac = argmax_tracking(
            &samples,
            &CanonicalMap::FreeShear { tau },
            &latw,
            1.0,
        )
        .unwrap();
        assert!(frac >= 0.95, "tracking fraction {frac}");
    }

    #[test]
    fn mehler_argmax_tracks_the_rotation() {
        let g = grid();
        let w = Window::gaussian(g);
        let tau = std::f64::consts::FRAC_PI_4;
        let latz = PhaseLattice::new(&g, 1.0, 1.0, 4.0).unwrap();
        let latw = PhaseLattice::new(&g, 1.0, 1.0, 7.0).unwrap();
        let op = MehlerOp { hbar: 1.0, tau, aperture: None };
        let samples = gabor_matrix(&op, &w, 1.0, &latz, &latw).unwrap();
        let frac =
            argmax_tracking(&samples, &CanonicalMap::Rotation { tau }, &latw, 1.0).unwrap();
        assert!(frac >= 0.95, "tracking fraction {frac}");
        let fit = decay_fit(&samples, &CanonicalMap::Rotation { tau }, 2.0, 8.0).unwrap();
        assert!(fit >= 4.0, "mehler decay exponent {fit}");
    }

    #[test]
    fn identity_decay_fit_is_superpolynomial_and_degrades_under_wrong_map() {
        let g = grid();
        let w = Window::gaussian(g);
        let lat = PhaseLattice::new(&g, 0.5, 0.5, 8.0).unwrap();
        let samples = gabor_matrix(&IdentityOp, &w, 1.0, &lat, &lat).unwrap();
        let right = decay_fit(&samples, &CanonicalMap::Identity, 2.0, 8.0).unwrap();
        assert!(right >= 6.0, "identity decay {right}");
        let wrong =
            decay_fit(&samples, &CanonicalMap::FreeShear { tau: 1.0 }, 2.0, 8.0).unwrap();
        assert!(wrong < right, "wrong map {wrong} vs right {right}");
    }

    #[test]
    fn composed_free_slices_match_the_one_step_seminorm() {
        // group law: two free slices against the shear by tau1 + tau2 carry
        // the same seminorm as the single step, up to truncation effects
        let g = grid();
        let w = Window::gaussian(g);
        let lat = PhaseLattice::new(&g, 1.0, 1.0, 6.0).unwrap();
        let (t1, t2) = (0.3, 0.5);
        let composed = ComposedOp::of(
            Arc::new(FreeOp { hbar: 1.0, tau: t1 }),
            Arc::new(FreeOp { hbar: 1.0, tau: t2 }),
        );
        let map = CanonicalMap::FreeShear { tau: t1 + t2 };
        let sem_comp = fio_seminorm(
            &gabor_matrix(&composed, &w, 1.0, &lat, &lat).unwrap(),
            &map,
            4.0,
        )
        .unwrap();
        let one = FreeOp {
            hbar: 1.0,
            tau: t1 + t2,
        };
        let sem_one =
            fio_seminorm(&gabor_matrix(&one, &w, 1.0, &lat, &lat).unwrap(), &map, 4.0).unwrap();
        let ratio = sem_comp / sem_one;
        assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rescaled_flow_nonlinearity_is_visible() {
        let pot = PotentialModel::harmonic_cos(0.2);
        let base = CanonicalMap::flow(pot.clone(), 0.0, 0.7);
        let hbar = 0.25;
        let rescaled = rescaled_flow(base.clone(), hbar);
        let z = (2.0, 0.0);
        let plain = base.eval(z).unwrap();
        let scaled = rescaled.eval(z).unwrap();
        // compose the three maps by hand as an independent route
        let r = hbar.sqrt();
        let inner = base.eval((r * z.0, r * z.1)).unwrap();
        let by_hand = (inner.0 / r, inner.1 / r);
        assert!((scaled.0 - by_hand.0).abs() < 1e-12);
        assert!((scaled.1 - by_hand.1).abs() < 1e-12);
        assert!(
            (scaled.0 - plain.0).abs() + (scaled.1 - plain.1).abs() > 1e-3,
            "nonlinear flow must not be scaling-invariant"
        );
        // linear flows are
        let lin = rescaled_flow(CanonicalMap::Rotation { tau: 0.7 }, hbar);
        let a = lin.eval(z).unwrap();
        let b = CanonicalMap::Rotation { tau: 0.7 }.eval(z).unwrap();
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn symplectic_defect_of_maps_is_small() {
        for map in [
            CanonicalMap::Identity,
            CanonicalMap::FreeShear { tau: 0.8 },
            CanonicalMap::Rotation { tau: 0.6 },
            CanonicalMap::flow(PotentialModel::harmonic_cos(0.2), 0.0, 0.7),
            rescaled_flow(
                CanonicalMap::flow(PotentialModel::harmonic_cos(0.2), 0.0, 0.7),
                0.25,
            ),
        ] {
            let defect = map.symplectic_defect(4.0, 5).unwrap();
            assert!(defect < 1e-6, "defect {defect:.3e}");
        }
    }
}
