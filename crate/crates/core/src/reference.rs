//! Ground-truth propagators: the free flow as an exact Fourier multiplier,
//! the harmonic-oscillator closed form (validated at build time against the
//! split-step solver), and a Strang split-step spectral solver for general
//! quadratic-growth potentials.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::fft::{apply_multiplier, fft_raw, FftDirection};
use crate::grid::WaveFunction;
use crate::norms::{l2_distance, l2_norm, pairwise_sum_complex};
use crate::potential::PotentialModel;

/// `e^{-i hbar tau |xi|^2 / 2}` as a Fourier multiplier (exact on the grid).
pub fn free_propagator(f: &WaveFunction, hbar: f64, tau: f64) -> WaveFunction {
    let mut out = f.clone();
    apply_multiplier(&mut out, |xi| {
        Complex64::from_polar(1.0, -0.5 * hbar * tau * xi * xi)
    });
    out
}

/// Harmonic-oscillator kernel
/// `(2 pi i hbar sin tau)^{-1/2} exp( i [(x^2 + y^2) cos tau - 2 x y] / (2 hbar sin tau) )`
/// with the branch tracked through focal times by the index `floor(tau / pi)`.
///
/// This closed form is carried as implementation knowledge and is gated behind
/// a split-step validation test before use.
pub fn mehler_propagator(f: &WaveFunction, hbar: f64, tau: f64) -> Result<WaveFunction> {
    mehler_propagator_guarded(f, hbar, tau, &crate::parametrix::GuardCfg::for_grid(&f.grid))
}

/// [`mehler_propagator`] with an explicit alias-clearance aperture, for use on
/// states known to be concentrated well inside the box.
pub fn mehler_propagator_guarded(
    f: &WaveFunction,
    hbar: f64,
    tau: f64,
    guard: &crate::parametrix::GuardCfg,
) -> Result<WaveFunction> {
    if !(tau > 0.0) {
        return Err(CoreError::InvalidParameter("mehler needs tau > 0".into()));
    }
    let sin_tau = tau.sin();
    if sin_tau.abs() <= 0.05 {
        return Err(CoreError::FocalTime { sin_tau });
    }
    f.assert_concentrated(crate::grid::BOUNDARY_MASS_LIMIT)?;
    let grid = f.grid;
    let n = grid.n();
    let dy = grid.dx();
    // alias ghost clearance for the dense kernel: |S_xy| = 1/|sin tau|
    let displacement = 2.0 * std::f64::consts::PI * hbar * sin_tau.abs() / dy;
    let required = 2.0 * guard.aperture + guard.margin;
    if displacement < required {
        let dy_needed = 2.0 * std::f64::consts::PI * hbar * sin_tau.abs() / required;
        let required_n = ((2.0 * grid.half_width() / dy_needed).ceil() as usize)
            .max(n + 1)
            .next_power_of_two();
        return Err(CoreError::QuadratureGuard {
            displacement,
            required,
            required_n,
        });
    }
    let maslov = (tau / std::f64::consts::PI).floor();
    let modulus = (2.0 * std::f64::consts::PI * hbar * sin_tau.abs()).powf(-0.5);
    let branch = -std::f64::consts::FRAC_PI_4 - maslov * std::f64::consts::FRAC_PI_2;
    let pref = Complex64::from_polar(modulus * dy, branch);
    let cot = tau.cos() / sin_tau;
    let inv_sin = 1.0 / sin_tau;

    let mut values = vec![Complex64::new(0.0, 0.0); n];
    values.par_iter_mut().enumerate().for_each_init(
        || vec![Complex64::new(0.0, 0.0); n],
        |scratch, (i, out)| {
            let x = grid.point(i);
            for j in 0..n {
                let y = grid.point(j);
                let phase = ((x * x + y * y) * cot - 2.0 * x * y * inv_sin) / (2.0 * hbar);
                scratch[j] = Complex64::from_polar(1.0, phase) * f.values[j];
            }
            *out = pref * pairwise_sum_complex(scratch);
        },
    );
    WaveFunction::new(grid, f.hbar, values)
}

/// Strang splitting `e^{-i V dt / 2 hbar} e^{i hbar dt Lap / 2} e^{-i V dt / 2 hbar}`
/// per step (midpoint-time potential for time-dependent V); second order in dt
/// and exactly norm-preserving on the grid.
pub fn split_step_reference(
    pot: &PotentialModel,
    f: &WaveFunction,
    hbar: f64,
    s: f64,
    t: f64,
    nsteps: usize,
) -> Result<WaveFunction> {
    if nsteps == 0 || !(t > s) {
        return Err(CoreError::InvalidParameter("bad split-step interval".into()));
    }
    let grid = f.grid;
    let n = grid.n();
    let dt = (t - s) / nsteps as f64;

    // potential-phase resolution guideline: V_max dt / hbar < pi / 4
    let v_max = grid
        .points()
        .map(|x| pot.v(s, x).abs())
        .fold(0.0, f64::max);
    if v_max * dt / hbar >= std::f64::consts::FRAC_PI_4 {
        let required =
            ((t - s) * v_max / (hbar * std::f64::consts::FRAC_PI_4)).ceil() as usize + 1;
        return Err(CoreError::SplitStepResolution { required });
    }

    let kinetic: Vec<Complex64> = (0..n)
        .map(|k| {
            let xi = grid.freq_bin(k);
            Complex64::from_polar(1.0 / n as f64, -0.5 * hbar * dt * xi * xi)
        })
        .collect();
    let time_dep = pot.time_dependent();
    let half_v_at = |tt: f64| -> Vec<Complex64> {
        grid.points()
            .map(|x| Complex64::from_polar(1.0, -0.5 * dt * pot.v(tt, x) / hbar))
            .collect()
    };
    let mut half_v = half_v_at(s + 0.5 * dt);

    let mut buf = f.values.clone();
    for m in 0..nsteps {
        if time_dep && m > 0 {
            half_v = half_v_at(s + (m as f64 + 0.5) * dt);
        }
        for (v, h) in buf.iter_mut().zip(&half_v) {
            *v *= h;
        }
        fft_raw(&mut buf, FftDirection::Forward);
        for (v, k) in buf.iter_mut().zip(&kinetic) {
            *v *= k; // includes the 1/n normalization
        }
        fft_raw(&mut buf, FftDirection::Inverse);
        for (v, h) in buf.iter_mut().zip(&half_v) {
            *v *= h;
        }
    }
    WaveFunction::new(grid, f.hbar, buf)
}

/// Reference accuracy target: two orders below the smallest slicing error
/// measured by the experiment layer.
pub const REFERENCE_TOLERANCE: f64 = 1e-8;

/// Outcome of the exact-propagator dispatch, with its accuracy estimate.
pub struct ReferenceSolution {
    pub state: WaveFunction,
    /// Self-consistency estimate (step-doubling defect, or closed-form floor).
    pub accuracy: f64,
    pub nsteps_used: usize,
}

/// Dispatch: closed forms where available, otherwise split-step with
/// automatic step doubling until self-consistent to `REFERENCE_TOLERANCE`.
pub fn exact_propagator(
    pot: &PotentialModel,
    f: &WaveFunction,
    hbar: f64,
    s: f64,
    t: f64,
) -> Result<ReferenceSolution> {
    let tau = t - s;
    if pot.is_free() {
        return Ok(ReferenceSolution {
            state: free_propagator(f, hbar, tau),
            accuracy: 1e-12,
            nsteps_used: 1,
        });
    }
    if pot.is_harmonic() && tau > 0.0 && tau.sin().abs() > 0.05 {
        if let Ok(state) = mehler_propagator(f, hbar, tau) {
            return Ok(ReferenceSolution {
                state,
                accuracy: 1e-9,
                nsteps_used: 1,
            });
        }
    }
    let v_max = f
        .grid
        .points()
        .map(|x| pot.v(s, x).abs())
        .fold(0.0, f64::max);
    let mut nsteps = (((tau * v_max / hbar) / 0.5).ceil() as usize).clamp(256, 1 << 21);
    let mut prev = split_step_reference(pot, f, hbar, s, t, nsteps)?;
    let scale = l2_norm(f).max(1e-300);
    loop {
        nsteps *= 2;
        let next = split_step_reference(pot, f, hbar, s, t, nsteps)?;
        let diff = l2_distance(&next, &prev)? / scale;
        if diff <= REFERENCE_TOLERANCE {
            return Ok(ReferenceSolution {
                state: next,
                accuracy: diff,
                nsteps_used: nsteps,
            });
        }
        if nsteps >= 1 << 22 {
            return Err(CoreError::ShortTimeExceeded(format!(
                "split-step did not self-converge below {REFERENCE_TOLERANCE} at {nsteps} steps"
            )));
        }
        prev = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    fn gaussian(grid: GridSpec) -> WaveFunction {
        WaveFunction::from_fn(grid, 1.0, |x| {
            Complex64::new(PI.powf(-0.25) * (-x * x / 2.0).exp(), 0.0)
        })
        .unwrap()
    }

    fn rel_l2(a: &WaveFunction, b: &WaveFunction) -> f64 {
        l2_distance(a, b).unwrap() / l2_norm(b)
    }

    #[test]
    fn free_tau_zero_is_identity_and_group_law_holds() {
        let g = GridSpec::new(512, 16.0).unwrap();
        let f = gaussian(g);
        let id = free_propagator(&f, 1.0, 0.0);
        assert!(rel_l2(&id, &f) < 1e-14);
        let two = free_propagator(&free_propagator(&f, 1.0, 0.4), 1.0, 0.6);
        let one = free_propagator(&f, 1.0, 1.0);
        assert!(rel_l2(&two, &one) < 1e-12);
    }

    #[test]
    fn free_gaussian_spreading_matches_closed_form() {
        let g = GridSpec::new(1024, 20.0).unwrap();
        let f = WaveFunction::from_fn(g, 1.0, |x| Complex64::new((-x * x / 2.0).exp(), 0.0))
            .unwrap();
        let tau = 0.8;
        let out = free_propagator(&f, 1.0, tau);
        let mut worst = 0.0f64;
        for (j, v) in out.values.iter().enumerate() {
            let x = g.point(j);
            let expect =
                (1.0 + tau * tau).powf(-0.25) * (-x * x / (2.0 * (1.0 + tau * tau))).exp();
            if expect > 1e-8 {
                worst = worst.max((v.norm() - expect).abs() / expect);
            }
        }
        assert!(worst < 1e-8, "spreading dev {worst:.3e}");
    }

    #[test]
    fn mehler_is_validated_against_split_step() {
        let g = GridSpec::new(512, 12.0).unwrap();
        let pot = PotentialModel::harmonic();
        let f = gaussian(g);
        let tau = 0.3;
        let closed = mehler_propagator(&f, 1.0, tau).unwrap();
        let split = split_step_reference(&pot, &f, 1.0, 0.0, tau, 2000).unwrap();
        assert!(rel_l2(&closed, &split) < 1e-6, "{}", rel_l2(&closed, &split));
    }

    #[test]
    fn mehler_past_the_first_focal_time() {
        let g = GridSpec::new(512, 12.0).unwrap();
        let pot = PotentialModel::harmonic();
        let f = gaussian(g);
        let tau = 3.5; // sin < 0, Maslov index 1
        let closed = mehler_propagator(&f, 1.0, tau).unwrap();
        let split = split_step_reference(&pot, &f, 1.0, 0.0, tau, 8000).unwrap();
        assert!(rel_l2(&closed, &split) < 1e-6, "{}", rel_l2(&closed, &split));
    }

    #[test]
    fn mehler_ground_state_phase() {
        let g = GridSpec::new(512, 12.0).unwrap();
        let f = gaussian(g); // the ground state, E = 1/2
        let tau = 0.7;
        let out = mehler_propagator(&f, 1.0, tau).unwrap();
        let phase = Complex64::from_polar(1.0, -tau / 2.0);
        let mut worst = 0.0f64;
        for (a, b) in out.values.iter().zip(&f.values) {
            worst = worst.max((a - phase * b).norm());
        }
        assert!(worst < 1e-6, "ground state dev {worst:.3e}");
    }

    #[test]
    fn mehler_refuses_focal_times() {
        let g = GridSpec::new(256, 12.0).unwrap();
        let f = gaussian(g);
        assert!(matches!(
            mehler_propagator(&f, 1.0, PI).unwrap_err(),
            CoreError::FocalTime { .. }
        ));
    }

    #[test]
    fn split_step_is_unitary_and_second_order() {
        let g = GridSpec::new(512, 12.0).unwrap();
        let pot = PotentialModel::harmonic_cos(0.2);
        let f = gaussian(g);
        let out = split_step_reference(&pot, &f, 1.0, 0.0, 1.0, 512).unwrap();
        assert!((l2_norm(&out) - l2_norm(&f)).abs() < 1e-10);

        // Richardson self-convergence: error(n)/error(2n) near 4
        let reference = split_step_reference(&pot, &f, 1.0, 0.0, 1.0, 32768).unwrap();
        let e1 = rel_l2(
            &split_step_reference(&pot, &f, 1.0, 0.0, 1.0, 512).unwrap(),
            &reference,
        );
        let e2 = rel_l2(
            &split_step_reference(&pot, &f, 1.0, 0.0, 1.0, 1024).unwrap(),
            &reference,
        );
        let ratio = e1 / e2;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "second-order ratio {ratio} (e1 {e1:.3e}, e2 {e2:.3e})"
        );
    }

    #[test]
    fn split_step_free_equals_free_propagator_in_one_step() {
        let g = GridSpec::new(512, 16.0).unwrap();
        let pot = PotentialModel::free();
        let f = gaussian(g);
        let split = split_step_reference(&pot, &f, 1.0, 0.0, 0.7, 1).unwrap();
        let free = free_propagator(&f, 1.0, 0.7);
        assert!(rel_l2(&split, &free) < 1e-13);
    }

    #[test]
    fn evolution_law_of_references() {
        let g = GridSpec::new(512, 12.0).unwrap();
        let pot = PotentialModel::harmonic_cos(0.2);
        let f = gaussian(g);
        let whole = exact_propagator(&pot, &f, 1.0, 0.0, 0.9).unwrap().state;
        let part = exact_propagator(&pot, &f, 1.0, 0.0, 0.4).unwrap().state;
        let part = exact_propagator(&pot, &part, 1.0, 0.4, 0.9).unwrap().state;
        assert!(rel_l2(&part, &whole) < 1e-8, "{}", rel_l2(&part, &whole));
    }

    #[test]
    fn dispatch_matches_closed_forms_and_self_consistency() {
        let g = GridSpec::new(512, 12.0).unwrap();
        let f = gaussian(g);

        let free = exact_propagator(&PotentialModel::free(), &f, 1.0, 0.0, 0.5).unwrap();
        assert!(rel_l2(&free.state, &free_propagator(&f, 1.0, 0.5)) < 1e-14);

        let harm = exact_propagator(&PotentialModel::harmonic(), &f, 1.0, 0.0, 0.4).unwrap();
        let closed = mehler_propagator(&f, 1.0, 0.4).unwrap();
        assert!(rel_l2(&harm.state, &closed) < 1e-8);

        let custom = exact_propagator(&PotentialModel::harmonic_cos(0.2), &f, 1.0, 0.0, 0.5)
            .unwrap();
        assert!(custom.accuracy < 1e-8, "accuracy {:.3e}", custom.accuracy);
    }

    #[test]
    fn focal_time_kernel_statement_via_split_step() {
        // U(pi) f = e^{-i pi/2} f(-x) for the harmonic oscillator at hbar = 1
        let g = GridSpec::new(1024, 12.0).unwrap();
        let pot = PotentialModel::harmonic();
        let f = WaveFunction::from_fn(g, 1.0, |x| {
            Complex64::new(
                PI.powf(-0.25) * (-(x - 1.0) * (x - 1.0) / 2.0).exp(),
                0.0,
            )
        })
        .unwrap();
        let out = exact_propagator(&pot, &f, 1.0, 0.0, PI).unwrap().state;
        let phase = Complex64::from_polar(1.0, -PI / 2.0);
        let n = g.n();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for j in 1..n {
            let mirrored = phase * f.values[n - j];
            num += (out.values[j] - mirrored).norm_sqr();
            den += mirrored.norm_sqr();
        }
        let rel = (num / den).sqrt();
        assert!(rel < 1e-6, "focal-time reflection dev {rel:.3e}");
    }
}
