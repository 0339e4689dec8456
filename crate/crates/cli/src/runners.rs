//! Experiment drivers: convergence orders in the mesh and in hbar,
//! uniform-boundedness sweeps, residual scaling with the Duhamel check,
//! Gabor sparsity reports, and the quarter-period sharpness probes.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use pathslice::error::CoreError;
use pathslice::fio::{
    argmax_tracking, composition_decay_check, decay_fit, fio_seminorm_within, gabor_matrix,
    samples_to_csv, CanonicalMap, FreeOp, LinearOp,
};
use pathslice::gabor::{PhaseLattice, Window};
use pathslice::generating::TableOpts;
use pathslice::grid::WaveFunction;
use pathslice::norms::{k_exponent, l2_norm, lp_norm, sobolev_multiplier, sobolev_norm};
use pathslice::parametrix::{
    apply_kernel, compose_slices, parametrix_residual, SliceFactory, Subdivision,
};
use pathslice::potential::PotentialModel;
use pathslice::reference::{exact_propagator, mehler_propagator};

use crate::config::ExperimentConfig;
use crate::family::{build_family, TestFunction};
use crate::fitting::fit_loglog;
use crate::report::*;

/// Errors below this floor are reported as the exact regime: the slicing is
/// exact up to quadrature noise and no order can (or need) be fitted.
pub const EXACT_REGIME_FLOOR: f64 = 1e-6;

fn difference(a: &WaveFunction, b: &WaveFunction) -> WaveFunction {
    WaveFunction::new(
        a.grid,
        a.hbar,
        a.values
            .iter()
            .zip(&b.values)
            .map(|(u, v)| u - v)
            .collect(),
    )
    .expect("difference field")
}

/// Source-side norm of the sharp derivative-loss pairing: `L~^p_k` for p <= 2, `L^p` for p >= 2.
fn source_norm(f: &WaveFunction, p: f64, hbar: f64) -> anyhow::Result<f64> {
    let k = k_exponent(p, 1)?;
    Ok(if p <= 2.0 {
        sobolev_norm(f, p, k, hbar)?
    } else {
        lp_norm(f, p)?
    })
}

/// Target-side norm: `L^p` for p <= 2, `L~^p_{-k}` for p >= 2.
fn target_norm(err: &WaveFunction, p: f64, hbar: f64) -> anyhow::Result<f64> {
    let k = k_exponent(p, 1)?;
    Ok(if p <= 2.0 {
        lp_norm(err, p)?
    } else {
        sobolev_norm(err, p, -k, hbar)?
    })
}

struct ReferenceCache {
    cache: HashMap<(u64, usize), Arc<WaveFunction>>,
    pub worst_accuracy: f64,
}

impl ReferenceCache {
    fn new() -> Self {
        ReferenceCache {
            cache: HashMap::new(),
            worst_accuracy: 0.0,
        }
    }

    fn get_all(
        &mut self,
        pot: &PotentialModel,
        family: &[TestFunction],
        hbar: f64,
        s: f64,
        t: f64,
    ) -> anyhow::Result<Vec<Arc<WaveFunction>>> {
        let missing: Vec<usize> = (0..family.len())
            .filter(|i| !self.cache.contains_key(&(hbar.to_bits(), *i)))
            .collect();
        let computed: Vec<(usize, anyhow::Result<(WaveFunction, f64)>)> = missing
            .par_iter()
            .map(|&i| {
                let r = exact_propagator(pot, &family[i].state, hbar, s, t)
                    .map(|sol| (sol.state, sol.accuracy))
                    .map_err(anyhow::Error::from);
                (i, r)
            })
            .collect();
        for (i, r) in computed {
            let (state, acc) = r?;
            self.worst_accuracy = self.worst_accuracy.max(acc);
            self.cache.insert((hbar.to_bits(), i), Arc::new(state));
        }
        Ok((0..family.len())
            .map(|i| self.cache[&(hbar.to_bits(), i)].clone())
            .collect())
    }
}

/// Convergence of `E^(N)(Omega, t, s)` to `U(t, s)`: errors per (hbar, L),
/// fitted slopes against the mesh and against hbar.
pub fn run_convergence(cfg: &ExperimentConfig) -> anyhow::Result<ConvergenceReport> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let pot = cfg.potential.build()?;
    let guard = cfg.guard.build();
    let (s, t) = (cfg.time.s, cfg.time.t);
    let mut factory = SliceFactory::new(pot.clone(), grid, cfg.table_opts(), guard);
    let mut refs = ReferenceCache::new();

    let mut rows: Vec<ConvRow> = Vec::new();
    let mut guards: Vec<GuardRow> = Vec::new();

    // L outermost so the (hbar-independent) generating table is reused across
    // orders and hbar values
    for &l in &cfg.subdivision.l_list {
        let subdivision = Subdivision::uniform(s, t, l)?;
        for &order in &cfg.orders {
            for &hbar in &cfg.hbar_list {
                let family = build_family(grid, hbar, &cfg.test_family);
                let references = refs.get_all(&pot, &family, hbar, s, t)?;
                let approx: Vec<WaveFunction> = family
                    .iter()
                    .map(|f| compose_slices(&mut factory, &subdivision, hbar, order, &f.state))
                    .collect::<Result<_, CoreError>>()?;
                let kernel = factory.kernel_for(s, s + subdivision.mesh(), hbar, order)?;
                guards.push(GuardRow {
                    hbar,
                    gap: subdivision.mesh(),
                    ghost_displacement: kernel.guard.ghost_displacement,
                    required_clearance: kernel.guard.required_clearance,
                    phase_step_max: kernel.guard.phase_step_max,
                    pass: kernel.guard.pass,
                });
                for &p in &cfg.p_list {
                    let mut worst = (0.0f64, String::new());
                    for ((f, a), r) in family.iter().zip(&approx).zip(&references) {
                        let err = difference(a, r);
                        let ratio =
                            target_norm(&err, p, hbar)? / source_norm(&f.state, p, hbar)?;
                        if ratio > worst.0 {
                            worst = (ratio, f.name.clone());
                        }
                    }
                    rows.push(ConvRow {
                        potential: pot.label().to_string(),
                        order,
                        p,
                        hbar,
                        l,
                        omega: subdivision.mesh(),
                        max_error: worst.0,
                        worst_function: worst.1,
                    });
                }
            }
        }
    }

    // fits
    let mut fits: Vec<SlopeEntry> = Vec::new();
    let ref_acc = refs.worst_accuracy.max(1e-12);
    for &order in &cfg.orders {
        for &p in &cfg.p_list {
            // omega fits at fixed hbar
            for &hbar in &cfg.hbar_list {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.order == order && r.p == p && r.hbar == hbar)
                    .map(|r| (r.omega, r.max_error))
                    .collect();
                if pts.len() >= 2 {
                    fits.push(make_slope_entry("omega", order, p, hbar, &pts, ref_acc, 4));
                }
            }
            // hbar fits at fixed L
            if cfg.hbar_list.len() >= 4 {
                for &l in &cfg.subdivision.l_list {
                    let pts: Vec<(f64, f64)> = rows
                        .iter()
                        .filter(|r| r.order == order && r.p == p && r.l == l)
                        .map(|r| (r.hbar, r.max_error))
                        .collect();
                    if pts.len() >= 2 {
                        fits.push(make_slope_entry("hbar", order, p, l as f64, &pts, ref_acc, 4));
                    }
                }
            }
        }
    }

    // configured PASS: every fit group is either in the exact regime or has a
    // fitted slope inside the expected-order band (N+1 +- 0.3 in the mesh, N +- 0.3 in hbar)
    let pass = fits.iter().all(|f| {
        if f.exact_regime {
            return true;
        }
        match &f.fit {
            Some(fit) => {
                let center = if f.variable == "omega" {
                    f.order as f64 + 1.0
                } else {
                    f.order as f64
                };
                (center - 0.3..=center + 0.3).contains(&fit.slope)
            }
            None => false,
        }
    });
    let report = ConvergenceReport {
        config: serde_json::to_value(cfg)?,
        rows,
        fits,
        guards,
        reference_accuracy: refs.worst_accuracy,
        exact_regime_floor: EXACT_REGIME_FLOOR,
        pass,
    };
    if let Some(dir) = &cfg.out_dir {
        write_outputs(dir, "converge", &[("errors", &report.csv())], &report)?;
    }
    Ok(report)
}

fn make_slope_entry(
    variable: &str,
    order: u8,
    p: f64,
    fixed: f64,
    pts: &[(f64, f64)],
    ref_acc: f64,
    min_points: usize,
) -> SlopeEntry {
    let max_error = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    let min_error = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let exact_regime = max_error < EXACT_REGIME_FLOOR;
    // keep only points safely above the reference floor
    let usable: Vec<(f64, f64)> = pts
        .iter()
        .copied()
        .filter(|&(_, e)| e >= 100.0 * ref_acc)
        .collect();
    let reference_limited = usable.len() < pts.len();
    let fit = if exact_regime {
        None
    } else {
        fit_loglog(&usable, min_points).ok()
    };
    SlopeEntry {
        variable: variable.into(),
        order,
        p,
        fixed,
        fit,
        exact_regime,
        reference_limited,
        max_error,
        min_error,
    }
}

/// Uniform-in-hbar boundedness proxy for `U(t, s)` in the derivative-loss pairing.
pub fn run_boundedness(cfg: &ExperimentConfig) -> anyhow::Result<BoundednessReport> {
    cfg.validate()?;
    let bcfg = cfg
        .boundedness
        .clone()
        .ok_or_else(|| anyhow::anyhow!("boundedness section missing"))?;
    let grid = cfg.grid.build()?;
    let pot = cfg.potential.build()?;
    let mut rows: Vec<BoundednessRow> = Vec::new();
    let mut p2_defect = 0.0f64;
    for &t in &bcfg.t_list {
        for &hbar in &cfg.hbar_list {
            let family = build_family(grid, hbar, &cfg.test_family);
            let images: Vec<(WaveFunction, f64)> = family
                .par_iter()
                .map(|f| {
                    exact_propagator(&pot, &f.state, hbar, 0.0, t)
                        .map(|sol| (sol.state, sol.accuracy))
                })
                .collect::<Result<_, CoreError>>()?;
            for &p in &cfg.p_list {
                let mut worst = (0.0f64, String::new());
                for (f, (img, _)) in family.iter().zip(&images) {
                    let ratio = target_norm(img, p, hbar)? / source_norm(&f.state, p, hbar)?;
                    if ratio > worst.0 {
                        worst = (ratio, f.name.clone());
                    }
                    if p == 2.0 {
                        p2_defect = p2_defect.max((ratio - 1.0).abs());
                    }
                }
                rows.push(BoundednessRow {
                    p,
                    hbar,
                    t,
                    ratio: worst.0,
                    worst_function: worst.1,
                });
            }
        }
    }
    // uniformity: ratio at each hbar vs ratio at hbar = 1
    let mut uniform = true;
    for &t in &bcfg.t_list {
        for &p in &cfg.p_list {
            let base = rows
                .iter()
                .find(|r| r.t == t && r.p == p && r.hbar == 1.0)
                .map(|r| r.ratio)
                .unwrap_or(f64::NAN);
            for r in rows.iter().filter(|r| r.t == t && r.p == p) {
                if r.ratio > bcfg.factor * base {
                    uniform = false;
                }
            }
        }
    }
    let report = BoundednessReport {
        config: serde_json::to_value(cfg)?,
        rows,
        uniform_pass: uniform,
        p2_unitary_defect: p2_defect,
        factor: bcfg.factor,
        pass: uniform,
    };
    if let Some(dir) = &cfg.out_dir {
        write_outputs(dir, "bounded", &[("ratios", &report.csv())], &report)?;
    }
    Ok(report)
}

/// Residual scaling `||G^(N) f||_2 ~ hbar^{N+1} tau^{N+1}` plus the Duhamel
/// identity at one configuration.
pub fn run_residual_scaling(cfg: &ExperimentConfig) -> anyhow::Result<ResidualReport> {
    cfg.validate()?;
    let rcfg = cfg
        .residual
        .clone()
        .ok_or_else(|| anyhow::anyhow!("residual section missing"))?;
    let grid = cfg.grid.build()?;
    let pot = cfg.potential.build()?;
    let guard = cfg.guard.build();
    let s = cfg.time.s;
    let f = build_family(grid, 1.0, &cfg.test_family)
        .into_iter()
        .next()
        .ok_or_else(|| anyhow::anyhow!("empty test family"))?
        .state;

    let hbar0 = cfg.hbar_list[0];
    let mut tau_rows: Vec<ResidualRow> = Vec::new();
    let mut hbar_rows: Vec<ResidualRow> = Vec::new();
    for &order in &cfg.orders {
        for &tau in &rcfg.tau_list {
            let (_, norm) = parametrix_residual(&pot, hbar0, s, s + tau, order, &f, &guard)?;
            tau_rows.push(ResidualRow {
                order,
                tau,
                hbar: hbar0,
                residual_l2: norm,
            });
        }
        for &hbar in &cfg.hbar_list {
            let fh = WaveFunction::new(grid, hbar, f.values.clone())?;
            let (_, norm) = parametrix_residual(
                &pot,
                hbar,
                s,
                s + rcfg.hbar_sweep_tau,
                order,
                &fh,
                &guard,
            )?;
            hbar_rows.push(ResidualRow {
                order,
                tau: rcfg.hbar_sweep_tau,
                hbar,
                residual_l2: norm,
            });
        }
    }

    let mut tau_fits = Vec::new();
    let mut hbar_fits = Vec::new();
    for &order in &cfg.orders {
        let tau_pts: Vec<(f64, f64)> = tau_rows
            .iter()
            .filter(|r| r.order == order)
            .map(|r| (r.tau, r.residual_l2))
            .collect();
        tau_fits.push(make_slope_entry("tau", order, 2.0, hbar0, &tau_pts, 1e-12, 3));
        let h_pts: Vec<(f64, f64)> = hbar_rows
            .iter()
            .filter(|r| r.order == order)
            .map(|r| (r.hbar, r.residual_l2))
            .collect();
        hbar_fits.push(make_slope_entry(
            "hbar",
            order,
            2.0,
            rcfg.hbar_sweep_tau,
            &h_pts,
            1e-12,
            3,
        ));
    }
    let mut rows = tau_rows;
    rows.extend(hbar_rows);

    let duhamel_rel_err = match &rcfg.duhamel {
        Some(d) => Some(duhamel_check(&pot, grid, &f, d, s, &guard)?),
        None => None,
    };
    // configured PASS: exponents at N+1 +- 0.3 (or exact regime) and the
    // Duhamel identity within 5e-3 when configured
    let fits_ok = tau_fits.iter().chain(hbar_fits.iter()).all(|e| {
        e.exact_regime
            || e.fit
                .as_ref()
                .map(|f| (e.order as f64 + 0.7..=e.order as f64 + 1.3).contains(&f.slope))
                .unwrap_or(false)
    });
    let duhamel_ok = duhamel_rel_err.map(|d| d < 5e-3).unwrap_or(true);
    let report = ResidualReport {
        config: serde_json::to_value(cfg)?,
        rows,
        tau_fits,
        hbar_fits,
        duhamel_rel_err,
        pass: fits_ok && duhamel_ok,
    };
    if let Some(dir) = &cfg.out_dir {
        write_outputs(dir, "residual", &[("scaling", &report.csv())], &report)?;
    }
    Ok(report)
}

/// `E^(N)(t,s) f - U(t,s) f` against
/// `-i hbar^{-1} \int_s^t U(t, tau) G^(N)(tau, s) f dtau` (Simpson).
fn duhamel_check(
    pot: &PotentialModel,
    grid: pathslice::grid::GridSpec,
    f0: &WaveFunction,
    d: &crate::config::DuhamelCfg,
    s: f64,
    guard: &pathslice::parametrix::GuardCfg,
) -> anyhow::Result<f64> {
    let t = s + d.tau;
    let f = WaveFunction::new(grid, d.hbar, f0.values.clone())?;
    let mut factory = SliceFactory::new(pot.clone(), grid, TableOpts::default(), *guard);
    let one_step = Subdivision::uniform(s, t, 1)?;
    let approx = compose_slices(&mut factory, &one_step, d.hbar, d.order, &f)?;
    let reference = exact_propagator(pot, &f, d.hbar, s, t)?.state;
    let lhs = difference(&approx, &reference);

    let nodes = if d.simpson_nodes % 2 == 0 {
        d.simpson_nodes + 1
    } else {
        d.simpson_nodes
    };
    let h = d.tau / (nodes - 1) as f64;
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.n()];
    for i in 1..nodes {
        // integrand vanishes at tau = s (G -> 0), so i = 0 contributes nothing
        let tau_i = s + i as f64 * h;
        let (g_field, _) = parametrix_residual(pot, d.hbar, s, tau_i, d.order, &f, guard)?;
        let propagated = if (t - tau_i).abs() < 1e-12 {
            g_field
        } else {
            exact_propagator(pot, &g_field, d.hbar, tau_i, t)?.state
        };
        let w = if i == nodes - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        for (a, v) in acc.iter_mut().zip(&propagated.values) {
            *a += w * v;
        }
    }
    let scale = Complex64::new(0.0, -1.0 / d.hbar) * (h / 3.0);
    let rhs = WaveFunction::new(grid, d.hbar, acc.iter().map(|v| v * scale).collect())?;
    let num = pathslice::norms::l2_distance(&lhs, &rhs)?;
    let den = l2_norm(&lhs);
    Ok(num / den)
}

/// Gabor sparsity of the slice operator against the rescaled classical flow,
/// plus the composition pairs.
pub fn run_gabor_report(cfg: &ExperimentConfig) -> anyhow::Result<GaborReport> {
    cfg.validate()?;
    let gcfg = cfg
        .gabor
        .clone()
        .ok_or_else(|| anyhow::anyhow!("gabor section missing"))?;
    let grid = cfg.grid.build()?;
    let pot = cfg.potential.build()?;
    let guard = cfg.guard.build();
    let window = Window::gaussian(grid);
    let lattice = PhaseLattice::new(&grid, gcfg.lattice.alpha, gcfg.lattice.beta, gcfg.lattice.radius)?;
    let hbar = cfg.hbar_list[0];
    let tau = gcfg.tau;
    let s = cfg.time.s;

    let mut factory = SliceFactory::new(pot.clone(), grid, cfg.table_opts(), guard);
    let slice = factory.kernel_for(s, s + tau, hbar, 0)?;
    let flow = CanonicalMap::flow(pot.clone(), s, s + tau);
    let map = pathslice::fio::rescaled_flow(flow, hbar);

    let samples = gabor_matrix(slice.as_ref(), &window, hbar, &lattice, &lattice)?;
    let r = gcfg.lattice.radius;
    let sem_full = fio_seminorm_within(&samples, &map, gcfg.m, r)?;
    let sem_inner = fio_seminorm_within(&samples, &map, gcfg.m, r - 2.0)?;
    let op_report = GaborOperatorReport {
        operator: format!("E0({}, tau={tau:.4})", pot.label()),
        decay_exponent: decay_fit(&samples, &map, 2.0, r)?,
        seminorm_m: gcfg.m,
        seminorm_full: sem_full,
        seminorm_inner: sem_inner,
        stability_ratio: sem_full / sem_inner,
        argmax_fraction: argmax_tracking(&samples, &map, &lattice, 1.0)?,
    };
    let samples_csv = samples_to_csv(&samples, &map)?;

    let mut compositions = Vec::new();
    if gcfg.compositions {
        // pair 1: two free multipliers against the composed shear
        let (t1, t2) = (0.3, 0.5);
        let rep = composition_decay_check(
            Arc::new(FreeOp { hbar, tau: t1 }),
            Arc::new(FreeOp { hbar, tau: t2 }),
            &CanonicalMap::FreeShear { tau: t1 },
            &CanonicalMap::FreeShear { tau: t2 },
            gcfg.m,
            &window,
            hbar,
            &lattice,
            &lattice,
            gcfg.composition_bound,
        )?;
        compositions.push(CompositionRow {
            pair: "free*free".into(),
            seminorm_composed: rep.seminorm_composed,
            seminorm_first: rep.seminorm_first,
            seminorm_second: rep.seminorm_second,
            ratio: rep.ratio,
            pass: rep.pass,
        });

        // pair 2: two harmonic slices against the composed rotation
        let harm_slice: Arc<dyn LinearOp> = slice.clone();
        let rep = composition_decay_check(
            harm_slice.clone(),
            harm_slice.clone(),
            &CanonicalMap::Rotation { tau },
            &CanonicalMap::Rotation { tau },
            gcfg.m,
            &window,
            hbar,
            &lattice,
            &lattice,
            gcfg.composition_bound,
        )?;
        compositions.push(CompositionRow {
            pair: "E0(harmonic)*E0(harmonic)".into(),
            seminorm_composed: rep.seminorm_composed,
            seminorm_first: rep.seminorm_first,
            seminorm_second: rep.seminorm_second,
            ratio: rep.ratio,
            pass: rep.pass,
        });

        // pair 3: harmonic slice after a free slice
        let mut free_factory =
            SliceFactory::new(PotentialModel::free(), grid, cfg.table_opts(), guard);
        let free_slice = free_factory.kernel_for(s, s + tau, hbar, 0)?;
        let rep = composition_decay_check(
            harm_slice,
            free_slice,
            &CanonicalMap::Rotation { tau },
            &CanonicalMap::FreeShear { tau },
            gcfg.m,
            &window,
            hbar,
            &lattice,
            &lattice,
            gcfg.composition_bound,
        )?;
        compositions.push(CompositionRow {
            pair: "E0(harmonic)*E0(free)".into(),
            seminorm_composed: rep.seminorm_composed,
            seminorm_first: rep.seminorm_first,
            seminorm_second: rep.seminorm_second,
            ratio: rep.ratio,
            pass: rep.pass,
        });
    }

    let op_ok = op_report.decay_exponent >= gcfg.m
        && (op_report.stability_ratio - 1.0).abs() <= 0.10
        && op_report.argmax_fraction >= 0.95;
    let pass = op_ok && compositions.iter().all(|c| c.pass);
    let report = GaborReport {
        config: serde_json::to_value(cfg)?,
        operators: vec![op_report],
        compositions,
        samples_csv,
        pass,
    };
    if let Some(dir) = &cfg.out_dir {
        write_outputs(dir, "gabor", &[("samples", &report.samples_csv)], &report)?;
    }
    Ok(report)
}

/// Quarter-period sharpness probes: the harmonic propagator at t = pi/2 is a
/// constant multiple of the Fourier transform; translation and dilation
/// families recover the sharp Sobolev-loss exponents.
pub fn run_sharpness_probe(cfg: &ExperimentConfig) -> anyhow::Result<SharpnessReport> {
    cfg.validate()?;
    let scfg = cfg.sharpness.clone().unwrap_or_default();
    let grid = cfg.grid.build()?;
    let c = std::f64::consts::PI.powf(-0.25);
    let half_pi = std::f64::consts::FRAC_PI_2;

    let mut rows = Vec::new();

    // translation family, p in (1, 2], k2 > 0: expect lambda^{k2}
    let p_trans = 1.5;
    let k2_trans = 0.5;
    let mut trans_pts = Vec::new();
    let mut p2_ratios = Vec::new();
    for &lambda in &scfg.translation_lambdas {
        let f = WaveFunction::from_fn(grid, 1.0, |x| {
            Complex64::new(c * (-(x - lambda) * (x - lambda) / 2.0).exp(), 0.0)
        })?;
        f.assert_concentrated(pathslice::grid::BOUNDARY_MASS_LIMIT)?;
        let u = mehler_propagator(&f, 1.0, half_pi)?;
        let ratio = lp_norm(&sobolev_multiplier(&u, k2_trans, 1.0), p_trans)?
            / lp_norm(&f, p_trans)?;
        rows.push(SharpnessRow {
            family: "translation".into(),
            p: p_trans,
            k2: k2_trans,
            lambda,
            ratio,
        });
        trans_pts.push((lambda, ratio));

        // p = 2, k2 = 0: no loss, the ratio must be constant in lambda
        let r2 = lp_norm(&u, 2.0)? / lp_norm(&f, 2.0)?;
        rows.push(SharpnessRow {
            family: "translation".into(),
            p: 2.0,
            k2: 0.0,
            lambda,
            ratio: r2,
        });
        p2_ratios.push(r2);
    }
    let p2_max = p2_ratios.iter().cloned().fold(0.0f64, f64::max);
    let p2_min = p2_ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let p2_constancy_defect = p2_max / p2_min - 1.0;

    // dilation family f(x/lambda), p >= 2, k2 = -k_p + 1/2:
    // expect exponent k2 + 2 d (1/2 - 1/p)
    let p_dil = 4.0;
    let k2_dil = -k_exponent(p_dil, 1)? + 0.5;
    let mut dil_pts = Vec::new();
    for &lambda in &scfg.dilation_lambdas {
        let f = WaveFunction::from_fn(grid, 1.0, |x| {
            Complex64::new(c * (-(x / lambda) * (x / lambda) / 2.0).exp(), 0.0)
        })?;
        f.assert_concentrated(pathslice::grid::BOUNDARY_MASS_LIMIT)?;
        let u = mehler_propagator(&f, 1.0, half_pi)?;
        let ratio =
            lp_norm(&sobolev_multiplier(&u, k2_dil, 1.0), p_dil)? / lp_norm(&f, p_dil)?;
        rows.push(SharpnessRow {
            family: "dilation".into(),
            p: p_dil,
            k2: k2_dil,
            lambda,
            ratio,
        });
        dil_pts.push((lambda, ratio));
    }

    let translation_fit = fit_loglog(&trans_pts, 4).ok();
    let dilation_fit = fit_loglog(&dil_pts, 4).ok();
    let dilation_expected = k2_dil + 2.0 * (0.5 - 1.0 / p_dil);
    let pass = translation_fit
        .as_ref()
        .map(|f| (f.slope - k2_trans).abs() <= 0.3)
        .unwrap_or(false)
        && dilation_fit
            .as_ref()
            .map(|f| (f.slope - dilation_expected).abs() <= 0.3)
            .unwrap_or(false)
        && p2_constancy_defect < 0.02;
    let report = SharpnessReport {
        config: serde_json::to_value(cfg)?,
        rows,
        translation_fit,
        translation_expected: k2_trans,
        p2_constancy_defect,
        dilation_fit,
        dilation_expected,
        pass,
    };
    if let Some(dir) = &cfg.out_dir {
        write_outputs(dir, "sharpness", &[("ratios", &report.csv())], &report)?;
    }
    Ok(report)
}

/// One-step slice applied through the factory (used by the acceptance suite
/// and by `flow-dump`-style smoke paths).
pub fn one_step_slice(
    pot: &PotentialModel,
    grid: pathslice::grid::GridSpec,
    guard: &pathslice::parametrix::GuardCfg,
    s: f64,
    t: f64,
    hbar: f64,
    order: u8,
    f: &WaveFunction,
) -> anyhow::Result<WaveFunction> {
    let mut factory = SliceFactory::new(pot.clone(), grid, TableOpts::default(), *guard);
    let kernel = factory.kernel_for(s, t, hbar, order)?;
    Ok(apply_kernel(&kernel, f)?)
}

/// Sample the classical flow on a phase-space grid (flow-dump).
pub fn flow_dump_csv(
    pot: &PotentialModel,
    s: f64,
    t: f64,
    radius: f64,
    count: usize,
) -> anyhow::Result<String> {
    let mut out = String::from("y,eta,x,xi\n");
    for i in 0..count {
        for j in 0..count {
            let y = -radius + 2.0 * radius * i as f64 / (count - 1) as f64;
            let eta = -radius + 2.0 * radius * j as f64 / (count - 1) as f64;
            let p = pathslice::classical::hamiltonian_flow(pot, s, t, y, eta, 200)?;
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt(y),
                fmt(eta),
                fmt(p.x),
                fmt(p.xi)
            ));
        }
    }
    Ok(out)
}
