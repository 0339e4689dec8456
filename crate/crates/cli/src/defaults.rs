//! Built-in configurations: quick defaults for each CLI subcommand and the
//! full-scale setups used by the acceptance suite.
//!
//! Grid sizes are chosen so every dense-kernel quadrature clears its alias
//! guard: the ghost displacement `2 pi hbar (t-s) / dy` must exceed twice the
//! test-family aperture plus a tail margin, which bounds `n` from below once
//! `hbar (t-s)` is fixed.

use std::f64::consts::PI;

use crate::config::*;

fn base(potential: &str, n: usize, l_box: f64, aperture: f64) -> ExperimentConfig {
    ExperimentConfig {
        potential: PotentialSpec::named(potential),
        dim: 1,
        grid: GridCfg { n, l_box },
        hbar_list: vec![1.0],
        p_list: vec![2.0],
        orders: vec![0, 1],
        time: TimeCfg { s: 0.0, t: 1.0 },
        subdivision: SubdivisionCfg {
            kind: "uniform".into(),
            l_list: vec![2, 4, 8, 16],
        },
        test_family: FamilyCfg::default(),
        guard: GuardSpec {
            aperture,
            margin: 6.0,
        },
        seed: 7,
        out_dir: None,
        residual: None,
        gabor: None,
        boundedness: None,
        sharpness: None,
    }
}

/// Quick mesh-order demo (default `converge` subcommand).
pub fn converge_default() -> ExperimentConfig {
    base("harmonic", 1024, 9.0, 8.0)
}

/// Full mesh-order setup: L in {2,...,32} at hbar = 1 with the p != 2 norms.
pub fn converge_acceptance(potential: &str) -> ExperimentConfig {
    let mut cfg = base(potential, 2048, 9.0, 8.0);
    cfg.p_list = vec![2.0, 1.5, 4.0];
    cfg.subdivision.l_list = vec![2, 4, 8, 16, 32];
    cfg
}

/// hbar-order setup: fixed L = 8, hbar down to 1/8 (finer grid for the
/// smaller ghost displacement at hbar tau = 1/64).
pub fn hbar_order_acceptance(potential: &str) -> ExperimentConfig {
    let mut cfg = base(potential, 4096, 9.0, 8.0);
    cfg.hbar_list = vec![1.0, 0.5, 0.25, 0.125];
    cfg.subdivision.l_list = vec![8];
    cfg
}

/// Residual-scaling setup with the Duhamel check.
pub fn residual_default(potential: &str) -> ExperimentConfig {
    let mut cfg = base(potential, 2048, 12.0, 5.0);
    cfg.hbar_list = vec![1.0, 0.5, 0.25];
    cfg.test_family = FamilyCfg {
        hermites: 1,
        shifts: vec![],
        modulations: vec![],
    };
    cfg.residual = Some(ResidualCfg {
        tau_list: vec![0.1, 0.2, 0.4],
        hbar_sweep_tau: 0.2,
        duhamel: Some(DuhamelCfg {
            tau: 0.4,
            hbar: 1.0,
            order: 0,
            simpson_nodes: 9,
        }),
    });
    cfg
}

/// Boundedness sweep: p in {1.5, 2, 4}, hbar down to 1/16, two time spans.
pub fn boundedness_acceptance() -> ExperimentConfig {
    let mut cfg = base("harmonic", 4096, 9.0, 8.0);
    cfg.p_list = vec![1.5, 2.0, 4.0];
    cfg.hbar_list = vec![1.0, 0.25, 0.0625];
    cfg.boundedness = Some(BoundednessCfg {
        t_list: vec![PI / 8.0, PI / 2.0],
        factor: 3.0,
    });
    cfg
}

/// Gabor sparsity of E^(0)(harmonic, pi/8) plus the composition pairs.
pub fn gabor_acceptance() -> ExperimentConfig {
    let mut cfg = base("harmonic", 1024, 20.0, 11.0);
    cfg.gabor = Some(GaborCfg {
        lattice: LatticeCfg::default(),
        tau: PI / 8.0,
        m: 4.0,
        compositions: true,
        composition_bound: 50.0,
    });
    cfg
}

/// Quarter-period sharpness probes on a wide box (translations up to 32).
pub fn sharpness_acceptance() -> ExperimentConfig {
    let mut cfg = base("harmonic", 2048, 48.0, 38.0);
    cfg.sharpness = Some(SharpnessCfg::default());
    cfg
}
