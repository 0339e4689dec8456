//! The fixed test family: Hermite functions h_0..h_7 plus shifted and
//! modulated Gaussians, normalized in the source norm of each experiment.

use num_complex::Complex64;

use pathslice::grid::{GridSpec, WaveFunction};

use crate::config::FamilyCfg;

pub struct TestFunction {
    pub name: String,
    pub state: WaveFunction,
}

/// Orthonormal Hermite functions via the stable three-term recurrence.
pub fn hermite_function(grid: GridSpec, hbar: f64, k: usize) -> WaveFunction {
    let c = std::f64::consts::PI.powf(-0.25);
    let values: Vec<Complex64> = grid
        .points()
        .map(|x| {
            let mut hm1 = 0.0f64;
            let mut h = c * (-x * x / 2.0).exp();
            for j in 0..k {
                let next =
                    (2.0 / (j as f64 + 1.0)).sqrt() * x * h - (j as f64 / (j as f64 + 1.0)).sqrt() * hm1;
                hm1 = h;
                h = next;
            }
            Complex64::new(h, 0.0)
        })
        .collect();
    WaveFunction::new(grid, hbar, values).expect("hermite function on grid")
}

pub fn build_family(grid: GridSpec, hbar: f64, cfg: &FamilyCfg) -> Vec<TestFunction> {
    let mut family = Vec::new();
    for k in 0..cfg.hermites {
        family.push(TestFunction {
            name: format!("hermite{k}"),
            state: hermite_function(grid, hbar, k),
        });
    }
    let c = std::f64::consts::PI.powf(-0.25);
    for &x0 in &cfg.shifts {
        let state = WaveFunction::from_fn(grid, hbar, |x| {
            Complex64::new(c * (-(x - x0) * (x - x0) / 2.0).exp(), 0.0)
        })
        .expect("shifted gaussian");
        family.push(TestFunction {
            name: format!("shift{x0:+.0}"),
            state,
        });
    }
    for &xi0 in &cfg.modulations {
        let state = WaveFunction::from_fn(grid, hbar, |x| {
            Complex64::from_polar(c * (-x * x / 2.0).exp(), xi0 * x)
        })
        .expect("modulated gaussian");
        family.push(TestFunction {
            name: format!("mod{xi0:+.0}"),
            state,
        });
    }
    family
}
