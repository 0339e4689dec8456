//! Phase-space invariants: modulation-norm boundedness of slice operators,
//! uniformity of the semiclassical seminorms, and the flow-composition
//! transport of the decay graph.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

use pathslice::fio::{
    decay_fit, fio_seminorm, gabor_matrix, rescaled_flow, CanonicalMap, ConjugatedOp, LinearOp,
    MehlerOp,
};
use pathslice::gabor::{modulation_norm, PhaseLattice, Window};
use pathslice::generating::TableOpts;
use pathslice::grid::{GridSpec, WaveFunction};
use pathslice::parametrix::{GuardCfg, SliceFactory};
use pathslice::potential::PotentialModel;

fn family(grid: GridSpec) -> Vec<WaveFunction> {
    let c = PI.powf(-0.25);
    let mut out = Vec::new();
    for k in 0..8usize {
        out.push(
            WaveFunction::from_fn(grid, 1.0, |x| {
                let mut hm1 = 0.0f64;
                let mut h = c * (-x * x / 2.0).exp();
                for j in 0..k {
                    let next = (2.0 / (j as f64 + 1.0)).sqrt() * x * h
                        - (j as f64 / (j as f64 + 1.0)).sqrt() * hm1;
                    hm1 = h;
                    h = next;
                }
                Complex64::new(h, 0.0)
            })
            .unwrap(),
        );
    }
    for x0 in [-2.0, 2.0] {
        out.push(
            WaveFunction::from_fn(grid, 1.0, |x| {
                Complex64::new(c * (-(x - x0) * (x - x0) / 2.0).exp(), 0.0)
            })
            .unwrap(),
        );
    }
    for xi0 in [-2.0, 2.0] {
        out.push(
            WaveFunction::from_fn(grid, 1.0, |x| {
                Complex64::from_polar(c * (-x * x / 2.0).exp(), xi0 * x)
            })
            .unwrap(),
        );
    }
    out
}

#[test]
fn modulation_norm_ratios_are_stable_under_lattice_refinement() {
    let grid = GridSpec::new(1024, 20.0).unwrap();
    let window = Window::gaussian(grid);
    let pot = PotentialModel::harmonic();
    let mut factory = SliceFactory::new(
        pot,
        grid,
        TableOpts::default(),
        GuardCfg::with_aperture(11.0),
    );
    let kernel = factory.kernel_for(0.0, PI / 8.0, 1.0, 0).unwrap();
    let coarse = PhaseLattice::new(&grid, 0.5, 0.5, 12.0).unwrap();
    let fine = PhaseLattice::new(&grid, 0.25, 0.25, 12.0).unwrap();
    for p in [1.5, 2.0, 4.0] {
        let mut worst_change = 0.0f64;
        let mut max_ratio = 0.0f64;
        for f in family(grid) {
            let image = kernel.apply_op(&f).unwrap();
            let rc = modulation_norm(&image, &window, p, &coarse, None).unwrap()
                / modulation_norm(&f, &window, p, &coarse, None).unwrap();
            let rf = modulation_norm(&image, &window, p, &fine, None).unwrap()
                / modulation_norm(&f, &window, p, &fine, None).unwrap();
            worst_change = worst_change.max((rc / rf - 1.0).abs());
            max_ratio = max_ratio.max(rf);
        }
        assert!(
            worst_change < 0.10,
            "p = {p}: ratio drifted {worst_change:.3} under refinement"
        );
        assert!(max_ratio.is_finite() && max_ratio > 0.0);
    }
}

#[test]
fn semiclassical_seminorm_is_uniform_in_hbar() {
    // || U(tau) ||^hbar_{m, chi^hbar} for the harmonic flow, probed through the
    // dilation conjugation on a single unit-scale lattice
    let grid = GridSpec::new(4096, 16.0).unwrap();
    let window = Window::gaussian(grid);
    let tau = PI / 8.0;
    let latz = PhaseLattice::new(&grid, 1.0, 1.0, 6.0).unwrap();
    let latw = PhaseLattice::new(&grid, 1.0, 1.0, 8.0).unwrap();
    let mut seminorms = Vec::new();
    for hbar in [1.0, 0.25, 0.0625] {
        let op: Arc<dyn LinearOp> = Arc::new(MehlerOp { hbar, tau, aperture: Some(5.0) });
        let conj = ConjugatedOp { inner: op, hbar };
        let samples = gabor_matrix(&conj, &window, 1.0, &latz, &latw).unwrap();
        let map = rescaled_flow(CanonicalMap::Rotation { tau }, hbar);
        seminorms.push(fio_seminorm(&samples, &map, 4.0).unwrap());
    }
    let max = seminorms.iter().cloned().fold(0.0f64, f64::max);
    let min = seminorms.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(
        max / min - 1.0 < 0.5,
        "seminorm variation {:.3} across hbar: {seminorms:?}",
        max / min - 1.0
    );
}

#[test]
fn seminorm_transports_along_the_flow_composition() {
    let grid = GridSpec::new(1024, 20.0).unwrap();
    let window = Window::gaussian(grid);
    let tau = PI / 4.0;
    let lat = PhaseLattice::new(&grid, 1.0, 1.0, 6.0).unwrap();
    let op = MehlerOp { hbar: 1.0, tau, aperture: None };
    let samples = gabor_matrix(&op, &window, 1.0, &lat, &lat).unwrap();
    let direct = CanonicalMap::Rotation { tau };
    let split = CanonicalMap::composed(
        CanonicalMap::flow(PotentialModel::harmonic(), tau / 2.0, tau),
        CanonicalMap::flow(PotentialModel::harmonic(), 0.0, tau / 2.0),
    );
    let sem_direct = fio_seminorm(&samples, &direct, 4.0).unwrap();
    let sem_split = fio_seminorm(&samples, &split, 4.0).unwrap();
    assert!(
        (sem_direct / sem_split - 1.0).abs() < 0.01,
        "{sem_direct} vs {sem_split}"
    );
}

#[test]
fn alternative_window_sees_the_same_decay() {
    // window independence smoke test: Hermite-1 window, identity operator
    let grid = GridSpec::new(1024, 20.0).unwrap();
    let window = Window::hermite1(grid);
    let lat = PhaseLattice::new(&grid, 0.5, 0.5, 8.0).unwrap();
    let samples =
        gabor_matrix(&pathslice::fio::IdentityOp, &window, 1.0, &lat, &lat).unwrap();
    let fit = decay_fit(&samples, &CanonicalMap::Identity, 2.0, 8.0).unwrap();
    assert!(fit >= 4.0, "hermite-1 window decay {fit}");
}
