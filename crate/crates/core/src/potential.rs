//! Potentials of quadratic growth: `|d^a V(t, x)| <= C_a` for `|a| >= 2`.

use std::fmt;
use std::sync::Arc;

pub type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Free,
    /// V = x^2 / 2
    Harmonic,
    /// V = x^2 / 2 + amp * cos(x)
    HarmonicCos { amp: f64 },
    /// V = x^2 / 2 * (1 + amp * sin(t))
    DrivenHarmonic { amp: f64 },
    Custom {
        label: String,
        v: ScalarField,
        grad: ScalarField,
        hess: ScalarField,
        c2: f64,
        c3: f64,
        time_dependent: bool,
    },
}

/// Evaluators for `V(t, x)`, its gradient and Hessian (d = 1), with declared
/// bound constants for the second and third derivatives.
#[derive(Clone)]
pub struct PotentialModel {
    kind: Kind,
}

impl fmt::Debug for PotentialModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PotentialModel({})", self.label())
    }
}

impl PotentialModel {
    pub fn free() -> Self {
        PotentialModel { kind: Kind::Free }
    }

    pub fn harmonic() -> Self {
        PotentialModel {
            kind: Kind::Harmonic,
        }
    }

    /// The genuinely anharmonic member of the built-in suite:
    /// all derivatives of order >= 2 stay bounded, no closed-form propagator.
    pub fn harmonic_cos(amp: f64) -> Self {
        PotentialModel {
            kind: Kind::HarmonicCos { amp },
        }
    }

    pub fn driven_harmonic(amp: f64) -> Self {
        PotentialModel {
            kind: Kind::DrivenHarmonic { amp },
        }
    }

    pub fn custom(
        label: impl Into<String>,
        v: ScalarField,
        grad: ScalarField,
        hess: ScalarField,
        c2: f64,
        c3: f64,
        time_dependent: bool,
    ) -> Self {
        PotentialModel {
            kind: Kind::Custom {
                label: label.into(),
                v,
                grad,
                hess,
                c2,
                c3,
                time_dependent,
            },
        }
    }

    pub fn label(&self) -> &str {
        match &self.kind {
            Kind::Free => "free",
            Kind::Harmonic => "harmonic",
            Kind::HarmonicCos { .. } => "harmonic+cos",
            Kind::DrivenHarmonic { .. } => "driven-harmonic",
            Kind::Custom { label, .. } => label,
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self.kind, Kind::Free)
    }

    pub fn is_harmonic(&self) -> bool {
        matches!(self.kind, Kind::Harmonic)
    }

    pub fn time_dependent(&self) -> bool {
        match &self.kind {
            Kind::DrivenHarmonic { .. } => true,
            Kind::Custom { time_dependent, .. } => *time_dependent,
            _ => false,
        }
    }

    pub fn v(&self, t: f64, x: f64) -> f64 {
        match &self.kind {
            Kind::Free => 0.0,
            Kind::Harmonic => 0.5 * x * x,
            Kind::HarmonicCos { amp } => 0.5 * x * x + amp * x.cos(),
            Kind::DrivenHarmonic { amp } => 0.5 * x * x * (1.0 + amp * t.sin()),
            Kind::Custom { v, .. } => v(t, x),
        }
    }

    pub fn grad_v(&self, t: f64, x: f64) -> f64 {
        match &self.kind {
            Kind::Free => 0.0,
            Kind::Harmonic => x,
            Kind::HarmonicCos { amp } => x - amp * x.sin(),
            Kind::DrivenHarmonic { amp } => x * (1.0 + amp * t.sin()),
            Kind::Custom { grad, .. } => grad(t, x),
        }
    }

    pub fn hess_v(&self, t: f64, x: f64) -> f64 {
        match &self.kind {
            Kind::Free => 0.0,
            Kind::Harmonic => 1.0,
            Kind::HarmonicCos { amp } => 1.0 - amp * x.cos(),
            Kind::DrivenHarmonic { amp } => 1.0 + amp * t.sin(),
            Kind::Custom { hess, .. } => hess(t, x),
        }
    }

    /// Declared bound on |V''|.
    pub fn bound_c2(&self) -> f64 {
        match &self.kind {
            Kind::Free => 0.0,
            Kind::Harmonic => 1.0,
            Kind::HarmonicCos { amp } => 1.0 + amp.abs(),
            Kind::DrivenHarmonic { amp } => 1.0 + amp.abs(),
            Kind::Custom { c2, .. } => *c2,
        }
    }

    /// Declared bound on |V'''|.
    pub fn bound_c3(&self) -> f64 {
        match &self.kind {
            Kind::Free | Kind::Harmonic | Kind::DrivenHarmonic { .. } => 0.0,
            Kind::HarmonicCos { amp } => amp.abs(),
            Kind::Custom { c3, .. } => *c3,
        }
    }

    /// Spot check of the quadratic-growth hypothesis: sampled |V''| and |V'''|
    /// (finite differences of `grad_v`) against the declared constants.
    pub fn assumption_check(&self, radius: f64, samples: usize, times: &[f64]) -> AssumptionReport {
        let h = 1e-4;
        let mut max_v2 = 0.0f64;
        let mut max_v3 = 0.0f64;
        for &t in times {
            for i in 0..samples {
                let x = -radius + 2.0 * radius * i as f64 / (samples.max(2) - 1) as f64;
                let gp = self.grad_v(t, x + h);
                let gm = self.grad_v(t, x - h);
                let g0 = self.grad_v(t, x);
                max_v2 = max_v2.max(((gp - gm) / (2.0 * h)).abs());
                max_v3 = max_v3.max(((gp - 2.0 * g0 + gm) / (h * h)).abs());
            }
        }
        let slack = 1e-3;
        AssumptionReport {
            max_abs_v2: max_v2,
            max_abs_v3: max_v3,
            declared_c2: self.bound_c2(),
            declared_c3: self.bound_c3(),
            pass: max_v2 <= self.bound_c2() * (1.0 + slack) + 1e-6
                && max_v3 <= self.bound_c3() * (1.0 + slack) + 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AssumptionReport {
    pub max_abs_v2: f64,
    pub max_abs_v3: f64,
    pub declared_c2: f64,
    pub declared_c3: f64,
    pub pass: bool,
}
