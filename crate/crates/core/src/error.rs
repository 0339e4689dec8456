use thiserror::Error;

/// Errors surfaced by the numerical kernels.
#[derive(Error, Debug, Clone)]
pub enum CoreError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension {0} is not supported (d = 1 only)")]
    UnsupportedDimension(usize),

    #[error("non-finite value encountered in {context} at tau = {tau}")]
    NonFinite { context: &'static str, tau: f64 },

    #[error("short-time threshold exceeded: {0}")]
    ShortTimeExceeded(String),

    #[error("caustic indicator: singular dx/deta at tau = {tau}")]
    CausticSingular { tau: f64 },

    #[error("shooting did not converge after {iters} iterations for (x, y) = ({x}, {y}); residual {residual:.3e}")]
    BvpNoConvergence {
        x: f64,
        y: f64,
        iters: usize,
        residual: f64,
    },

    #[error(
        "quadrature guard: alias displacement {displacement:.3} below required clearance \
         {required:.3}; need n >= {required_n} on this box"
    )]
    QuadratureGuard {
        displacement: f64,
        required: f64,
        required_n: usize,
    },

    #[error("boundary mass fraction {fraction:.3e} exceeds {limit:.1e}")]
    BoundaryMass { fraction: f64, limit: f64 },

    #[error("dilation scale {lambda} is not grid-compatible (power of two required)")]
    IncompatibleDilation { lambda: f64 },

    #[error("spectral mass {fraction:.3e} outside the representable band after dilation")]
    BandwidthExceeded { fraction: f64 },

    #[error("focal time: |sin tau| = {sin_tau:.3e} too small for the closed-form kernel")]
    FocalTime { sin_tau: f64 },

    #[error("split-step guard: potential phase per step too large; need nsteps >= {required}")]
    SplitStepResolution { required: usize },

    #[error("phase-space lattice does not cover the function: tail fraction {fraction:.3e}")]
    LatticeCoverage { fraction: f64 },

    #[error("insufficient data for fit: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
