//! Numerical laboratory for time-slicing approximations of semiclassical
//! Schrödinger propagators with quadratic-growth potentials, together with the
//! phase-space (Gabor) sparsity diagnostics of the slice operators.
//!
//! Layout:
//! * [`grid`], [`fft`], [`norms`], [`dilation`] — box grids, scaled FFTs,
//!   L^p / rescaled Sobolev norms, semiclassical dilations;
//! * [`potential`], [`classical`], [`generating`] — quadratic-growth
//!   potentials, the Hamiltonian flow and shooting problem, the generating
//!   function table with tameness diagnostics;
//! * [`parametrix`] — slice kernels E^(N), composition over subdivisions,
//!   residual operators;
//! * [`reference`] — closed-form and split-step ground-truth propagators;
//! * [`gabor`], [`fio`] — STFT, modulation norms, Gabor matrices of
//!   operators, decay fits against canonical transformations.

pub mod classical;
pub mod dilation;
pub mod error;
pub mod fft;
pub mod fio;
pub mod gabor;
pub mod generating;
pub mod grid;
pub mod norms;
pub mod parametrix;
pub mod potential;
pub mod reference;

pub use error::{CoreError, Result};
pub use grid::{GridSpec, WaveFunction};
