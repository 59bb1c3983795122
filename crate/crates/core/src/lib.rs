//! Spectral integrator and diagnostics for the defocusing nonlinear
//! Schrödinger equation `i u_t = Δu - u|u|^alpha` on a periodic box in
//! d = 1, 2, 3.
//!
//! The crate is `no_std` and allocates through `alloc`. File formats,
//! configuration, run orchestration and the command line live in the
//! `nlslab` crate.

#![no_std]

extern crate alloc;

pub mod admissible;
pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod grid;
pub mod propagator;
pub mod scattering;

pub use admissible::{is_admissible, paper_pair, AdmissiblePair, ExtRational};
pub use diagnostics::{
    DiagnosticsConfig, DiagnosticsRecord, Exponent, Sampler, SpacetimeAccumulator,
};
pub use error::{DiagnosticsError, FieldError, GridError, PropagatorError};
pub use grid::{GridSpec, Representation, SpectralPlan, Wavefield};
pub use propagator::{
    evolve, EdgeMonitor, Evolution, InitialProfile, Observer, Propagator, SolverParams, StopReason,
};
pub use scattering::{
    extract_asymptotic_state, free_decay_curve, scattering_deficit, AsymptoticState, Deficit,
};

pub use num_complex::Complex64;
