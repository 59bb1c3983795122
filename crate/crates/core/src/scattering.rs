//! Comparison of the nonlinear flow with free evolution of an asymptotic state.
//!
//! The free flow shares the propagator's convention, `exp(+i |k|^2 t)` in
//! Fourier space. The finite-time asymptotic state is the backward free
//! evolution of `u(T)` to `t = 0`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::diagnostics::{edge_mass, h1_norm, lebesgue_norm, mass, Exponent};
use crate::error::{DiagnosticsError, FieldError};
use crate::grid::{Representation, Wavefield};

/// Exact free evolution `e^{it Δ}` of `f` over time `t`; returns a physical field.
pub fn free_evolve(f: &Wavefield, t: f64) -> Wavefield {
    let grid = *f.grid();
    let mut spec = f.spectral();
    for (z, k2) in spec.values_mut().iter_mut().zip(grid.wavenumber_sq()) {
        let (s, c) = libm::sincos(k2 * t);
        *z *= Complex64::new(c, s);
    }
    spec.physical()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticState {
    pub phi_plus: Wavefield,
    pub extraction_time: f64,
    /// `||u(T) - e^{iTΔ} phi_plus||_{H^1}`; rounding-level by construction.
    pub residual_h1: f64,
}

/// `phi_plus = e^{-iTΔ} u(T)`.
pub fn extract_asymptotic_state(u_t: &Wavefield, t: f64) -> Result<AsymptoticState, FieldError> {
    let phi_plus = free_evolve(u_t, -t);
    let back = free_evolve(&phi_plus, t);
    let residual_h1 = h1_norm(&back.difference(&u_t.physical())?).map_err(field_only)?;
    Ok(AsymptoticState {
        phi_plus,
        extraction_time: t,
        residual_h1,
    })
}

fn field_only(e: DiagnosticsError) -> FieldError {
    match e {
        DiagnosticsError::Field(f) => f,
        _ => FieldError::GridMismatch,
    }
}

/// Distance between `u(t)` and `e^{itΔ} phi_plus` in `L^2` and `H^1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Deficit {
    pub l2: f64,
    pub h1: f64,
}

pub fn scattering_deficit(
    u_t: &Wavefield,
    state: &AsymptoticState,
    t: f64,
) -> Result<Deficit, FieldError> {
    u_t.same_grid(&state.phi_plus)?;
    let free = free_evolve(&state.phi_plus, t);
    let diff = u_t.physical().difference(&free)?;
    Ok(Deficit {
        l2: libm::sqrt(mass(&diff).map_err(field_only)?),
        h1: h1_norm(&diff).map_err(field_only)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeDecayPoint {
    pub t: f64,
    pub norm: f64,
    pub mass: f64,
    pub edge_mass: f64,
    /// Edge mass exceeded the threshold: the box no longer emulates free space.
    pub horizon_violated: bool,
}

/// `||e^{itΔ} psi||_{L^r}` at each requested time.
pub fn free_decay_curve(
    psi: &Wavefield,
    r: Exponent,
    times: &[f64],
    margin_fraction: f64,
    edge_threshold: f64,
) -> Result<Vec<FreeDecayPoint>, DiagnosticsError> {
    let spec = psi.spectral();
    times
        .iter()
        .map(|&t| {
            let u = free_evolve(&spec, t);
            debug_assert_eq!(u.representation(), Representation::Physical);
            let em = edge_mass(&u, margin_fraction)?;
            Ok(FreeDecayPoint {
                t,
                norm: lebesgue_norm(&u, r)?,
                mass: mass(&u)?,
                edge_mass: em,
                horizon_violated: em > edge_threshold,
            })
        })
        .collect()
}
