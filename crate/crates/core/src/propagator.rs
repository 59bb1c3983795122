//! Strang split-step integration of `i u_t = Δu - u|u|^alpha`.
//!
//! The linear sub-flow `i u_t = Δu` is diagonal in Fourier space with
//! multiplier `exp(+i |k|^2 dt)`. The nonlinear sub-flow `i u_t = -u|u|^alpha`
//! keeps `|u|` fixed pointwise, so it is the phase rotation
//! `u -> u exp(+i dt |u|^alpha)`. Both are exact and unitary; the symmetric
//! composition is second order.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{edge_mass, lebesgue_norm, Exponent};
use crate::error::{FieldError, PropagatorError};
use crate::grid::{GridSpec, Representation, SpectralPlan, Wavefield};

/// Multiple of the initial sup norm past which a run is declared blown up.
pub const BLOWUP_FACTOR: f64 = 1.0e3;

/// Upper bound on alpha for dimension `d`, `None` when unbounded.
pub fn alpha_upper_bound(dims: usize) -> Option<f64> {
    if dims >= 3 {
        Some(4.0 / (dims as f64 - 2.0))
    } else {
        None
    }
}

/// Checks `0 < alpha < 4/(d-2)` (any positive alpha for d = 1, 2).
pub fn check_alpha(alpha: f64, dims: usize) -> Result<(), PropagatorError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(PropagatorError::Alpha(alpha));
    }
    match alpha_upper_bound(dims) {
        Some(bound) if alpha >= bound => Err(PropagatorError::AlphaRange { alpha, dims, bound }),
        _ => Ok(()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams {
    pub alpha: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamWarning {
    /// `dt > h^2 / 2`; the linear step is still exact but splitting error grows.
    CoarseStep { dt: f64, limit: f64 },
}

impl SolverParams {
    pub fn validate(&self, dims: usize) -> Result<(), PropagatorError> {
        check_alpha(self.alpha, dims)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(PropagatorError::TimeStep(self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(PropagatorError::FinalTime(self.t_end));
        }
        if self.sample_every == 0 {
            return Err(PropagatorError::Cadence);
        }
        Ok(())
    }

    pub fn warnings(&self, grid: &GridSpec) -> Vec<ParamWarning> {
        let limit = 0.5 * grid.spacing() * grid.spacing();
        let mut out = Vec::new();
        if self.dt > limit {
            out.push(ParamWarning::CoarseStep { dt: self.dt, limit });
        }
        out
    }

    /// Number of steps to reach `t_end`, rounded to the nearest integer.
    pub fn total_steps(&self) -> u64 {
        libm::round(self.t_end / self.dt) as u64
    }

    /// Time between diagnostic samples.
    pub fn sample_interval(&self) -> f64 {
        self.dt * self.sample_every as f64
    }
}

/// Initial data families.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialProfile {
    /// `A exp(-|x-c|^2 / (2 sigma^2)) exp(i v.(x-c))`.
    Gaussian {
        amplitude: f64,
        width: f64,
        center: [f64; 3],
        velocity: [f64; 3],
    },
    /// `A exp(i k.x)` with `k = 2 pi mode / L`.
    PlaneWave { amplitude: f64, mode: [i64; 3] },
    /// Band-limited field `sum_k exp(-|k|^2/(2 K^2)) exp(i theta_k) exp(i k.x)`
    /// over `|k| <= 4K`, phases drawn from `seed`, rescaled to RMS `amplitude`.
    /// The coefficient set depends only on `(L, K, seed)`, not on `N`.
    RandomPhase {
        amplitude: f64,
        seed: u64,
        spectrum_width: f64,
    },
}

impl InitialProfile {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        InitialProfile::Gaussian {
            amplitude,
            width,
            center: [0.0; 3],
            velocity: [0.0; 3],
        }
    }

    pub fn build(&self, grid: &GridSpec) -> Result<Wavefield, PropagatorError> {
        match *self {
            InitialProfile::Gaussian {
                amplitude,
                width,
                center,
                velocity,
            } => {
                if !(amplitude.is_finite() && amplitude >= 0.0) {
                    return Err(PropagatorError::Profile("amplitude"));
                }
                if !(width.is_finite() && width > 0.0) {
                    return Err(PropagatorError::Profile("width"));
                }
                let inv = 1.0 / (2.0 * width * width);
                Ok(Wavefield::from_fn(*grid, |x| {
                    let mut r2 = 0.0;
                    let mut phase = 0.0;
                    for (a, xa) in x.iter().enumerate() {
                        let dx = xa - center[a];
                        r2 += dx * dx;
                        phase += velocity[a] * dx;
                    }
                    Complex64::from_polar(amplitude * libm::exp(-r2 * inv), phase)
                }))
            }
            InitialProfile::PlaneWave { amplitude, mode } => {
                if !(amplitude.is_finite() && amplitude >= 0.0) {
                    return Err(PropagatorError::Profile("amplitude"));
                }
                let k = lattice_vector(grid, mode);
                Ok(plane_wave_field(grid, amplitude, &k, 0.0))
            }
            InitialProfile::RandomPhase {
                amplitude,
                seed,
                spectrum_width,
            } => random_phase_field(grid, amplitude, seed, spectrum_width),
        }
    }
}

fn lattice_vector(grid: &GridSpec, mode: [i64; 3]) -> [f64; 3] {
    let mut k = [0.0; 3];
    for a in 0..grid.dims() {
        k[a] = 2.0 * PI * mode[a] as f64 / grid.box_length();
    }
    k
}

fn plane_wave_field(grid: &GridSpec, amplitude: f64, k: &[f64; 3], phase0: f64) -> Wavefield {
    Wavefield::from_fn(*grid, |x| {
        let phase: f64 = x.iter().zip(k).map(|(xa, ka)| xa * ka).sum();
        Complex64::from_polar(amplitude, phase + phase0)
    })
}

fn random_phase_field(
    grid: &GridSpec,
    amplitude: f64,
    seed: u64,
    spectrum_width: f64,
) -> Result<Wavefield, PropagatorError> {
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(PropagatorError::Profile("amplitude"));
    }
    if !(spectrum_width.is_finite() && spectrum_width > 0.0) {
        return Err(PropagatorError::Profile("spectrum_width"));
    }
    let d = grid.dims();
    let n = grid.points_per_axis();
    let l = grid.box_length();
    let cutoff = 4.0 * spectrum_width;
    let max_index = libm::floor(cutoff * l / (2.0 * PI)) as i64;
    if max_index >= (n / 2) as i64 {
        return Err(PropagatorError::Profile("spectrum_width"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = Wavefield::zeros(*grid, Representation::Spectral);
    let span = |a: usize| if a < d { -max_index..=max_index } else { 0..=0 };
    let mut coeff_sq = 0.0;
    for m0 in span(0) {
        for m1 in span(1) {
            for m2 in span(2) {
                let m = [m0, m1, m2];
                let k2: f64 = m[..d]
                    .iter()
                    .map(|&mi| {
                        let k = 2.0 * PI * mi as f64 / l;
                        k * k
                    })
                    .sum();
                // always draw so the sequence is independent of the cutoff test
                let theta = 2.0 * PI * rng.gen::<f64>();
                if k2 > cutoff * cutoff {
                    continue;
                }
                let mag = libm::exp(-k2 / (2.0 * spectrum_width * spectrum_width));
                // x_0 = -L/2 contributes exp(-i pi m) = (-1)^m per axis
                let parity: i64 = m[..d].iter().sum();
                let sign = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let mut idx = [0usize; 3];
                for a in 0..d {
                    idx[a] = m[a].rem_euclid(n as i64) as usize;
                }
                spec.values_mut()[grid.ravel(idx)] = Complex64::from_polar(sign * mag, theta);
                coeff_sq += mag * mag;
            }
        }
    }
    // Raw inverse gives sum_k c_k e^{ik x}; mass is L^d sum |c_k|^2.
    let mut values = spec.into_values();
    SpectralPlan::new(grid).inverse_raw(&mut values);
    let scale = if coeff_sq > 0.0 {
        amplitude / libm::sqrt(coeff_sq)
    } else {
        0.0
    };
    values.iter_mut().for_each(|z| *z *= scale);
    Ok(Wavefield::new(*grid, Representation::Physical, values)?)
}

fn check_finite(f: &Wavefield, step: u64) -> Result<(), PropagatorError> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(PropagatorError::NonFinite { step })
    }
}

/// `|u|^alpha` with `0^alpha = 0`, evaluated from `|u|^2`.
fn modulus_pow(norm_sqr: f64, half_alpha: f64) -> f64 {
    if norm_sqr == 0.0 {
        0.0
    } else if half_alpha == 1.0 {
        norm_sqr
    } else {
        libm::exp(half_alpha * libm::log(norm_sqr))
    }
}

fn rotate_phase(values: &mut [Complex64], dt: f64, alpha: f64) {
    let half_alpha = 0.5 * alpha;
    for z in values.iter_mut() {
        let theta = dt * modulus_pow(z.norm_sqr(), half_alpha);
        let (s, c) = libm::sincos(theta);
        *z *= Complex64::new(c, s);
    }
}

/// Exact free evolution over `dt`; returns the field in its input representation.
pub fn linear_step(f: &Wavefield, dt: f64) -> Result<Wavefield, PropagatorError> {
    check_finite(f, 0)?;
    let grid = *f.grid();
    let mut spec = f.spectral();
    for (z, k2) in spec.values_mut().iter_mut().zip(grid.wavenumber_sq()) {
        let (s, c) = libm::sincos(k2 * dt);
        *z *= Complex64::new(c, s);
    }
    Ok(match f.representation() {
        Representation::Spectral => spec,
        Representation::Physical => spec.physical(),
    })
}

/// Exact nonlinear sub-flow over `dt`; physical representation only.
pub fn nonlinear_step(f: &Wavefield, dt: f64, alpha: f64) -> Result<Wavefield, PropagatorError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(PropagatorError::Alpha(alpha));
    }
    f.expect(Representation::Physical)?;
    check_finite(f, 0)?;
    let mut out = f.clone();
    rotate_phase(out.values_mut(), dt, alpha);
    Ok(out)
}

/// One symmetric step `L(dt/2) N(dt) L(dt/2)`.
pub fn strang_step(f: &Wavefield, dt: f64, alpha: f64) -> Result<Wavefield, PropagatorError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(PropagatorError::Alpha(alpha));
    }
    let repr = f.representation();
    let mut u = f.physical();
    let mut prop = Propagator::new(f.grid(), alpha, dt)?;
    prop.advance(&mut u, 1)?;
    Ok(match repr {
        Representation::Physical => u,
        Representation::Spectral => u.spectral(),
    })
}

/// Cached multipliers and transforms for repeated stepping on one grid.
#[derive(Clone, Debug)]
pub struct Propagator {
    grid: GridSpec,
    alpha: f64,
    dt: f64,
    plan: SpectralPlan,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    steps: u64,
}

impl Propagator {
    pub fn new(grid: &GridSpec, alpha: f64, dt: f64) -> Result<Self, PropagatorError> {
        Self::with_linear_sign(grid, alpha, dt, 1.0)
    }

    /// Propagator whose linear multiplier is `exp(sign * i |k|^2 dt)`.
    ///
    /// Only `sign = 1` integrates the equation; the flipped sign exists so
    /// the validation suite can prove it detects a wrong convention.
    #[doc(hidden)]
    pub fn with_linear_sign(
        grid: &GridSpec,
        alpha: f64,
        dt: f64,
        sign: f64,
    ) -> Result<Self, PropagatorError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(PropagatorError::Alpha(alpha));
        }
        if !dt.is_finite() {
            return Err(PropagatorError::TimeStep(dt));
        }
        let norm = 1.0 / grid.total_points() as f64;
        let k2 = grid.wavenumber_sq();
        let mult = |tau: f64| -> Vec<Complex64> {
            k2.iter()
                .map(|k2| {
                    let (s, c) = libm::sincos(sign * k2 * tau);
                    Complex64::new(c * norm, s * norm)
                })
                .collect()
        };
        Ok(Self {
            grid: *grid,
            alpha,
            dt,
            plan: SpectralPlan::new(grid),
            half: mult(0.5 * dt),
            full: mult(dt),
            steps: 0,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Steps taken so far by this propagator.
    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    fn apply(&mut self, values: &mut [Complex64], full: bool) {
        self.plan.forward_raw(values);
        let mult = if full { &self.full } else { &self.half };
        for (z, m) in values.iter_mut().zip(mult) {
            *z *= *m;
        }
        self.plan.inverse_raw(values);
    }

    /// Advances a physical field by `steps` Strang steps, fusing adjacent
    /// linear half-steps. Checks finiteness once at the end.
    pub fn advance(&mut self, u: &mut Wavefield, steps: u64) -> Result<(), PropagatorError> {
        u.expect(Representation::Physical)?;
        if u.grid() != &self.grid {
            return Err(FieldError::GridMismatch.into());
        }
        if steps == 0 {
            return Ok(());
        }
        let (dt, alpha) = (self.dt, self.alpha);
        let values = u.values_mut();
        self.apply(values, false);
        for i in 0..steps {
            rotate_phase(values, dt, alpha);
            self.apply(values, i + 1 < steps);
        }
        self.steps += steps;
        check_finite(u, self.steps)
    }

    /// Exact free evolution by `steps * dt` (no nonlinearity).
    pub fn advance_free(&mut self, u: &mut Wavefield, steps: u64) -> Result<(), PropagatorError> {
        u.expect(Representation::Physical)?;
        let values = u.values_mut();
        for _ in 0..steps {
            self.apply(values, true);
        }
        self.steps += steps;
        check_finite(u, self.steps)
    }
}

/// Receives every sampled state of an [`evolve`] run.
pub trait Observer {
    fn observe(&mut self, step: u64, t: f64, u: &Wavefield);
}

impl<F: FnMut(u64, f64, &Wavefield)> Observer for F {
    fn observe(&mut self, step: u64, t: f64, u: &Wavefield) {
        self(step, t, u)
    }
}

/// Validity monitor settings for [`evolve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeMonitor {
    pub margin_fraction: f64,
    pub abort_threshold: f64,
}

impl Default for EdgeMonitor {
    fn default() -> Self {
        Self {
            margin_fraction: 0.1,
            abort_threshold: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopReason {
    Completed,
    /// Edge mass crossed the abort threshold at `t`; that sample is not observed.
    EdgeMass {
        t: f64,
        edge_mass: f64,
    },
    /// Non-finite value appeared; indicates an implementation bug.
    NonFinite {
        step: u64,
    },
    /// Sup norm exceeded [`BLOWUP_FACTOR`] times its initial value.
    BlowUp {
        step: u64,
        linf: f64,
    },
}

impl StopReason {
    pub fn is_sentinel(&self) -> bool {
        matches!(
            self,
            StopReason::NonFinite { .. } | StopReason::BlowUp { .. }
        )
    }

    pub fn label(&self) -> &'static str {
        match self {
            StopReason::Completed => "completed",
            StopReason::EdgeMass { .. } => "edge_mass_abort",
            StopReason::NonFinite { .. } => "non_finite",
            StopReason::BlowUp { .. } => "blow_up",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub final_state: Wavefield,
    pub final_time: f64,
    pub steps: u64,
    pub stop: StopReason,
    /// First time the edge mass exceeded its threshold, or `t_end`.
    pub validity_horizon: f64,
}

/// Integrates from `phi` to `params.t_end`, handing every sample (every
/// `sample_every` steps, plus the final step) to `observer`.
pub fn evolve(
    phi: &Wavefield,
    params: &SolverParams,
    monitor: &EdgeMonitor,
    observer: &mut dyn Observer,
) -> Result<Evolution, PropagatorError> {
    let grid = *phi.grid();
    params.validate(grid.dims())?;
    phi.expect(Representation::Physical)?;
    check_finite(phi, 0)?;
    let total = params.total_steps();
    let mut prop = Propagator::new(&grid, params.alpha, params.dt)?;
    let mut u = phi.clone();
    let linf0 = lebesgue_norm(&u, Exponent::Infinity)
        .map_err(|_| PropagatorError::NonFinite { step: 0 })?;

    let mut step = 0u64;
    let stop = loop {
        let t = step as f64 * params.dt;
        if !u.is_finite() {
            break StopReason::NonFinite { step };
        }
        let linf = lebesgue_norm(&u, Exponent::Infinity).unwrap_or(f64::INFINITY);
        if linf0 > 0.0 && linf > BLOWUP_FACTOR * linf0 {
            break StopReason::BlowUp { step, linf };
        }
        let em = edge_mass(&u, monitor.margin_fraction).unwrap_or(0.0);
        if em > monitor.abort_threshold {
            break StopReason::EdgeMass { t, edge_mass: em };
        }
        observer.observe(step, t, &u);
        if step >= total {
            break StopReason::Completed;
        }
        let chunk = params.sample_every.min(total - step);
        match prop.advance(&mut u, chunk) {
            Ok(()) => step += chunk,
            Err(PropagatorError::NonFinite { .. }) => {
                step += chunk;
                break StopReason::NonFinite { step };
            }
            Err(e) => return Err(e),
        }
    };
    let final_time = step as f64 * params.dt;
    let validity_horizon = match stop {
        StopReason::EdgeMass { t, .. } => t,
        _ => params.t_end,
    };
    Ok(Evolution {
        final_state: u,
        final_time,
        steps: step,
        stop,
        validity_horizon,
    })
}

/// Exact plane-wave solution `A exp(i (k.x + (|k|^2 + A^alpha) t))`.
pub fn plane_wave_oracle(
    amplitude: f64,
    k: &[f64],
    t: f64,
    grid: &GridSpec,
    alpha: f64,
) -> Result<Wavefield, PropagatorError> {
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(PropagatorError::Amplitude(amplitude));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(PropagatorError::Alpha(alpha));
    }
    if k.len() != grid.dims() {
        return Err(PropagatorError::OffLattice);
    }
    let mut kv = [0.0; 3];
    for (a, &ka) in k.iter().enumerate() {
        let m = ka * grid.box_length() / (2.0 * PI);
        if !ka.is_finite() || (m - libm::round(m)).abs() > 1e-9 {
            return Err(PropagatorError::OffLattice);
        }
        kv[a] = ka;
    }
    let k2: f64 = k.iter().map(|x| x * x).sum();
    let omega = k2 + libm::pow(amplitude, alpha);
    Ok(plane_wave_field(grid, amplitude, &kv, omega * t))
}

/// Closed-form free evolution of the centered Gaussian `A exp(-|x|^2/(2 sigma^2))`.
///
/// With multiplier `exp(+i |k|^2 t)` the spectrum keeps its Gaussian shape
/// with complex variance `s = sigma^2 - 2 i t`, giving
/// `A (sigma^2 / s)^{d/2} exp(-|x|^2 / (2 s))`.
pub fn free_gaussian_oracle(
    amplitude: f64,
    sigma: f64,
    t: f64,
    grid: &GridSpec,
) -> Result<Wavefield, PropagatorError> {
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(PropagatorError::Amplitude(amplitude));
    }
    let min = 4.0 * grid.spacing();
    if !(sigma.is_finite() && sigma >= min) {
        return Err(PropagatorError::Unresolved { sigma, min });
    }
    let width = dispersed_width(sigma, t);
    if 6.0 * width > grid.box_length() {
        return Err(PropagatorError::ExceedsBox {
            width,
            box_length: grid.box_length(),
        });
    }
    let s = Complex64::new(sigma * sigma, -2.0 * t);
    let prefactor = (Complex64::new(sigma * sigma, 0.0) / s)
        .sqrt()
        .powi(grid.dims() as i32)
        * amplitude;
    let inv = (s * 2.0).inv();
    Ok(Wavefield::from_fn(*grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        prefactor * (-inv * r2).exp()
    }))
}

/// Width parameter `|sigma^2 - 2it| / sigma` of the freely dispersed Gaussian.
pub fn dispersed_width(sigma: f64, t: f64) -> f64 {
    libm::sqrt(sigma * sigma * sigma * sigma + 4.0 * t * t) / sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{energy, mass};
    use alloc::vec;

    fn max_err(a: &Wavefield, b: &Wavefield) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    fn grid1(n: usize, l: f64) -> GridSpec {
        GridSpec::new(1, n, l).unwrap()
    }

    #[test]
    fn alpha_range_per_dimension() {
        assert!(check_alpha(3.9, 3).is_ok());
        assert!(matches!(
            check_alpha(4.0, 3),
            Err(PropagatorError::AlphaRange { .. })
        ));
        assert!(check_alpha(100.0, 1).is_ok());
        assert!(check_alpha(100.0, 2).is_ok());
        assert!(matches!(
            check_alpha(0.0, 1),
            Err(PropagatorError::Alpha(_))
        ));
        assert!(matches!(
            check_alpha(f64::NAN, 2),
            Err(PropagatorError::Alpha(_))
        ));
    }

    #[test]
    fn coarse_step_is_only_a_warning() {
        let g = grid1(64, 10.0);
        let p = SolverParams {
            alpha: 2.0,
            dt: 0.1,
            t_end: 1.0,
            sample_every: 1,
        };
        assert!(p.validate(1).is_ok());
        assert_eq!(p.warnings(&g).len(), 1);
    }

    #[test]
    fn linear_step_keeps_constants() {
        let g = grid1(16, 8.0);
        let c = Complex64::new(0.7, 0.2);
        let f = Wavefield::from_fn(g, |_| c);
        let out = linear_step(&f, 0.37).unwrap();
        assert!(out.values().iter().all(|z| (z - c).norm() < 1e-14));
    }

    #[test]
    fn linear_step_on_single_mode_matches_substitution() {
        // u = A e^{i(kx + k^2 t)} solves i u_t = -k^2 u = Δu.
        let g = grid1(32, 2.0 * PI);
        let k = 3.0;
        let dt = 0.125;
        let f = Wavefield::from_fn(g, |x| Complex64::from_polar(0.8, k * x[0]));
        let out = linear_step(&f, dt).unwrap();
        let expect = Wavefield::from_fn(g, |x| Complex64::from_polar(0.8, k * x[0] + k * k * dt));
        assert!(max_err(&out, &expect) < 1e-13);
        assert!((out.sum_sq() - f.sum_sq()).abs() / f.sum_sq() < 1e-14);
    }

    #[test]
    fn linear_step_rejects_non_finite_input() {
        let g = grid1(8, 8.0);
        let mut f = Wavefield::zeros(g, Representation::Physical);
        f.values_mut()[3] = Complex64::new(f64::NAN, 0.0);
        assert_eq!(
            linear_step(&f, 0.1),
            Err(PropagatorError::NonFinite { step: 0 })
        );
    }

    #[test]
    fn nonlinear_step_examples() {
        let g = grid1(8, 8.0);
        let zero = Wavefield::zeros(g, Representation::Physical);
        assert_eq!(nonlinear_step(&zero, 0.3, 1.5).unwrap(), zero);

        // d/dt u = i |u|^alpha u with |u| = A fixed: u(dt) = A e^{i dt A^alpha}.
        let (a, dt, alpha) = (1.7, 0.21, 1.3);
        let f = Wavefield::from_fn(g, |_| Complex64::new(a, 0.0));
        let out = nonlinear_step(&f, dt, alpha).unwrap();
        let expect = Complex64::from_polar(a, dt * libm::pow(a, alpha));
        assert!(out.values().iter().all(|z| (z - expect).norm() < 1e-14));

        assert_eq!(
            nonlinear_step(&f, dt, 0.0),
            Err(PropagatorError::Alpha(0.0))
        );
        assert!(nonlinear_step(&f.spectral(), dt, 1.0).is_err());
    }

    #[test]
    fn nonlinear_step_preserves_modulus_exactly() {
        let g = grid1(64, 10.0);
        let f = InitialProfile::RandomPhase {
            amplitude: 1.0,
            seed: 3,
            spectrum_width: 1.0,
        }
        .build(&g)
        .unwrap();
        let out = nonlinear_step(&f, 0.5, 2.5).unwrap();
        for (a, b) in f.values().iter().zip(out.values()) {
            assert!((a.norm() - b.norm()).abs() <= 4.0 * f64::EPSILON * a.norm());
        }
    }

    #[test]
    fn strang_step_on_zero_field_is_linear_step() {
        let g = grid1(16, 8.0);
        let zero = Wavefield::zeros(g, Representation::Physical);
        assert_eq!(
            strang_step(&zero, 0.1, 2.0).unwrap(),
            linear_step(&zero, 0.1).unwrap()
        );
    }

    #[test]
    fn strang_step_on_plane_wave_matches_oracle_phase() {
        let g = grid1(64, 2.0 * PI);
        let (a, alpha, dt) = (0.5, 2.0, 0.01);
        let f = plane_wave_oracle(a, &[2.0], 0.0, &g, alpha).unwrap();
        let one = strang_step(&f, dt, alpha).unwrap();
        let exact = plane_wave_oracle(a, &[2.0], dt, &g, alpha).unwrap();
        assert!(max_err(&one, &exact) < 1e-12);
    }

    #[test]
    fn half_steps_agree_with_full_step_to_third_order() {
        let g = grid1(128, 20.0);
        let f = InitialProfile::gaussian(1.0, 1.0).build(&g).unwrap();
        let mut errs = vec![];
        for dt in [0.04, 0.02] {
            let one = strang_step(&f, dt, 2.0).unwrap();
            let two = strang_step(&strang_step(&f, dt / 2.0, 2.0).unwrap(), dt / 2.0, 2.0).unwrap();
            errs.push(max_err(&one, &two));
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio > 6.0 && ratio < 10.0, "local error ratio {ratio}");
    }

    #[test]
    fn evolve_with_zero_horizon_yields_initial_sample_only() {
        let g = grid1(64, 20.0);
        let phi = InitialProfile::gaussian(1.0, 1.0).build(&g).unwrap();
        let params = SolverParams {
            alpha: 2.0,
            dt: 0.01,
            t_end: 0.0,
            sample_every: 10,
        };
        let mut times = vec![];
        let out = evolve(
            &phi,
            &params,
            &EdgeMonitor::default(),
            &mut |_s: u64, t: f64, _u: &Wavefield| times.push(t),
        )
        .unwrap();
        assert_eq!(times, vec![0.0]);
        assert_eq!(out.stop, StopReason::Completed);
        assert_eq!(out.final_state, phi);
    }

    #[test]
    fn evolve_samples_on_cadence_and_at_end() {
        let g = grid1(64, 20.0);
        let phi = InitialProfile::gaussian(1.0, 1.0).build(&g).unwrap();
        let params = SolverParams {
            alpha: 2.0,
            dt: 0.01,
            t_end: 0.25,
            sample_every: 10,
        };
        let mut steps = vec![];
        evolve(
            &phi,
            &params,
            &EdgeMonitor::default(),
            &mut |s: u64, _t: f64, _u: &Wavefield| steps.push(s),
        )
        .unwrap();
        assert_eq!(steps, vec![0, 10, 20, 25]);
    }

    #[test]
    fn plane_wave_norms_stay_constant() {
        let g = grid1(32, 2.0 * PI);
        let phi = plane_wave_oracle(0.9, &[1.0], 0.0, &g, 3.0).unwrap();
        let params = SolverParams {
            alpha: 3.0,
            dt: 0.01,
            t_end: 1.0,
            sample_every: 10,
        };
        let mut norms = vec![];
        evolve(
            &phi,
            &params,
            &EdgeMonitor {
                margin_fraction: 0.1,
                abort_threshold: 1.0,
            },
            &mut |_s: u64, _t: f64, u: &Wavefield| {
                norms.push(lebesgue_norm(u, Exponent::Finite(3.0)).unwrap())
            },
        )
        .unwrap();
        for v in &norms {
            assert!((v - norms[0]).abs() < 1e-12 * norms[0]);
        }
    }

    #[test]
    fn edge_abort_records_horizon() {
        let g = grid1(256, 20.0);
        let phi = InitialProfile::gaussian(1.0, 1.0).build(&g).unwrap();
        let params = SolverParams {
            alpha: 2.0,
            dt: 0.01,
            t_end: 20.0,
            sample_every: 10,
        };
        let mut last = 0.0;
        let out = evolve(
            &phi,
            &params,
            &EdgeMonitor {
                margin_fraction: 0.1,
                abort_threshold: 1e-3,
            },
            &mut |_s: u64, t: f64, _u: &Wavefield| last = t,
        )
        .unwrap();
        assert!(matches!(out.stop, StopReason::EdgeMass { .. }));
        assert!(out.validity_horizon > last && out.validity_horizon < 20.0);
    }

    #[test]
    fn plane_wave_oracle_examples() {
        let g = grid1(16, 2.0 * PI);
        let f = plane_wave_oracle(1.2, &[3.0], 0.0, &g, 2.0).unwrap();
        for (flat, z) in f.values().iter().enumerate() {
            let x = g.coordinate(flat);
            assert!((z - Complex64::from_polar(1.2, 3.0 * x)).norm() < 1e-14);
        }
        let t = 0.73;
        let f = plane_wave_oracle(1.0, &[0.0], t, &g, 2.0).unwrap();
        let expect = Complex64::from_polar(1.0, t);
        assert!(f.values().iter().all(|z| (z - expect).norm() < 1e-14));

        assert_eq!(
            plane_wave_oracle(1.0, &[0.5], 0.0, &g, 2.0),
            Err(PropagatorError::OffLattice)
        );
    }

    #[test]
    fn time_reversal_recovers_conjugate_data() {
        let g = grid1(256, 40.0);
        let phi = InitialProfile::Gaussian {
            amplitude: 1.0,
            width: 1.5,
            center: [1.0, 0.0, 0.0],
            velocity: [0.5, 0.0, 0.0],
        }
        .build(&g)
        .unwrap();
        let mut prop = Propagator::new(&g, 2.0, 0.005).unwrap();
        let mut u = phi.clone();
        prop.advance(&mut u, 400).unwrap();
        let mut v = u.conj();
        prop.advance(&mut v, 400).unwrap();
        assert!(max_err(&v, &phi.conj()) < 1e-8);
    }

    #[test]
    fn fused_advance_matches_repeated_strang_steps() {
        let g = grid1(64, 16.0);
        let phi = InitialProfile::gaussian(1.0, 1.0).build(&g).unwrap();
        let mut u = phi.clone();
        Propagator::new(&g, 1.5, 0.01)
            .unwrap()
            .advance(&mut u, 7)
            .unwrap();
        let mut w = phi;
        for _ in 0..7 {
            w = strang_step(&w, 0.01, 1.5).unwrap();
        }
        assert!(max_err(&u, &w) < 1e-13);
    }

    #[test]
    fn free_gaussian_oracle_examples() {
        let g = grid1(512, 80.0);
        let f0 = free_gaussian_oracle(1.0, 1.0, 0.0, &g).unwrap();
        let phi = InitialProfile::gaussian(1.0, 1.0).build(&g).unwrap();
        assert!(max_err(&f0, &phi) < 1e-14);

        let m0 = mass(&f0).unwrap();
        let mut last_sup = f64::INFINITY;
        for t in [0.5, 1.0, 2.0, 4.0] {
            let f = free_gaussian_oracle(1.0, 1.0, t, &g).unwrap();
            assert!((mass(&f).unwrap() - m0).abs() < 1e-10 * m0);
            let sup = lebesgue_norm(&f, Exponent::Infinity).unwrap();
            assert!(sup < last_sup);
            last_sup = sup;
        }
        assert!(matches!(
            free_gaussian_oracle(1.0, 0.5, 0.0, &g),
            Err(PropagatorError::Unresolved { .. })
        ));
        assert!(matches!(
            free_gaussian_oracle(1.0, 1.0, 40.0, &g),
            Err(PropagatorError::ExceedsBox { .. })
        ));
    }

    #[test]
    fn free_gaussian_oracle_matches_spectral_quadrature() {
        // u(t,x) = (1/2pi) int exp(-sigma^2 k^2 / 2) sigma sqrt(2pi) A e^{i k^2 t} e^{ikx} dk,
        // evaluated by the trapezoid rule on [-K, K]; spectrally accurate for this integrand.
        let g = grid1(256, 40.0);
        let (a, sigma, t) = (1.3, 1.2, 1.7);
        let f = free_gaussian_oracle(a, sigma, t, &g).unwrap();
        let kmax = 12.0;
        let m = 4000;
        let dk = 2.0 * kmax / m as f64;
        for flat in (0..256).step_by(17) {
            let x = g.coordinate(flat);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..=m {
                let k = -kmax + j as f64 * dk;
                let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                let mag = libm::exp(-0.5 * sigma * sigma * k * k);
                acc += Complex64::from_polar(w * mag, k * k * t + k * x);
            }
            let quad = acc * dk * sigma * a / libm::sqrt(2.0 * PI);
            assert!((quad - f.values()[flat]).norm() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn free_run_matches_gaussian_oracle() {
        let g = grid1(1024, 160.0);
        let mut u = InitialProfile::gaussian(1.0, 1.0).build(&g).unwrap();
        let mut prop = Propagator::new(&g, 1.0, 0.01).unwrap();
        prop.advance_free(&mut u, 300).unwrap();
        let exact = free_gaussian_oracle(1.0, 1.0, 3.0, &g).unwrap();
        let e = max_err(&u, &exact);
        assert!(e < 1e-10, "err {e}");
    }

    #[test]
    fn random_phase_profile_is_resolution_independent() {
        let coarse = GridSpec::new(1, 64, 20.0).unwrap();
        let fine = GridSpec::new(1, 128, 20.0).unwrap();
        let p = InitialProfile::RandomPhase {
            amplitude: 0.7,
            seed: 11,
            spectrum_width: 0.8,
        };
        let a = p.build(&coarse).unwrap();
        let b = p.build(&fine).unwrap();
        for m in 0..64 {
            assert!((a.values()[m] - b.values()[2 * m]).norm() < 1e-12);
        }
        // RMS amplitude: mass = A^2 L.
        assert!((mass(&a).unwrap() - 0.49 * 20.0).abs() < 1e-10);
    }

    #[test]
    fn energy_drift_is_small_over_a_short_run() {
        let g = grid1(256, 40.0);
        let phi = InitialProfile::gaussian(1.0, 1.0).build(&g).unwrap();
        let e0 = energy(&phi, 2.0).unwrap();
        let mut u = phi.clone();
        Propagator::new(&g, 2.0, 1e-3)
            .unwrap()
            .advance(&mut u, 2000)
            .unwrap();
        assert!((energy(&u, 2.0).unwrap() - e0).abs() / e0 < 1e-5);
        assert!((mass(&u).unwrap() - mass(&phi).unwrap()).abs() / mass(&phi).unwrap() < 1e-13);
    }
}
