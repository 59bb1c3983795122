//! Functionals of a sampled field: Lebesgue and Sobolev norms, the
//! conserved quantities, localized mass, Gagliardo–Nirenberg ratios,
//! interaction-Morawetz accumulators and the box-validity monitor.
//!
//! Integrals are grid Riemann sums `h^d sum_m g(u_m)`. Gradient terms are
//! evaluated spectrally through the multiplier `|k|^2`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::DiagnosticsError;
use crate::grid::{GridSpec, Representation, SpectralPlan, Wavefield};
use crate::propagator::Observer;

/// Extended-real Lebesgue exponent.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    fn check(self) -> Result<(), DiagnosticsError> {
        match self {
            Exponent::Finite(r) if !(r >= 1.0 && r.is_finite()) => {
                Err(DiagnosticsError::Exponent(r))
            }
            _ => Ok(()),
        }
    }
}

fn pow_abs(norm_sqr: f64, r: f64) -> f64 {
    if norm_sqr == 0.0 {
        0.0
    } else if r == 2.0 {
        norm_sqr
    } else {
        libm::exp(0.5 * r * libm::log(norm_sqr))
    }
}

/// `h^d sum |u|^r`, i.e. the r-th power of the `L^r` norm.
pub fn lebesgue_integral(f: &Wavefield, r: f64) -> Result<f64, DiagnosticsError> {
    Exponent::Finite(r).check()?;
    f.expect(Representation::Physical)?;
    let sum: f64 = f.values().iter().map(|z| pow_abs(z.norm_sqr(), r)).sum();
    Ok(f.grid().cell_volume() * sum)
}

/// `(h^d sum |u|^r)^{1/r}`, or `max |u|` for `r = inf`.
pub fn lebesgue_norm(f: &Wavefield, r: Exponent) -> Result<f64, DiagnosticsError> {
    r.check()?;
    f.expect(Representation::Physical)?;
    match r {
        Exponent::Infinity => Ok(libm::sqrt(
            f.values().iter().map(|z| z.norm_sqr()).fold(0.0, f64::max),
        )),
        Exponent::Finite(r) => Ok(libm::pow(lebesgue_integral(f, r)?, 1.0 / r)),
    }
}

/// `||u||_{L^2}^2`; either representation.
pub fn mass(f: &Wavefield) -> Result<f64, DiagnosticsError> {
    Ok(f.grid().cell_volume() * f.sum_sq())
}

/// `||grad u||_{L^2}^2` from the spectral multiplier `|k|^2`.
pub fn gradient_norm_sq(f: &Wavefield) -> Result<f64, DiagnosticsError> {
    let grid = f.grid();
    let k2 = grid.wavenumber_sq();
    let sum: f64 = match f.representation() {
        Representation::Spectral => f
            .values()
            .iter()
            .zip(&k2)
            .map(|(z, k)| k * z.norm_sqr())
            .sum(),
        Representation::Physical => {
            let mut values = f.values().to_vec();
            SpectralPlan::new(grid).forward(&mut values);
            values.iter().zip(&k2).map(|(z, k)| k * z.norm_sqr()).sum()
        }
    };
    Ok(grid.cell_volume() * sum)
}

/// `1/2 ||grad u||^2 + 1/(alpha+2) ||u||_{alpha+2}^{alpha+2}`; either representation.
pub fn energy(f: &Wavefield, alpha: f64) -> Result<f64, DiagnosticsError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(DiagnosticsError::Alpha(alpha));
    }
    let kinetic = 0.5 * gradient_norm_sq(f)?;
    let u = f.physical();
    let potential = lebesgue_integral(&u, alpha + 2.0)? / (alpha + 2.0);
    Ok(kinetic + potential)
}

/// `(||u||^2 + ||grad u||^2)^{1/2}`; either representation.
pub fn h1_norm(f: &Wavefield) -> Result<f64, DiagnosticsError> {
    Ok(libm::sqrt(mass(f)? + gradient_norm_sq(f)?))
}

/// Number of cells per axis in a window of physical side `side`.
pub fn window_cells(grid: &GridSpec, side: f64) -> usize {
    // tolerance keeps exact multiples of h from rounding up
    let cells = side / grid.spacing();
    let w = libm::ceil(cells - 1e-9 * cells.max(1.0)) as usize;
    w.max(1)
}

fn sliding_sums_along(
    data: &mut [f64],
    grid: &GridSpec,
    axis: usize,
    window: usize,
    line: &mut Vec<f64>,
) {
    let n = grid.points_per_axis();
    let stride = n.pow((grid.dims() - 1 - axis) as u32);
    let block = stride * n;
    line.resize(n, 0.0);
    for base in (0..data.len()).step_by(block) {
        for offset in 0..stride {
            let start = base + offset;
            let mut run: f64 = (0..window).map(|j| data[start + (j % n) * stride]).sum();
            for i in 0..n {
                line[i] = run;
                run += data[start + ((i + window) % n) * stride] - data[start + i * stride];
            }
            for (i, v) in line.iter().enumerate() {
                data[start + i * stride] = *v;
            }
        }
    }
}

/// `sup_x ||u||_{L^2(Q(x))}` over periodic grid-aligned cubes of side
/// `ceil(cube_side / h)` cells, via separable running sums.
pub fn local_mass_sup(f: &Wavefield, cube_side: f64) -> Result<f64, DiagnosticsError> {
    f.expect(Representation::Physical)?;
    let grid = f.grid();
    let half_box = 0.5 * grid.box_length();
    if !(cube_side > 0.0 && cube_side <= half_box) {
        return Err(DiagnosticsError::CubeSide {
            side: cube_side,
            half_box,
        });
    }
    let window = window_cells(grid, cube_side);
    let mut density: Vec<f64> = f.values().iter().map(|z| z.norm_sqr()).collect();
    let mut line = Vec::new();
    for axis in 0..grid.dims() {
        sliding_sums_along(&mut density, grid, axis, window, &mut line);
    }
    let max = density.iter().copied().fold(0.0, f64::max);
    Ok(libm::sqrt(grid.cell_volume() * max))
}

/// Empirical Gagliardo–Nirenberg constant of `f`.
///
/// d = 1, 2: `||u||_3^3 / (S ||u||_{H^1}^2)`;
/// d = 3: `||u||_{10/3}^{10/3} / (S^{4/3} ||u||_{H^1}^2)`,
/// where `S` is [`local_mass_sup`] over unit cubes.
pub fn gn_ratio(f: &Wavefield) -> Result<f64, DiagnosticsError> {
    let u = f.physical();
    let d = u.grid().dims();
    let sup = local_mass_sup(&u, 1.0)?;
    let h1 = h1_norm(&u)?;
    if sup == 0.0 || h1 == 0.0 {
        return Err(DiagnosticsError::ZeroField);
    }
    let (lhs_exp, sup_exp) = if d <= 2 {
        (3.0, 1.0)
    } else {
        let d = d as f64;
        ((2.0 * d + 4.0) / d, 4.0 / d)
    };
    let lhs = lebesgue_integral(&u, lhs_exp)?;
    Ok(lhs / (libm::pow(sup, sup_exp) * h1 * h1))
}

/// One-dimensional sup-norm ratio `||u||_inf / (||u_x||^{1/4} ||u||_6^{3/4})`.
pub fn linf_gn_ratio(f: &Wavefield) -> Result<f64, DiagnosticsError> {
    let u = f.physical();
    if u.grid().dims() != 1 {
        return Err(DiagnosticsError::Dimension {
            expected: 1,
            found: u.grid().dims(),
        });
    }
    let grad = libm::sqrt(gradient_norm_sq(&u)?);
    let l6 = lebesgue_norm(&u, Exponent::Finite(6.0))?;
    let denom = libm::pow(grad, 0.25) * libm::pow(l6, 0.75);
    if denom == 0.0 {
        return Err(DiagnosticsError::ZeroField);
    }
    Ok(lebesgue_norm(&u, Exponent::Infinity)? / denom)
}

/// Space-time exponents `(p, q)` of the interaction-Morawetz bound in dimension `d`:
/// `L^{alpha+4}_{t,x}` for d = 1, `L^4_t L^8_x` for d = 2, `L^4_{t,x}` for d = 3.
pub fn morawetz_exponents(dims: usize, alpha: f64) -> (f64, f64) {
    match dims {
        1 => (alpha + 4.0, alpha + 4.0),
        2 => (4.0, 8.0),
        _ => (4.0, 4.0),
    }
}

/// Running left-endpoint quadrature of `int ||u(t)||_{L^q}^p dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacetimeAccumulator {
    name: &'static str,
    dims: usize,
    time_exponent: f64,
    space_exponent: f64,
    cadence: Option<f64>,
    last_t: Option<f64>,
    integral: f64,
}

impl SpacetimeAccumulator {
    /// The dimension-specific Morawetz accumulator, named `morawetz`.
    pub fn morawetz(dims: usize, alpha: f64) -> Self {
        let (p, q) = morawetz_exponents(dims, alpha);
        Self::new("morawetz", dims, p, q)
    }

    pub fn new(name: &'static str, dims: usize, time_exponent: f64, space_exponent: f64) -> Self {
        Self {
            name,
            dims,
            time_exponent,
            space_exponent,
            cadence: None,
            last_t: None,
            integral: 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn exponents(&self) -> (f64, f64) {
        (self.time_exponent, self.space_exponent)
    }

    /// Adds `dt_sample ||u(t)||_q^p`. Sample times must be evenly spaced by one cadence.
    pub fn accumulate(
        &mut self,
        f: &Wavefield,
        t: f64,
        dt_sample: f64,
    ) -> Result<(), DiagnosticsError> {
        if f.grid().dims() != self.dims {
            return Err(DiagnosticsError::Dimension {
                expected: self.dims,
                found: f.grid().dims(),
            });
        }
        if let Some(c) = self.cadence {
            if (dt_sample - c).abs() > 1e-12 * c {
                return Err(DiagnosticsError::MixedCadence {
                    expected: c,
                    found: dt_sample,
                });
            }
        }
        if let Some(last) = self.last_t {
            let gap = t - last;
            if (gap - dt_sample).abs() > 1e-9 * dt_sample.max(t.abs()) {
                return Err(DiagnosticsError::MixedCadence {
                    expected: dt_sample,
                    found: gap,
                });
            }
        }
        let u = f.physical();
        let q_power = lebesgue_integral(&u, self.space_exponent)?;
        let norm_q = libm::pow(q_power, 1.0 / self.space_exponent);
        self.integral += dt_sample * libm::pow(norm_q, self.time_exponent);
        self.cadence = Some(dt_sample);
        self.last_t = Some(t);
        Ok(())
    }

    /// Raw integral `int ||u||_q^p dt` accumulated so far.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// The space-time norm, i.e. the p-th root of [`Self::integral`].
    pub fn norm(&self) -> f64 {
        libm::pow(self.integral, 1.0 / self.time_exponent)
    }
}

/// Result of the pair-interaction functional.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelFunctional {
    pub value: f64,
    /// `beta >= d`: the continuum integral is only marginally defined and
    /// the grid value is resolution sensitive.
    pub divergent_kernel: bool,
}

/// Periodic minimum-image distance kernel `|z|^{-beta}` with `K(0) = 0`,
/// laid out by displacement index.
pub fn pair_kernel(grid: &GridSpec, beta: f64) -> Vec<f64> {
    let h = grid.spacing();
    (0..grid.total_points())
        .map(|flat| {
            let idx = grid.unravel(flat);
            let r2: f64 = idx[..grid.dims()]
                .iter()
                .map(|&i| {
                    let s = grid.signed_mode(i) as f64 * h;
                    s * s
                })
                .sum();
            if r2 == 0.0 {
                0.0
            } else {
                libm::exp(-0.5 * beta * libm::log(r2))
            }
        })
        .collect()
}

/// `h^{2d} sum_{x != y} rho(x) rho(y) dist(x, y)^{-beta}` with `rho = |u|^2`,
/// evaluated as a spectral convolution.
pub fn interaction_kernel_functional(
    f: &Wavefield,
    beta: f64,
) -> Result<KernelFunctional, DiagnosticsError> {
    f.expect(Representation::Physical)?;
    if !(beta.is_finite() && beta > 0.0) {
        return Err(DiagnosticsError::KernelExponent(beta));
    }
    let grid = f.grid();
    let mut plan = SpectralPlan::new(grid);
    let density: Vec<f64> = f.values().iter().map(|z| z.norm_sqr()).collect();
    let mut rho: Vec<Complex64> = density.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    let mut kernel: Vec<Complex64> = pair_kernel(grid, beta)
        .into_iter()
        .map(|k| Complex64::new(k, 0.0))
        .collect();
    plan.forward_raw(&mut rho);
    plan.forward_raw(&mut kernel);
    for (a, b) in rho.iter_mut().zip(&kernel) {
        *a *= *b;
    }
    plan.inverse_raw(&mut rho);
    let norm = 1.0 / grid.total_points() as f64;
    let sum: f64 = density.iter().zip(&rho).map(|(d, c)| d * c.re * norm).sum();
    let dv = grid.cell_volume();
    Ok(KernelFunctional {
        value: dv * dv * sum,
        divergent_kernel: beta >= grid.dims() as f64,
    })
}

/// Fraction of the mass in the outer shell of width `margin_fraction * L` per side.
pub fn edge_mass(f: &Wavefield, margin_fraction: f64) -> Result<f64, DiagnosticsError> {
    if !(margin_fraction > 0.0 && margin_fraction < 0.5) {
        return Err(DiagnosticsError::Margin(margin_fraction));
    }
    let u = f.physical();
    let grid = u.grid();
    let n = grid.points_per_axis();
    let shell = libm::floor(margin_fraction * n as f64 + 1e-9) as usize;
    let in_shell = |i: usize| i < shell || i >= n - shell;
    let mut total = 0.0;
    let mut outer = 0.0;
    for (flat, z) in u.values().iter().enumerate() {
        let m = z.norm_sqr();
        total += m;
        let idx = grid.unravel(flat);
        if idx[..grid.dims()].iter().any(|&i| in_shell(i)) {
            outer += m;
        }
    }
    Ok(if total == 0.0 { 0.0 } else { outer / total })
}

/// One sampled time's observables.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub h1: f64,
    pub linf: f64,
    /// `(r, ||u||_r)` for every finite requested r, ascending.
    pub lr_norms: Vec<(f64, f64)>,
    pub local_mass_sup: f64,
    /// NaN for the zero field.
    pub gn_ratio: f64,
    /// `(name, running integral)` of each space-time accumulator.
    pub st_accumulators: Vec<(&'static str, f64)>,
    pub edge_mass: f64,
}

impl DiagnosticsRecord {
    pub fn lr(&self, r: f64) -> Option<f64> {
        self.lr_norms.iter().find(|(q, _)| *q == r).map(|(_, v)| *v)
    }

    pub fn accumulator(&self, name: &str) -> Option<f64> {
        self.st_accumulators
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
    }
}

/// What to measure at every sample.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsConfig {
    pub alpha: f64,
    /// Finite `r` values; sorted and deduplicated by [`Self::new`]. `r = inf` is always reported as `linf`.
    pub r_list: Vec<f64>,
    pub cube_side: f64,
    pub margin_fraction: f64,
}

impl DiagnosticsConfig {
    pub fn new(alpha: f64, r_list: &[Exponent], margin_fraction: f64) -> Self {
        let mut rs: Vec<f64> = r_list
            .iter()
            .filter_map(|r| match r {
                Exponent::Finite(v) => Some(*v),
                Exponent::Infinity => None,
            })
            .collect();
        rs.sort_by(f64::total_cmp);
        rs.dedup();
        Self {
            alpha,
            r_list: rs,
            cube_side: 1.0,
            margin_fraction,
        }
    }
}

/// Computes one record; accumulator values are read, not advanced.
pub fn sample_record(
    u: &Wavefield,
    t: f64,
    cfg: &DiagnosticsConfig,
    accumulators: &[SpacetimeAccumulator],
) -> Result<DiagnosticsRecord, DiagnosticsError> {
    let u = u.physical();
    let grid = u.grid();
    let mass = mass(&u)?;
    let grad = gradient_norm_sq(&u)?;
    let potential = lebesgue_integral(&u, cfg.alpha + 2.0)? / (cfg.alpha + 2.0);
    let lr_norms = cfg
        .r_list
        .iter()
        .map(|&r| Ok((r, lebesgue_norm(&u, Exponent::Finite(r))?)))
        .collect::<Result<Vec<_>, DiagnosticsError>>()?;
    let cube = cfg.cube_side.min(0.5 * grid.box_length());
    let gn = match gn_ratio(&u) {
        Ok(v) => v,
        Err(DiagnosticsError::ZeroField) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok(DiagnosticsRecord {
        t,
        mass,
        energy: 0.5 * grad + potential,
        h1: libm::sqrt(mass + grad),
        linf: lebesgue_norm(&u, Exponent::Infinity)?,
        lr_norms,
        local_mass_sup: local_mass_sup(&u, cube)?,
        gn_ratio: gn,
        st_accumulators: accumulators
            .iter()
            .map(|a| (a.name(), a.integral()))
            .collect(),
        edge_mass: edge_mass(&u, cfg.margin_fraction)?,
    })
}

/// Observer that records diagnostics at every sample of an evolve run and
/// feeds the Morawetz accumulator on the regular cadence.
#[derive(Clone, Debug)]
pub struct Sampler {
    cfg: DiagnosticsConfig,
    cadence: f64,
    final_step: u64,
    accumulators: Vec<SpacetimeAccumulator>,
    records: Vec<DiagnosticsRecord>,
    error: Option<DiagnosticsError>,
}

impl Sampler {
    pub fn new(cfg: DiagnosticsConfig, dims: usize, cadence: f64, final_step: u64) -> Self {
        let acc = SpacetimeAccumulator::morawetz(dims, cfg.alpha);
        Self {
            cfg,
            cadence,
            final_step,
            accumulators: vec![acc],
            records: Vec::new(),
            error: None,
        }
    }

    pub fn records(&self) -> &[DiagnosticsRecord] {
        &self.records
    }

    pub fn accumulators(&self) -> &[SpacetimeAccumulator] {
        &self.accumulators
    }

    pub fn finish(self) -> Result<Vec<DiagnosticsRecord>, DiagnosticsError> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.records),
        }
    }
}

impl Observer for Sampler {
    fn observe(&mut self, step: u64, t: f64, u: &Wavefield) {
        if self.error.is_some() {
            return;
        }
        let result = sample_record(u, t, &self.cfg, &self.accumulators).and_then(|rec| {
            self.records.push(rec);
            // the final sample closes the last interval and adds nothing
            if step < self.final_step {
                for acc in &mut self.accumulators {
                    acc.accumulate(u, t, self.cadence)?;
                }
            }
            Ok(())
        });
        if let Err(e) = result {
            self.error = Some(e);
        }
    }
}

/// Checks `||u||_r <= ||u||_2^theta ||u||_s^{1-theta}` for every bracketing
/// pair `2 < r < s` of a record, with `1/r = theta/2 + (1-theta)/s`.
pub fn interpolation_holds(rec: &DiagnosticsRecord, slack: f64) -> bool {
    let l2 = libm::sqrt(rec.mass);
    let mut norms: Vec<(f64, f64)> = rec
        .lr_norms
        .iter()
        .copied()
        .filter(|(r, _)| *r > 2.0)
        .collect();
    norms.push((f64::INFINITY, rec.linf));
    for (i, &(r, nr)) in norms.iter().enumerate() {
        for &(s, ns) in &norms[i + 1..] {
            let inv_s = if s.is_infinite() { 0.0 } else { 1.0 / s };
            let theta = (1.0 / r - inv_s) / (0.5 - inv_s);
            let bound = libm::pow(l2, theta) * libm::pow(ns, 1.0 - theta);
            if nr > bound * (1.0 + slack) + slack {
                return false;
            }
        }
    }
    true
}
