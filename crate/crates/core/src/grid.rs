//! Periodic box geometry, sampled fields and their spectral pair.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{FieldError, GridError};
use crate::fft::{Direction, FftNd, Scratch};

/// Largest admissible `N^d`.
pub const MAX_POINTS: usize = 1 << 28;

/// Cubic periodic box `[-L/2, L/2)^d` sampled with `N` points per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    dims: usize,
    points: usize,
    box_length: f64,
}

impl GridSpec {
    pub fn new(dims: usize, points: usize, box_length: f64) -> Result<Self, GridError> {
        if !(1..=3).contains(&dims) {
            return Err(GridError::Dimension(dims));
        }
        if !points.is_multiple_of(2) {
            return Err(GridError::OddPoints(points));
        }
        if points < 8 {
            return Err(GridError::TooFewPoints(points));
        }
        if !(box_length.is_finite() && box_length >= 4.0) {
            return Err(GridError::BoxTooSmall(box_length));
        }
        let total = (0..dims).try_fold(1usize, |acc, _| acc.checked_mul(points));
        match total {
            Some(t) if t <= MAX_POINTS => {}
            _ => return Err(GridError::PointBudget { points, dims }),
        }
        Ok(Self {
            dims,
            points,
            box_length,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Cell width `h = L / N`.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        libm::pow(self.spacing(), self.dims as f64)
    }

    /// `L^d`.
    pub fn volume(&self) -> f64 {
        libm::pow(self.box_length, self.dims as f64)
    }

    pub fn total_points(&self) -> usize {
        self.points.pow(self.dims as u32)
    }

    /// Physical coordinate `x_m = -L/2 + m h` of axis index `m`.
    pub fn coordinate(&self, m: usize) -> f64 {
        -0.5 * self.box_length + m as f64 * self.spacing()
    }

    /// Signed lattice index `m` for `m < N/2`, `m - N` otherwise.
    pub fn signed_mode(&self, m: usize) -> i64 {
        if m < self.points / 2 {
            m as i64
        } else {
            m as i64 - self.points as i64
        }
    }

    /// Wavenumber `2 pi m~ / L` at transform index `m` along one axis.
    pub fn axis_wavenumber(&self, m: usize) -> f64 {
        2.0 * PI * self.signed_mode(m) as f64 / self.box_length
    }

    /// Per-axis wavenumbers in transform-native order.
    pub fn axis_wavenumbers(&self) -> Vec<f64> {
        (0..self.points).map(|m| self.axis_wavenumber(m)).collect()
    }

    /// Splits a row-major flat index into per-axis indices (unused axes are 0).
    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rest = flat;
        for axis in (0..self.dims).rev() {
            out[axis] = rest % self.points;
            rest /= self.points;
        }
        out
    }

    pub fn ravel(&self, idx: [usize; 3]) -> usize {
        idx[..self.dims]
            .iter()
            .fold(0, |acc, &i| acc * self.points + i)
    }

    /// Physical position of a flat index; trailing axes beyond `dims` are 0.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dims {
            x[axis] = self.coordinate(idx[axis]);
        }
        x
    }

    /// Wavevector of every mode in transform order; components beyond `dims` are 0.
    pub fn wavenumbers(&self) -> Vec<[f64; 3]> {
        let axis = self.axis_wavenumbers();
        (0..self.total_points())
            .map(|flat| {
                let idx = self.unravel(flat);
                let mut k = [0.0; 3];
                for a in 0..self.dims {
                    k[a] = axis[idx[a]];
                }
                k
            })
            .collect()
    }

    /// `|k|^2` at every mode.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        let axis: Vec<f64> = self.axis_wavenumbers().iter().map(|k| k * k).collect();
        (0..self.total_points())
            .map(|flat| {
                let idx = self.unravel(flat);
                idx[..self.dims].iter().map(|&i| axis[i]).sum()
            })
            .collect()
    }

    /// Symbol of the Laplacian: `-|k|^2` at every mode.
    pub fn laplacian_symbol(&self) -> Vec<f64> {
        self.wavenumber_sq().into_iter().map(|k2| -k2).collect()
    }

    /// Largest `|k|` along one axis (the Nyquist mode).
    pub fn nyquist(&self) -> f64 {
        PI * self.points as f64 / self.box_length
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Physical,
    Spectral,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Physical => "physical",
            Representation::Spectral => "spectral",
        }
    }
}

/// Complex amplitude on a grid, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Wavefield {
    grid: GridSpec,
    repr: Representation,
    values: Vec<Complex64>,
}

impl Wavefield {
    pub fn new(
        grid: GridSpec,
        repr: Representation,
        values: Vec<Complex64>,
    ) -> Result<Self, FieldError> {
        if values.len() != grid.total_points() {
            return Err(FieldError::Length {
                expected: grid.total_points(),
                found: values.len(),
            });
        }
        Ok(Self { grid, repr, values })
    }

    pub fn zeros(grid: GridSpec, repr: Representation) -> Self {
        Self {
            grid,
            repr,
            values: vec![Complex64::new(0.0, 0.0); grid.total_points()],
        }
    }

    /// Samples `f` at every grid point (physical representation).
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let d = grid.dims();
        let values = (0..grid.total_points())
            .map(|flat| {
                let x = grid.position(flat);
                f(&x[..d])
            })
            .collect();
        Self {
            grid,
            repr: Representation::Physical,
            values,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn expect(&self, repr: Representation) -> Result<(), FieldError> {
        if self.repr == repr {
            Ok(())
        } else {
            Err(FieldError::Representation {
                expected: repr.name(),
                found: self.repr.name(),
            })
        }
    }

    pub fn same_grid(&self, other: &Wavefield) -> Result<(), FieldError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(FieldError::GridMismatch)
        }
    }

    /// `sum |values|^2`, without the cell volume.
    pub fn sum_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn to_spectral(&self) -> Result<Wavefield, FieldError> {
        self.expect(Representation::Physical)?;
        let mut out = self.clone();
        SpectralPlan::new(&self.grid).forward(&mut out.values);
        out.repr = Representation::Spectral;
        Ok(out)
    }

    pub fn to_physical(&self) -> Result<Wavefield, FieldError> {
        self.expect(Representation::Spectral)?;
        let mut out = self.clone();
        SpectralPlan::new(&self.grid).inverse(&mut out.values);
        out.repr = Representation::Physical;
        Ok(out)
    }

    /// Copy in the physical representation, transforming if needed.
    pub fn physical(&self) -> Wavefield {
        match self.repr {
            Representation::Physical => self.clone(),
            Representation::Spectral => self.to_physical().expect("representation checked"),
        }
    }

    pub fn spectral(&self) -> Wavefield {
        match self.repr {
            Representation::Spectral => self.clone(),
            Representation::Physical => self.to_spectral().expect("representation checked"),
        }
    }

    pub fn conj(&self) -> Wavefield {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|z| *z = z.conj());
        out
    }

    /// Cyclic shift by whole cells along every axis.
    pub fn shifted(&self, shift: [isize; 3]) -> Wavefield {
        let n = self.grid.points_per_axis() as isize;
        let mut out = self.clone();
        for (flat, v) in self.values.iter().enumerate() {
            let mut idx = self.grid.unravel(flat);
            for a in 0..self.grid.dims() {
                idx[a] = (idx[a] as isize + shift[a]).rem_euclid(n) as usize;
            }
            out.values[self.grid.ravel(idx)] = *v;
        }
        out
    }

    /// Pointwise `self - other`, same grid and representation required.
    pub fn difference(&self, other: &Wavefield) -> Result<Wavefield, FieldError> {
        self.same_grid(other)?;
        other.expect(self.repr)?;
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a -= *b;
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: Complex64) -> Wavefield {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|z| *z *= factor);
        out
    }
}

/// Unitary transform pair bound to one grid, with its own work buffers.
#[derive(Clone, Debug)]
pub struct SpectralPlan {
    fft: FftNd,
    scratch: Scratch,
    unitary_scale: f64,
}

impl SpectralPlan {
    pub fn new(grid: &GridSpec) -> Self {
        let fft = FftNd::new(grid.dims(), grid.points_per_axis());
        let unitary_scale = 1.0 / libm::sqrt(grid.total_points() as f64);
        Self {
            fft,
            scratch: Scratch::default(),
            unitary_scale,
        }
    }

    /// Unitary forward transform in place.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward_raw(data);
        let s = self.unitary_scale;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// Unitary inverse transform in place.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse_raw(data);
        let s = self.unitary_scale;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// Unnormalized forward transform; pair with [`Self::inverse_raw`] and divide by `N^d`.
    pub fn forward_raw(&mut self, data: &mut [Complex64]) {
        self.fft
            .process(data, Direction::Forward, &mut self.scratch);
    }

    pub fn inverse_raw(&mut self, data: &mut [Complex64]) {
        self.fft
            .process(data, Direction::Inverse, &mut self.scratch);
    }

    pub fn total_points(&self) -> usize {
        self.fft.total_len()
    }
}
