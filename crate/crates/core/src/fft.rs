//! Discrete Fourier transforms on row-major cubic lattices.
//!
//! Power-of-two lengths run an iterative radix-2 kernel. Any other length
//! goes through Bluestein's chirp-z reformulation on a power-of-two
//! convolution. Both directions are unnormalized here; callers pick the
//! scaling (the grid layer applies the unitary `N^{-d/2}`).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Kernel `exp(-2 pi i j k / N)`.
    Forward,
    /// Kernel `exp(+2 pi i j k / N)`.
    Inverse,
}

#[derive(Clone, Debug)]
struct Radix2 {
    n: usize,
    /// Per-stage twiddles laid out contiguously: stage `len` occupies
    /// `[len/2 - 1, len - 1)` with entries `exp(-2 pi i j / len)`.
    forward: Vec<Complex64>,
    inverse: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let mut forward = Vec::with_capacity(n.saturating_sub(1));
        let mut len = 2;
        while len <= n {
            for j in 0..len / 2 {
                // exact angle from the finest table avoids drift across stages
                let (s, c) = libm::sincos(-2.0 * PI * (j * (n / len)) as f64 / n as f64);
                forward.push(Complex64::new(c, s));
            }
            len <<= 1;
        }
        let inverse = forward.iter().map(|w| w.conj()).collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (32 - bits)
                }
            })
            .collect();
        Self {
            n,
            forward,
            inverse,
            bitrev,
        }
    }

    fn process(&self, buf: &mut [Complex64], dir: Direction) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        if n >= 2 {
            for pair in buf.chunks_exact_mut(2) {
                let (a, b) = (pair[0], pair[1]);
                pair[0] = a + b;
                pair[1] = a - b;
            }
        }
        let table = match dir {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        };
        let mut len = 4;
        while len <= n {
            let half = len / 2;
            let tw = &table[half - 1..len - 1];
            for block in buf.chunks_exact_mut(len) {
                let (lo, hi) = block.split_at_mut(half);
                for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
                    let t = *b * *w;
                    *b = *a - t;
                    *a += t;
                }
            }
            len <<= 1;
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        self.process(buf, Direction::Forward);
    }
}

#[derive(Clone, Debug)]
struct Bluestein {
    n: usize,
    inner: Radix2,
    chirp: Vec<Complex64>,
    kernel_hat: Vec<Complex64>,
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(m);
        // j^2 mod 2n keeps the chirp angle small and exact.
        let chirp: Vec<Complex64> = (0..n)
            .map(|j| {
                let r = ((j as u128 * j as u128) % (2 * n as u128)) as f64;
                let (s, c) = libm::sincos(-PI * r / n as f64);
                Complex64::new(c, s)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for j in 1..n {
            kernel[j] = chirp[j].conj();
            kernel[m - j] = chirp[j].conj();
        }
        inner.forward(&mut kernel);
        Self {
            n,
            inner,
            chirp,
            kernel_hat: kernel,
        }
    }

    fn forward(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let m = self.inner.n;
        scratch.clear();
        scratch.resize(m, Complex64::new(0.0, 0.0));
        for (s, (x, w)) in scratch.iter_mut().zip(buf.iter().zip(&self.chirp)) {
            *s = *x * *w;
        }
        self.inner.forward(scratch);
        for (s, k) in scratch.iter_mut().zip(&self.kernel_hat) {
            // conj trick turns the inner forward pass into an inverse
            *s = (*s * *k).conj();
        }
        self.inner.forward(scratch);
        let scale = 1.0 / m as f64;
        for (k, out) in buf.iter_mut().enumerate().take(self.n) {
            *out = scratch[k].conj() * scale * self.chirp[k];
        }
    }
}

#[derive(Clone, Debug)]
enum Kernel {
    Radix2(Radix2),
    Bluestein(Bluestein),
}

/// Reusable one-dimensional transform of a fixed length.
#[derive(Clone, Debug)]
pub struct Fft1d {
    n: usize,
    kernel: Kernel,
}

impl Fft1d {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "transform length must be positive");
        let kernel = if n.is_power_of_two() {
            Kernel::Radix2(Radix2::new(n))
        } else {
            Kernel::Bluestein(Bluestein::new(n))
        };
        Self { n, kernel }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized in-place transform of `buf` (length `self.len()`).
    pub fn process(&self, buf: &mut [Complex64], dir: Direction, scratch: &mut Vec<Complex64>) {
        debug_assert_eq!(buf.len(), self.n);
        match &self.kernel {
            Kernel::Radix2(r) => r.process(buf, dir),
            Kernel::Bluestein(b) => {
                if dir == Direction::Inverse {
                    buf.iter_mut().for_each(|z| *z = z.conj());
                }
                b.forward(buf, scratch);
                if dir == Direction::Inverse {
                    buf.iter_mut().for_each(|z| *z = z.conj());
                }
            }
        }
    }
}

/// Separable transform over an `n^dims` row-major array.
#[derive(Clone, Debug)]
pub struct FftNd {
    dims: usize,
    axis: Fft1d,
}

impl FftNd {
    pub fn new(dims: usize, n: usize) -> Self {
        Self {
            dims,
            axis: Fft1d::new(n),
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn points_per_axis(&self) -> usize {
        self.axis.len()
    }

    pub fn total_len(&self) -> usize {
        self.axis.len().pow(self.dims as u32)
    }

    pub fn process(&self, data: &mut [Complex64], dir: Direction, scratch: &mut Scratch) {
        let n = self.axis.len();
        debug_assert_eq!(data.len(), self.total_len());
        // Last axis is contiguous.
        for line in data.chunks_exact_mut(n) {
            self.axis.process(line, dir, &mut scratch.chirp);
        }
        let total = data.len();
        for axis in 0..self.dims.saturating_sub(1) {
            let stride = n.pow((self.dims - 1 - axis) as u32);
            let block = stride * n;
            // strided lines are gathered BATCH at a time so reads stay row-contiguous
            let batch = BATCH.min(stride);
            scratch.line.resize(batch * n, Complex64::new(0.0, 0.0));
            for base in (0..total).step_by(block) {
                for first in (0..stride).step_by(batch) {
                    let width = batch.min(stride - first);
                    for j in 0..n {
                        let row = &data[base + j * stride + first..][..width];
                        for (c, v) in row.iter().enumerate() {
                            scratch.line[c * n + j] = *v;
                        }
                    }
                    for c in 0..width {
                        self.axis.process(
                            &mut scratch.line[c * n..(c + 1) * n],
                            dir,
                            &mut scratch.chirp,
                        );
                    }
                    for j in 0..n {
                        let row = &mut data[base + j * stride + first..][..width];
                        for (c, v) in row.iter_mut().enumerate() {
                            *v = scratch.line[c * n + j];
                        }
                    }
                }
            }
        }
    }
}

const BATCH: usize = 16;

/// Working buffers, kept by the caller so hot loops never allocate.
#[derive(Clone, Debug, Default)]
pub struct Scratch {
    line: Vec<Complex64>,
    chirp: Vec<Complex64>,
}
