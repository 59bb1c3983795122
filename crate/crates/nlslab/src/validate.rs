//! Built-in invariant suite behind `nlslab validate`.
//!
//! Every check runs at a fixed small resolution and reports the measured
//! quantity next to the bound it must meet.

use std::time::Instant;

use nlslab_core::admissible::{is_admissible, paper_pair, rational, residual, ExtRational};
use nlslab_core::diagnostics::{edge_mass, energy, interaction_kernel_functional, mass};
use nlslab_core::propagator::{free_gaussian_oracle, plane_wave_oracle};
use nlslab_core::{Complex64, GridSpec, InitialProfile, Propagator, Wavefield};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// How a check's measured value is compared with its bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    Within,
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub description: &'static str,
    pub measured: f64,
    pub comparison: Comparison,
    /// `[bound]` for [`Comparison::AtMost`] and [`Comparison::Equal`],
    /// `[low, high]` for [`Comparison::Within`].
    pub required: Vec<f64>,
    pub passed: bool,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn at_most(name: &'static str, description: &'static str, measured: f64, bound: f64) -> Self {
        Self {
            name,
            description,
            measured,
            comparison: Comparison::AtMost,
            required: vec![bound],
            passed: measured <= bound,
            seconds: 0.0,
            note: None,
        }
    }

    fn within(
        name: &'static str,
        description: &'static str,
        measured: f64,
        low: f64,
        high: f64,
    ) -> Self {
        Self {
            name,
            description,
            measured,
            comparison: Comparison::Within,
            required: vec![low, high],
            passed: measured >= low && measured <= high,
            seconds: 0.0,
            note: None,
        }
    }

    fn equal(name: &'static str, description: &'static str, measured: f64, expected: f64) -> Self {
        Self {
            name,
            description,
            measured,
            comparison: Comparison::Equal,
            required: vec![expected],
            passed: measured == expected,
            seconds: 0.0,
            note: None,
        }
    }

    fn failed(name: &'static str, description: &'static str, note: String) -> Self {
        Self {
            name,
            description,
            measured: f64::NAN,
            comparison: Comparison::Equal,
            required: vec![],
            passed: false,
            seconds: 0.0,
            note: Some(note),
        }
    }

    fn with_note(mut self, note: String) -> Self {
        self.note = Some(note);
        self
    }

    /// One-line summary: `PASS name: measured 1.2e-13 <= 1e-12`.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let want = match (self.comparison, self.required.as_slice()) {
            (Comparison::AtMost, [b]) => format!("<= {b:e}"),
            (Comparison::Within, [lo, hi]) => format!("in [{lo}, {hi}]"),
            (Comparison::Equal, [b]) => format!("== {b}"),
            _ => String::new(),
        };
        let mut s = format!(
            "{verdict} {}: measured {:e} {want} ({:.1}s)",
            self.name, self.measured, self.seconds
        );
        if let Some(n) = &self.note {
            s.push_str(" [");
            s.push_str(n);
            s.push(']');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

/// Knobs of the suite. `flip_linear_sign` swaps the sign of the linear
/// multiplier in every propagator, as a mutation the suite must catch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Options {
    pub flip_linear_sign: bool,
}

impl Options {
    fn sign(&self) -> f64 {
        if self.flip_linear_sign {
            -1.0
        } else {
            1.0
        }
    }

    fn propagator(&self, grid: &GridSpec, alpha: f64, dt: f64) -> Propagator {
        Propagator::with_linear_sign(grid, alpha, dt, self.sign())
            .expect("validation parameters are valid")
    }
}

fn timed(f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let mut c = f();
    c.seconds = start.elapsed().as_secs_f64();
    c
}

/// Runs every check in parallel and collects the report in a fixed order.
pub fn run(opts: Options) -> Report {
    let start = Instant::now();
    let jobs: Vec<fn(Options) -> Check> = vec![
        mass_conservation,
        energy_order,
        plane_wave_agreement,
        free_gaussian_agreement,
        kernel_brute_force,
        admissibility_identity,
        strichartz_pairs,
    ];
    let checks = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|job| s.spawn(move || job(opts)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("check panicked"))
            .collect::<Vec<_>>()
    });
    Report {
        passed: checks.iter().all(|c| c.passed),
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn gaussian(grid: &GridSpec) -> Wavefield {
    InitialProfile::gaussian(1.0, 1.0)
        .build(grid)
        .expect("resolved gaussian")
}

/// d = 1, N = 4096, L = 200, alpha = 2, dt = 1e-3, 2e4 steps: relative mass drift.
pub fn mass_conservation(opts: Options) -> Check {
    timed(|| {
        let grid = GridSpec::new(1, 4096, 200.0).expect("grid");
        let mut u = gaussian(&grid);
        let m0 = mass(&u).expect("physical");
        let mut prop = opts.propagator(&grid, 2.0, 1e-3);
        let mut drift = 0.0f64;
        for _ in 0..20 {
            prop.advance(&mut u, 1000).expect("finite");
            drift = drift.max((mass(&u).expect("physical") - m0).abs() / m0);
        }
        Check::at_most(
            "mass_conservation",
            "d=1 N=4096 L=200 alpha=2 dt=1e-3, 2e4 steps: relative mass drift",
            drift,
            1e-12,
        )
    })
}

/// Largest `|E(t) - E(0)|` over `t` in multiples of 0.02 up to `t_end`.
pub fn energy_drift(opts: Options, dt: f64, t_end: f64) -> f64 {
    let grid = GridSpec::new(1, 4096, 200.0).expect("grid");
    let alpha = 2.0;
    let mut u = gaussian(&grid);
    let e0 = energy(&u, alpha).expect("physical");
    let mut prop = opts.propagator(&grid, alpha, dt);
    let every = (0.02 / dt).round() as u64;
    let samples = (t_end / 0.02).round() as u64;
    let mut drift = 0.0f64;
    for _ in 0..samples {
        prop.advance(&mut u, every).expect("finite");
        drift = drift.max((energy(&u, alpha).expect("physical") - e0).abs());
    }
    drift
}

/// Same run at dt in {2e-3, 1e-3, 5e-4}: ratios of consecutive energy drifts.
pub fn energy_order(opts: Options) -> Check {
    timed(|| {
        let t_end = 20.0;
        let drifts: Vec<f64> = std::thread::scope(|s| {
            let hs: Vec<_> = [2e-3, 1e-3, 5e-4]
                .into_iter()
                .map(|dt| s.spawn(move || energy_drift(opts, dt, t_end)))
                .collect();
            hs.into_iter()
                .map(|h| h.join().expect("energy run"))
                .collect()
        });
        let ratios = [drifts[0] / drifts[1], drifts[1] / drifts[2]];
        // the worse of the two ratios, measured by distance from the [3.2, 4.8] band
        let worst = if (ratios[0] - 4.0).abs() >= (ratios[1] - 4.0).abs() {
            ratios[0]
        } else {
            ratios[1]
        };
        Check::within(
            "energy_order",
            "energy drift ratio between consecutive dt levels (2e-3, 1e-3, 5e-4)",
            worst,
            3.2,
            4.8,
        )
        .with_note(format!(
            "drifts {:.3e} {:.3e} {:.3e}, ratios {:.3} {:.3}",
            drifts[0], drifts[1], drifts[2], ratios[0], ratios[1]
        ))
    })
}

fn max_err(a: &Wavefield, b: &Wavefield) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Plane wave A = 0.5, k = 2, alpha = 2, d = 1 to t = 1 with dt = 1e-3.
pub fn plane_wave_agreement(opts: Options) -> Check {
    timed(|| {
        let grid = GridSpec::new(1, 64, 2.0 * std::f64::consts::PI).expect("grid");
        let (a, k, alpha) = (0.5, [2.0], 2.0);
        let mut u = plane_wave_oracle(a, &k, 0.0, &grid, alpha).expect("on lattice");
        let mut prop = opts.propagator(&grid, alpha, 1e-3);
        prop.advance(&mut u, 1000).expect("finite");
        let exact = plane_wave_oracle(a, &k, 1.0, &grid, alpha).expect("on lattice");
        Check::at_most(
            "plane_wave_oracle",
            "plane wave A=0.5 k=2 alpha=2 d=1 t=1 dt=1e-3: max pointwise error",
            max_err(&u, &exact),
            1e-6,
        )
    })
}

/// Linear run of a unit Gaussian against the closed form, at every sample
/// while the edge mass stays below 1e-10.
pub fn free_gaussian_agreement(opts: Options) -> Check {
    timed(|| {
        let grid = GridSpec::new(1, 1024, 160.0).expect("grid");
        let mut u = gaussian(&grid);
        let dt = 1e-3;
        let mut prop = opts.propagator(&grid, 1.0, dt);
        let mut worst = 0.0f64;
        let mut t_last = 0.0;
        for i in 1..=100 {
            prop.advance_free(&mut u, 100).expect("finite");
            if edge_mass(&u, 0.1).expect("margin") >= 1e-10 {
                break;
            }
            let t = i as f64 * 0.1;
            let Ok(exact) = free_gaussian_oracle(1.0, 1.0, t, &grid) else {
                break;
            };
            worst = worst.max(max_err(&u, &exact));
            t_last = t;
        }
        Check::at_most(
            "free_gaussian_oracle",
            "free Gaussian d=1 N=1024 L=160 vs closed form while edge mass < 1e-10",
            worst,
            1e-6,
        )
        .with_note(format!("compared up to t = {t_last}"))
    })
}

/// Direct `O(N^{2d})` sum of `rho(x) rho(y) |x - y|^{-beta}` over `x != y`.
pub fn brute_force_pairs(u: &Wavefield, beta: f64) -> f64 {
    let g = u.grid();
    let h = g.spacing();
    let n = g.points_per_axis() as i64;
    let rho: Vec<f64> = u.values().iter().map(|z| z.norm_sqr()).collect();
    let idx: Vec<[usize; 3]> = (0..rho.len()).map(|x| g.unravel(x)).collect();
    let mut sum = 0.0;
    for x in 0..rho.len() {
        for y in 0..rho.len() {
            if x == y {
                continue;
            }
            let mut r2 = 0.0;
            for (&i, &j) in idx[x].iter().zip(&idx[y]).take(g.dims()) {
                let mut d = (i as i64 - j as i64).rem_euclid(n);
                if d > n / 2 {
                    d -= n;
                }
                let s = d as f64 * h;
                r2 += s * s;
            }
            sum += rho[x] * rho[y] * r2.powf(-0.5 * beta);
        }
    }
    sum * g.cell_volume() * g.cell_volume()
}

/// 20 random fields with N^d <= 4096: spectral evaluation vs brute force.
pub fn kernel_brute_force(_: Options) -> Check {
    timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6b65726e);
        let shapes = [
            (1, 64),
            (1, 512),
            (1, 4096),
            (2, 16),
            (2, 64),
            (3, 8),
            (3, 16),
        ];
        let mut worst = 0.0f64;
        for i in 0..20 {
            let (d, n) = shapes[i % shapes.len()];
            let l = rng.gen_range(4.0..20.0);
            let grid = GridSpec::new(d, n, l).expect("grid");
            let beta = match d {
                1 => rng.gen_range(0.1..0.9),
                2 => rng.gen_range(0.2..1.8),
                _ => rng.gen_range(0.5..2.5),
            };
            let u = Wavefield::from_fn(grid, |_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let fast = interaction_kernel_functional(&u, beta)
                .expect("physical")
                .value;
            let slow = brute_force_pairs(&u, beta);
            worst = worst.max((fast - slow).abs() / slow.abs());
        }
        Check::at_most(
            "interaction_kernel",
            "interaction functional vs brute-force double sum, 20 random fields",
            worst,
            1e-10,
        )
    })
}

fn random_ext(rng: &mut ChaCha8Rng) -> ExtRational {
    if rng.gen_bool(0.1) {
        ExtRational::Infinity
    } else {
        ExtRational::Finite(rational(rng.gen_range(1..=60), rng.gen_range(1..=12)))
    }
}

/// Reference predicate written straight from the definition:
/// `2 <= p, q <= inf`, `2/p + d/q = d/2`, `(d, p, q) != (2, 2, inf)`.
fn defining_identity(p: &ExtRational, q: &ExtRational, d: usize) -> bool {
    let two = BigRational::from_integer(BigInt::from(2));
    let recip = |x: &ExtRational| match x {
        ExtRational::Infinity => BigRational::zero(),
        ExtRational::Finite(v) => v.recip(),
    };
    let at_least_two = |x: &ExtRational| match x {
        ExtRational::Infinity => true,
        ExtRational::Finite(v) => *v >= two,
    };
    if !(at_least_two(p) && at_least_two(q)) {
        return false;
    }
    if d == 2 && *p == ExtRational::Finite(two.clone()) && *q == ExtRational::Infinity {
        return false;
    }
    let dr = BigRational::from_integer(BigInt::from(d));
    &two * recip(p) + &dr * recip(q) == dr / &two
}

/// 10^4 random exponent triples, half drawn on the admissible line.
pub fn admissibility_identity(_: Options) -> Check {
    timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5374_7269);
        let mut disagreements = 0usize;
        let mut admissible = 0usize;
        for i in 0..10_000 {
            let d = rng.gen_range(1..=3usize);
            let q = random_ext(&mut rng);
            let p = if i % 2 == 0 {
                random_ext(&mut rng)
            } else {
                // solve 2/p = d/2 - d/q for p when that is positive
                let dr = BigRational::from_integer(BigInt::from(d));
                let inv_q = match &q {
                    ExtRational::Infinity => BigRational::zero(),
                    ExtRational::Finite(v) => v.recip(),
                };
                let two_over_p = &dr / BigRational::from_integer(BigInt::from(2)) - &dr * inv_q;
                if two_over_p.is_positive() {
                    ExtRational::Finite(BigRational::from_integer(BigInt::from(2)) / two_over_p)
                } else if two_over_p.is_zero() {
                    ExtRational::Infinity
                } else {
                    random_ext(&mut rng)
                }
            };
            let fast = is_admissible(&p, &q, d);
            if fast {
                admissible += 1;
                if residual(&p, &q, d).is_none_or(|r| !r.is_zero()) {
                    disagreements += 1;
                }
            }
            if fast != defining_identity(&p, &q, d) {
                disagreements += 1;
            }
        }
        Check::equal(
            "admissibility_identity",
            "is_admissible vs exact defining identity on 1e4 random triples",
            disagreements as f64,
            0.0,
        )
        .with_note(format!("{admissible} admissible samples"))
    })
}

/// Paper pairs for 100 random valid alpha per dimension, plus the named pairs.
pub fn strichartz_pairs(_: Options) -> Check {
    timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7061_6972);
        let mut failures = 0usize;
        for d in 1..=3usize {
            for _ in 0..100 {
                let den = rng.gen_range(1..=50i64);
                let num = match d {
                    3 => rng.gen_range(1..4 * den),
                    _ => rng.gen_range(1..=20 * den),
                };
                let alpha = rational(num, den);
                match paper_pair(d, &alpha) {
                    Ok(pair) if is_admissible(&pair.p, &pair.q, d) => {}
                    _ => failures += 1,
                }
            }
        }
        let named = [
            (
                1,
                rational(1, 1),
                ExtRational::Infinity,
                ExtRational::int(2),
            ),
            (2, rational(1, 1), ExtRational::int(4), ExtRational::int(4)),
            (3, rational(2, 1), ExtRational::int(4), ExtRational::int(3)),
        ];
        for (d, alpha, p, q) in named {
            match paper_pair(d, &alpha) {
                Ok(pair) if pair.p == p && pair.q == q && is_admissible(&p, &q, d) => {}
                _ => failures += 1,
            }
        }
        if failures > 0 {
            return Check::failed(
                "strichartz_pairs",
                "paper_pair outputs admissible for 300 random alpha; named pairs exact",
                format!("{failures} failures"),
            );
        }
        Check::equal(
            "strichartz_pairs",
            "paper_pair outputs admissible for 300 random alpha; named pairs exact",
            0.0,
            0.0,
        )
    })
}
