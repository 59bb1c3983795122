//! Run configuration: TOML ingestion, `--set` overrides, validation and hashing.
//!
//! ```toml
//! [grid]
//! dimension = 1
//! points_per_axis = 8192
//! box_length = 400.0
//!
//! [solver]
//! alpha = 1.0
//! dt = 0.005
//! t_end = 60.0
//! sample_every = 20
//!
//! [profile]
//! kind = "gaussian"        # or "plane_wave", "random_phase", "file"
//! amplitude = 1.0
//! width = 1.0
//!
//! [diagnostics]
//! r_list = [3, 6, "inf"]
//! margin_fraction = 0.1
//! edge_mass_abort = 0.05
//!
//! [output]
//! output_path = "runs"
//! seed = 0
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nlslab_core::propagator::{alpha_upper_bound, ParamWarning};
use nlslab_core::{EdgeMonitor, Exponent, GridSpec, InitialProfile, SolverParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_MARGIN_FRACTION: f64 = 0.1;
pub const DEFAULT_EDGE_MASS_ABORT: f64 = 0.05;

/// Lebesgue exponent as written in a config: a number or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(into = "RValue")]
pub struct RExponent(pub Exponent);

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum RValue {
    Number(f64),
    Text(String),
}

impl From<RExponent> for RValue {
    fn from(r: RExponent) -> Self {
        match r.0 {
            Exponent::Finite(v) => RValue::Number(v),
            Exponent::Infinity => RValue::Text("inf".into()),
        }
    }
}

impl RValue {
    fn to_exponent(&self) -> Option<Exponent> {
        match self {
            RValue::Number(v) if v.is_infinite() && *v > 0.0 => Some(Exponent::Infinity),
            RValue::Number(v) => Some(Exponent::Finite(*v)),
            RValue::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" => Some(Exponent::Infinity),
                other => other.parse::<f64>().ok().map(Exponent::Finite),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridConfig {
    pub dimension: usize,
    pub points_per_axis: usize,
    pub box_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileConfig {
    Gaussian {
        amplitude: f64,
        width: f64,
        center: Vec<f64>,
        velocity: Vec<f64>,
    },
    PlaneWave {
        amplitude: f64,
        mode: Vec<i64>,
    },
    RandomPhase {
        amplitude: f64,
        seed: u64,
        spectrum_width: f64,
    },
    File {
        path: PathBuf,
    },
}

impl ProfileConfig {
    /// Analytic profile, `None` for file-backed initial data.
    pub fn to_profile(&self) -> Option<InitialProfile> {
        let pad = |v: &[f64]| {
            let mut a = [0.0; 3];
            a[..v.len()].copy_from_slice(v);
            a
        };
        match self {
            ProfileConfig::Gaussian {
                amplitude,
                width,
                center,
                velocity,
            } => Some(InitialProfile::Gaussian {
                amplitude: *amplitude,
                width: *width,
                center: pad(center),
                velocity: pad(velocity),
            }),
            ProfileConfig::PlaneWave { amplitude, mode } => {
                let mut m = [0; 3];
                m[..mode.len()].copy_from_slice(mode);
                Some(InitialProfile::PlaneWave {
                    amplitude: *amplitude,
                    mode: m,
                })
            }
            ProfileConfig::RandomPhase {
                amplitude,
                seed,
                spectrum_width,
            } => Some(InitialProfile::RandomPhase {
                amplitude: *amplitude,
                seed: *seed,
                spectrum_width: *spectrum_width,
            }),
            ProfileConfig::File { .. } => None,
        }
    }
}

/// A fully validated run description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub profile: ProfileConfig,
    /// Sorted ascending, duplicates removed.
    pub r_list: Vec<RExponent>,
    pub margin_fraction: f64,
    pub edge_mass_abort: f64,
    /// Also run the two-pass scattering probe and write its CSV.
    pub scattering: bool,
    #[serde(skip)]
    pub output_path: PathBuf,
    pub seed: u64,
}

/// One violated constraint, named by its config key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid override `{0}` (expected section.key=value)")]
    Override(String),
    #[error("invalid config:\n{}", list(.0))]
    Invalid(Vec<Violation>),
}

fn list(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  - {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: Option<RawGrid>,
    solver: Option<RawSolver>,
    profile: Option<RawProfile>,
    diagnostics: Option<RawDiagnostics>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dimension: Option<i64>,
    points_per_axis: Option<i64>,
    box_length: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    alpha: Option<f64>,
    dt: Option<f64>,
    t_end: Option<f64>,
    sample_every: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    kind: Option<String>,
    amplitude: Option<f64>,
    width: Option<f64>,
    center: Option<Vec<f64>>,
    velocity: Option<Vec<f64>>,
    mode: Option<Vec<i64>>,
    seed: Option<u64>,
    spectrum_width: Option<f64>,
    path: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiagnostics {
    r_list: Option<Vec<RValue>>,
    margin_fraction: Option<f64>,
    edge_mass_abort: Option<f64>,
    scattering: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    output_path: Option<String>,
    seed: Option<u64>,
}

/// Parses `section.key=value` and sets it in `table`. Values use TOML
/// syntax; anything that does not parse is taken as a string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(assignment.into()))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.len() < 2 || path.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(assignment.into()));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.into()));
    let mut cursor = table;
    for part in &path[..path.len() - 1] {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(assignment.into()))?;
    }
    cursor.insert(path[path.len() - 1].to_string(), parsed);
    Ok(())
}

pub fn parse_table(text: &str) -> Result<toml::Table, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
}

/// Validates a TOML table, reporting every violation at once.
pub fn from_table(table: toml::Table) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    validate(raw)
}

pub fn from_str_with(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table = parse_table(text)?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    from_table(table)
}

/// Reads, overrides and validates a config file.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_str_with(&text, overrides)
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.0.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    fn require<T>(&mut self, value: Option<T>, field: &str) -> Option<T> {
        if value.is_none() {
            self.push(field, "missing required key");
        }
        value
    }
}

/// Human-readable statement of the admissible alpha range in dimension `d`.
pub fn alpha_range_text(dims: usize) -> String {
    match alpha_upper_bound(dims) {
        Some(b) => format!("0 < alpha < 4/(d-2) = {b} for d = {dims}"),
        None => format!("0 < alpha < inf for d = {dims}"),
    }
}

/// Human-readable statement of the admissible Lebesgue range in dimension `d`.
pub fn r_range_text(dims: usize) -> String {
    match dims {
        1 => "2 < r < inf, or r = inf, for d = 1".into(),
        2 => "2 < r < inf for d = 2".into(),
        d => format!(
            "2 < r < 2d/(d-2) = {} for d = {d}",
            2.0 * d as f64 / (d as f64 - 2.0)
        ),
    }
}

/// Whether `r` lies in the decay range for dimension `d`.
pub fn r_in_range(r: Exponent, dims: usize) -> bool {
    match r {
        Exponent::Infinity => dims == 1,
        Exponent::Finite(v) => {
            let upper = if dims >= 3 {
                2.0 * dims as f64 / (dims as f64 - 2.0)
            } else {
                f64::INFINITY
            };
            v.is_finite() && v > 2.0 && v < upper
        }
    }
}

fn validate(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let mut c = Collector(Vec::new());
    let grid_raw = c.require(raw.grid, "grid").unwrap_or_default();
    let solver_raw = c.require(raw.solver, "solver").unwrap_or_default();
    let profile_raw = c.require(raw.profile, "profile").unwrap_or_default();
    let diag_raw = raw.diagnostics.unwrap_or_default();
    let out_raw = raw.output.unwrap_or_default();

    let dimension = c.require(grid_raw.dimension, "grid.dimension");
    let points = c.require(grid_raw.points_per_axis, "grid.points_per_axis");
    let box_length = c.require(grid_raw.box_length, "grid.box_length");
    let dims = match dimension {
        Some(d) if (1..=3).contains(&d) => Some(d as usize),
        Some(d) => {
            c.push("grid.dimension", format!("must be 1, 2 or 3, got {d}"));
            None
        }
        None => None,
    };
    if let Some(n) = points {
        if n < 8 || n % 2 != 0 {
            c.push(
                "grid.points_per_axis",
                format!("must be even and at least 8, got {n}"),
            );
        }
    }
    if let Some(l) = box_length {
        if !(l.is_finite() && l >= 4.0) {
            c.push("grid.box_length", format!("must be at least 4, got {l}"));
        }
    }
    let grid = match (dims, points, box_length) {
        (Some(d), Some(n), Some(l)) if n > 0 => match GridSpec::new(d, n as usize, l) {
            Ok(g) => Some(g),
            Err(e @ nlslab_core::GridError::PointBudget { .. }) => {
                c.push("grid.points_per_axis", e.to_string());
                None
            }
            Err(_) => None,
        },
        _ => None,
    };

    let alpha = c.require(solver_raw.alpha, "solver.alpha");
    let dt = c.require(solver_raw.dt, "solver.dt");
    let t_end = c.require(solver_raw.t_end, "solver.t_end");
    let sample_every = solver_raw.sample_every.unwrap_or(1);
    if let Some(a) = alpha {
        let ok = a.is_finite() && a > 0.0 && dims.and_then(alpha_upper_bound).is_none_or(|b| a < b);
        if !ok {
            let range = dims
                .map(alpha_range_text)
                .unwrap_or_else(|| "0 < alpha".into());
            c.push("solver.alpha", format!("alpha = {a} violates {range}"));
        }
    }
    if let Some(v) = dt {
        if !(v.is_finite() && v > 0.0) {
            c.push("solver.dt", format!("must be positive, got {v}"));
        }
    }
    if let Some(v) = t_end {
        if !(v.is_finite() && v >= 0.0) {
            c.push("solver.t_end", format!("must be nonnegative, got {v}"));
        }
    }
    if let (Some(dt), Some(t)) = (dt, t_end) {
        if dt > 0.0 && t >= 0.0 {
            let steps = t / dt;
            if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
                c.push(
                    "solver.t_end",
                    format!("t_end = {t} is not a whole number of steps dt = {dt}"),
                );
            }
        }
    }
    if sample_every < 1 {
        c.push(
            "solver.sample_every",
            format!("must be at least 1, got {sample_every}"),
        );
    }

    let seed = out_raw.seed.unwrap_or(0);
    let profile = validate_profile(&mut c, profile_raw, dims, seed);

    let raw_r = diag_raw.r_list.unwrap_or_else(|| vec![RValue::Number(3.0)]);
    let mut r_list = Vec::new();
    for (i, r) in raw_r.iter().enumerate() {
        match r.to_exponent() {
            Some(e) => {
                if let Some(d) = dims {
                    if !r_in_range(e, d) {
                        let shown = match e {
                            Exponent::Infinity => "inf".to_string(),
                            Exponent::Finite(v) => v.to_string(),
                        };
                        c.push(
                            &format!("diagnostics.r_list[{i}]"),
                            format!("r = {shown} is outside {}", r_range_text(d)),
                        );
                    }
                }
                r_list.push(e);
            }
            None => c.push(
                &format!("diagnostics.r_list[{i}]"),
                format!("cannot read {r:?} as an exponent"),
            ),
        }
    }
    r_list.sort_by(|a, b| a.partial_cmp(b).expect("exponents are comparable"));
    r_list.dedup();

    let margin_fraction = diag_raw.margin_fraction.unwrap_or(DEFAULT_MARGIN_FRACTION);
    if !(margin_fraction > 0.0 && margin_fraction < 0.5) {
        c.push(
            "diagnostics.margin_fraction",
            format!("must lie in (0, 0.5), got {margin_fraction}"),
        );
    }
    // box-filling data has edge mass from the start; the monitor is off unless asked for
    let periodic = matches!(
        profile,
        Some(ProfileConfig::PlaneWave { .. } | ProfileConfig::RandomPhase { .. })
    );
    let edge_mass_abort = diag_raw.edge_mass_abort.unwrap_or(if periodic {
        1.0
    } else {
        DEFAULT_EDGE_MASS_ABORT
    });
    if !(edge_mass_abort > 0.0 && edge_mass_abort <= 1.0) {
        c.push(
            "diagnostics.edge_mass_abort",
            format!("must lie in (0, 1], got {edge_mass_abort}"),
        );
    }

    if !c.0.is_empty() {
        return Err(ConfigError::Invalid(c.0));
    }
    let grid = grid.expect("grid validated");
    Ok(RunConfig {
        grid: GridConfig {
            dimension: grid.dims(),
            points_per_axis: grid.points_per_axis(),
            box_length: grid.box_length(),
        },
        solver: SolverConfig {
            alpha: alpha.expect("validated"),
            dt: dt.expect("validated"),
            t_end: t_end.expect("validated"),
            sample_every: sample_every as u64,
        },
        profile: profile.expect("validated"),
        r_list: r_list.into_iter().map(RExponent).collect(),
        margin_fraction,
        edge_mass_abort,
        scattering: diag_raw.scattering.unwrap_or(false),
        output_path: PathBuf::from(out_raw.output_path.unwrap_or_else(|| "runs".into())),
        seed,
    })
}

fn validate_profile(
    c: &mut Collector,
    p: RawProfile,
    dims: Option<usize>,
    seed: u64,
) -> Option<ProfileConfig> {
    let kind = c.require(p.kind.clone(), "profile.kind")?;
    let check_len = |c: &mut Collector, field: &str, len: usize| {
        if let Some(d) = dims {
            if len != d {
                c.push(field, format!("needs {d} components, got {len}"));
            }
        }
    };
    let amplitude = |c: &mut Collector| {
        let a = p.amplitude.unwrap_or(1.0);
        if !(a.is_finite() && a > 0.0) {
            c.push("profile.amplitude", format!("must be positive, got {a}"));
        }
        a
    };
    match kind.as_str() {
        "gaussian" => {
            let amplitude = amplitude(c);
            let width = p.width.unwrap_or(1.0);
            if !(width.is_finite() && width > 0.0) {
                c.push("profile.width", format!("must be positive, got {width}"));
            }
            let d = dims.unwrap_or(1);
            let center = p.center.unwrap_or_else(|| vec![0.0; d]);
            let velocity = p.velocity.unwrap_or_else(|| vec![0.0; d]);
            check_len(c, "profile.center", center.len());
            check_len(c, "profile.velocity", velocity.len());
            Some(ProfileConfig::Gaussian {
                amplitude,
                width,
                center,
                velocity,
            })
        }
        "plane_wave" => {
            let amplitude = amplitude(c);
            let mode = c.require(p.mode, "profile.mode")?;
            check_len(c, "profile.mode", mode.len());
            Some(ProfileConfig::PlaneWave { amplitude, mode })
        }
        "random_phase" => {
            let amplitude = amplitude(c);
            let spectrum_width = p.spectrum_width.unwrap_or(1.0);
            if !(spectrum_width.is_finite() && spectrum_width > 0.0) {
                c.push(
                    "profile.spectrum_width",
                    format!("must be positive, got {spectrum_width}"),
                );
            }
            Some(ProfileConfig::RandomPhase {
                amplitude,
                seed: p.seed.unwrap_or(seed),
                spectrum_width,
            })
        }
        "file" => {
            let path = c.require(p.path, "profile.path")?;
            Some(ProfileConfig::File { path: path.into() })
        }
        other => {
            c.push(
                "profile.kind",
                format!(
                    "unknown kind `{other}` (expected gaussian, plane_wave, random_phase or file)"
                ),
            );
            None
        }
    }
}

impl RunConfig {
    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(
            self.grid.dimension,
            self.grid.points_per_axis,
            self.grid.box_length,
        )
        .expect("validated at load time")
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            alpha: self.solver.alpha,
            dt: self.solver.dt,
            t_end: self.solver.t_end,
            sample_every: self.solver.sample_every,
        }
    }

    pub fn edge_monitor(&self) -> EdgeMonitor {
        EdgeMonitor {
            margin_fraction: self.margin_fraction,
            abort_threshold: self.edge_mass_abort,
        }
    }

    pub fn exponents(&self) -> Vec<Exponent> {
        self.r_list.iter().map(|r| r.0).collect()
    }

    /// SHA-256 over the physics-relevant fields (output location excluded).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Short prefix of [`Self::hash`] used in file names.
    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }

    /// Non-fatal advisories: coarse time step and the box-size budget.
    pub fn warnings(&self) -> Vec<String> {
        let grid = self.grid_spec();
        let mut out: Vec<String> = self
            .solver_params()
            .warnings(&grid)
            .into_iter()
            .map(|w| match w {
                ParamWarning::CoarseStep { dt, limit } => {
                    format!("dt = {dt} exceeds h^2/2 = {limit:.3e}; splitting error grows")
                }
            })
            .collect();
        if let Some(needed) = recommended_box_length(&self.profile, self.solver.t_end) {
            if self.grid.box_length < needed {
                out.push(format!(
                    "box_length = {} is below the budget L >= 2 (support + 2 v_max t_end) = {needed:.1}; \
                     expect an early edge-mass abort",
                    self.grid.box_length
                ));
            }
        }
        out
    }
}

/// Box budget `2 (support + 2 v_max t_end)` for Gaussian data, where
/// `v_max = 2 k_q` and `k_q` is the 0.999 quantile of the spectral mass
/// along one axis (`|v| + erfc^{-1}(1e-3) / sigma`), and the support is `6 sigma`.
pub fn recommended_box_length(profile: &ProfileConfig, t_end: f64) -> Option<f64> {
    const ERFC_INV_1E3: f64 = 2.326_753_765_513_524;
    match profile {
        ProfileConfig::Gaussian {
            width, velocity, ..
        } => {
            let vmax_in = velocity.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let k_q = vmax_in + ERFC_INV_1E3 / width;
            Some(2.0 * (6.0 * width + 2.0 * (2.0 * k_q) * t_end))
        }
        _ => None,
    }
}
