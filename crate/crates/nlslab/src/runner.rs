//! Run orchestration: single runs, parallel sweeps with resume, the
//! two-pass scattering probe and decay-trend summaries.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nlslab_core::diagnostics::lebesgue_norm;
use nlslab_core::{
    evolve, extract_asymptotic_state, scattering_deficit, AsymptoticState, DiagnosticsConfig,
    DiagnosticsError, DiagnosticsRecord, Exponent, FieldError, Observer, PropagatorError,
    Representation, Sampler, StopReason, Wavefield,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ProfileConfig, RunConfig};
use crate::records::{diagnostics_csv, scattering_csv, RecordError, ScatteringRow};
use crate::wavefield_io::{self, Checkpoint, FormatError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("initial data {path}: {source}")]
    InitialData {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("initial data {path} is on a different grid than the config")]
    InitialGrid { path: PathBuf },
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("cannot encode metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl RunError {
    /// IO-class failures, as opposed to numerical ones.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            RunError::Io { .. }
                | RunError::InitialData { .. }
                | RunError::InitialGrid { .. }
                | RunError::Record(RecordError::Io(_))
        )
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Builds the initial field described by the profile section.
pub fn initial_field(cfg: &RunConfig) -> Result<Wavefield, RunError> {
    let grid = cfg.grid_spec();
    match (&cfg.profile, cfg.profile.to_profile()) {
        (ProfileConfig::File { path }, _) => {
            let f = wavefield_io::read_field(path).map_err(|source| RunError::InitialData {
                path: path.clone(),
                source,
            })?;
            if *f.grid() != grid {
                return Err(RunError::InitialGrid { path: path.clone() });
            }
            Ok(f.physical())
        }
        (_, Some(p)) => Ok(p.build(&grid)?),
        (_, None) => unreachable!("only file profiles lack an analytic form"),
    }
}

/// Metadata line committed after the CSV and checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub status: String,
    pub validity_horizon: f64,
    pub final_time: f64,
    pub steps: u64,
    pub samples: usize,
    pub wall_seconds: f64,
    pub steps_per_second: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub config_hash: String,
    pub records: Vec<DiagnosticsRecord>,
    pub validity_horizon: f64,
    pub stop: StopReason,
    pub final_time: f64,
    pub steps: u64,
    pub wall_seconds: f64,
    pub steps_per_second: f64,
    /// Last observed state, inside the validity window.
    pub last_state: Wavefield,
    pub last_time: f64,
}

impl RunRecord {
    pub fn status(&self) -> &'static str {
        self.stop.label()
    }

    /// `(t, ||u(t)||_r)` over the recorded samples.
    pub fn series(&self, r: Exponent) -> Option<Vec<(f64, f64)>> {
        self.records
            .iter()
            .map(|rec| match r {
                Exponent::Infinity => Some((rec.t, rec.linf)),
                Exponent::Finite(v) => rec.lr(v).map(|n| (rec.t, n)),
            })
            .collect()
    }

    /// `(t, running integral)` of a named space-time accumulator.
    pub fn accumulator_series(&self, name: &str) -> Option<Vec<(f64, f64)>> {
        self.records
            .iter()
            .map(|rec| rec.accumulator(name).map(|v| (rec.t, v)))
            .collect()
    }

    pub fn meta(&self, warnings: Vec<String>) -> RunMeta {
        RunMeta {
            config_hash: self.config_hash.clone(),
            status: self.status().into(),
            validity_horizon: self.validity_horizon,
            final_time: self.final_time,
            steps: self.steps,
            samples: self.records.len(),
            wall_seconds: self.wall_seconds,
            steps_per_second: self.steps_per_second,
            warnings,
        }
    }
}

/// Names of the files a run commits into its output directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunPaths {
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub checkpoint: PathBuf,
    pub scattering: PathBuf,
}

impl RunPaths {
    pub fn new(dir: &Path, cfg: &RunConfig) -> Self {
        let stem = cfg.short_hash();
        Self {
            csv: dir.join(format!("{stem}.csv")),
            meta: dir.join(format!("{stem}.jsonl")),
            checkpoint: dir.join(format!("{stem}.final.nlsf")),
            scattering: dir.join(format!("{stem}.scattering.csv")),
        }
    }
}

struct Tee<'a> {
    sampler: &'a mut Sampler,
    last: Option<(f64, Wavefield)>,
}

impl Observer for Tee<'_> {
    fn observe(&mut self, step: u64, t: f64, u: &Wavefield) {
        self.sampler.observe(step, t, u);
        self.last = Some((t, u.clone()));
    }
}

fn sampler_for(cfg: &RunConfig) -> Sampler {
    let dcfg = DiagnosticsConfig::new(cfg.solver.alpha, &cfg.exponents(), cfg.margin_fraction);
    let params = cfg.solver_params();
    Sampler::new(
        dcfg,
        cfg.grid.dimension,
        params.sample_interval(),
        params.total_steps(),
    )
}

/// Executes one run in memory; nothing is written.
pub fn simulate(cfg: &RunConfig) -> Result<RunRecord, RunError> {
    let phi = initial_field(cfg)?;
    let params = cfg.solver_params();
    let mut sampler = sampler_for(cfg);
    let mut tee = Tee {
        sampler: &mut sampler,
        last: None,
    };
    let start = Instant::now();
    let evo = evolve(&phi, &params, &cfg.edge_monitor(), &mut tee)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    let (last_time, last_state) = tee.last.take().unwrap_or((0.0, phi));
    let records = sampler.finish()?;
    Ok(RunRecord {
        config_hash: cfg.hash(),
        records,
        validity_horizon: evo.validity_horizon,
        stop: evo.stop,
        final_time: evo.final_time,
        steps: evo.steps,
        wall_seconds,
        steps_per_second: if wall_seconds > 0.0 {
            evo.steps as f64 / wall_seconds
        } else {
            0.0
        },
        last_state,
        last_time,
    })
}

fn r_values(cfg: &RunConfig) -> Vec<f64> {
    DiagnosticsConfig::new(cfg.solver.alpha, &cfg.exponents(), cfg.margin_fraction).r_list
}

/// Runs `cfg` and commits `<hash>.csv`, `<hash>.final.nlsf` and, last,
/// `<hash>.jsonl` into `dir`. Each file is written atomically; the metadata
/// line marks the run as complete.
pub fn run_experiment(cfg: &RunConfig, dir: &Path) -> Result<RunRecord, RunError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let paths = RunPaths::new(dir, cfg);
    let record = simulate(cfg)?;
    let names = ["morawetz"];
    let csv = diagnostics_csv(&record.records, &r_values(cfg), &names)?;
    wavefield_io::write_atomic(&paths.csv, &csv).map_err(io_at(&paths.csv))?;
    let cp = Checkpoint {
        field: record.last_state.clone(),
        t: record.last_time,
        step: (record.last_time / cfg.solver.dt).round() as u64,
    };
    wavefield_io::write_checkpoint(&paths.checkpoint, &cp).map_err(io_at(&paths.checkpoint))?;
    if cfg.scattering {
        let probe = scattering_probe(cfg)?;
        let bytes = scattering_csv(&probe.rows, &r_values(cfg))?;
        wavefield_io::write_atomic(&paths.scattering, &bytes).map_err(io_at(&paths.scattering))?;
    }
    let mut line = serde_json::to_string(&record.meta(cfg.warnings()))?;
    line.push('\n');
    wavefield_io::write_atomic(&paths.meta, line.as_bytes()).map_err(io_at(&paths.meta))?;
    Ok(record)
}

/// Reads a committed metadata line.
pub fn read_meta(path: &Path) -> Result<RunMeta, RunError> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    Ok(serde_json::from_str(text.trim())?)
}

/// Outcome of the two-pass scattering probe.
#[derive(Clone, Debug)]
pub struct ScatteringProbe {
    /// Extraction time: the last sample inside the validity window.
    pub t_max: f64,
    pub state: AsymptoticState,
    pub rows: Vec<ScatteringRow>,
}

/// First pass finds `u(T_max)` and extracts `phi_plus`; the second pass
/// replays the run and measures the deficit at every sample up to `T_max`.
pub fn scattering_probe(cfg: &RunConfig) -> Result<ScatteringProbe, RunError> {
    let phi = initial_field(cfg)?;
    let params = cfg.solver_params();
    let monitor = cfg.edge_monitor();
    let mut last: Option<(f64, Wavefield)> = None;
    let mut keep = |_: u64, t: f64, u: &Wavefield| last = Some((t, u.clone()));
    evolve(&phi, &params, &monitor, &mut keep)?;
    let (t_max, u_t) = last.unwrap_or((0.0, phi.clone()));
    let state = extract_asymptotic_state(&u_t, t_max)?;

    let free_spec = state.phi_plus.spectral();
    let rs = r_values(cfg);
    let mut rows = Vec::new();
    let mut error: Option<RunError> = None;
    let mut measure = |_: u64, t: f64, u: &Wavefield| {
        if error.is_some() || t > t_max {
            return;
        }
        let row = scattering_deficit(u, &state, t)
            .map_err(RunError::from)
            .and_then(|d| {
                let free = nlslab_core::scattering::free_evolve(&free_spec, t);
                debug_assert_eq!(free.representation(), Representation::Physical);
                let free_lr = rs
                    .iter()
                    .map(|&r| lebesgue_norm(&free, Exponent::Finite(r)))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(ScatteringRow {
                    t,
                    deficit_l2: d.l2,
                    deficit_h1: d.h1,
                    free_lr,
                })
            });
        match row {
            Ok(r) => rows.push(r),
            Err(e) => error = Some(e),
        }
    };
    evolve(&phi, &params, &monitor, &mut measure)?;
    if let Some(e) = error {
        return Err(e);
    }
    Ok(ScatteringProbe { t_max, state, rows })
}

/// Per-run entry of a sweep report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub config_hash: String,
    /// Run status, `"skipped"` is never used: resumed runs report their stored status.
    pub status: String,
    pub validity_horizon: Option<f64>,
    pub resumed: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// Runs actually integrated in this invocation.
    pub computed: usize,
    pub resumed: usize,
    pub failed: usize,
}

pub const SWEEP_REPORT: &str = "sweep_report.json";

/// Runs every config on a pool of `threads` workers (0 picks the rayon
/// default). With `resume`, configs whose metadata line already exists in
/// `dir` are not recomputed. The report keeps input order.
pub fn sweep(
    configs: &[RunConfig],
    dir: &Path,
    resume: bool,
    threads: usize,
) -> Result<SweepReport, RunError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let entries: Vec<SweepEntry> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let paths = RunPaths::new(dir, cfg);
                if resume {
                    if let Ok(meta) = read_meta(&paths.meta) {
                        return SweepEntry {
                            config_hash: meta.config_hash,
                            status: meta.status,
                            validity_horizon: Some(meta.validity_horizon),
                            resumed: true,
                            error: None,
                        };
                    }
                }
                match run_experiment(cfg, dir) {
                    Ok(rec) => SweepEntry {
                        config_hash: rec.config_hash.clone(),
                        status: rec.status().into(),
                        validity_horizon: Some(rec.validity_horizon),
                        resumed: false,
                        error: None,
                    },
                    Err(e) => SweepEntry {
                        config_hash: cfg.hash(),
                        status: "failed".into(),
                        validity_horizon: None,
                        resumed: false,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    let report = SweepReport {
        computed: entries
            .iter()
            .filter(|e| !e.resumed && e.error.is_none())
            .count(),
        resumed: entries.iter().filter(|e| e.resumed).count(),
        failed: entries.iter().filter(|e| e.error.is_some()).count(),
        entries,
    };
    let path = dir.join(SWEEP_REPORT);
    let json = serde_json::to_vec_pretty(&report)?;
    wavefield_io::write_atomic(&path, &json).map_err(io_at(&path))?;
    Ok(report)
}

/// Finite-horizon summary of a decaying series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrendSummary {
    pub peak: f64,
    pub peak_time: f64,
    pub final_value: f64,
    pub final_time: f64,
    /// `peak / final`.
    pub decay_factor: f64,
    /// Time fraction of the longest suffix that is nonincreasing up to the tolerance.
    pub monotone_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TrendError {
    #[error("insufficient data: {0} samples inside the validity horizon, need at least 5")]
    InsufficientData(usize),
}

/// Relative wiggle allowed above the running minimum.
pub const MONOTONE_TOLERANCE: f64 = 0.01;

pub fn decay_trend(series: &[(f64, f64)]) -> Result<TrendSummary, TrendError> {
    if series.len() < 5 {
        return Err(TrendError::InsufficientData(series.len()));
    }
    let (peak_time, peak) =
        series
            .iter()
            .copied()
            .fold((series[0].0, f64::NEG_INFINITY), |acc, (t, v)| {
                if v > acc.1 {
                    (t, v)
                } else {
                    acc
                }
            });
    let (final_time, final_value) = *series.last().expect("nonempty");
    let is_monotone_from = |i: usize| {
        let mut low = series[i].1;
        series[i + 1..].iter().all(|&(_, v)| {
            let ok = v <= low * (1.0 + MONOTONE_TOLERANCE);
            low = low.min(v);
            ok
        })
    };
    // the property is not nested in i, so every start is tried
    let start = (0..series.len())
        .find(|&i| is_monotone_from(i))
        .expect("last point is trivially monotone");
    let span = final_time - series[0].0;
    let monotone_fraction = if span > 0.0 {
        (final_time - series[start].0) / span
    } else {
        1.0
    };
    Ok(TrendSummary {
        peak,
        peak_time,
        final_value,
        final_time,
        decay_factor: peak / final_value,
        monotone_fraction,
    })
}

/// Increments of a cumulative series over consecutive windows of width
/// `window`, starting at `start`. Windows extending past the data are dropped.
pub fn window_increments(series: &[(f64, f64)], start: f64, window: f64) -> Vec<(f64, f64)> {
    let value_at = |t: f64| {
        let tol = 1e-9 * window.max(1.0);
        series
            .iter()
            .find(|(s, _)| (s - t).abs() <= tol)
            .map(|(_, v)| *v)
    };
    let end = series.last().map_or(start, |(t, _)| *t);
    let mut out = Vec::new();
    let mut a = start;
    while a + window <= end + 1e-9 * window.max(1.0) {
        match (value_at(a), value_at(a + window)) {
            (Some(x), Some(y)) => out.push((a, y - x)),
            _ => break,
        }
        a += window;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_trend() {
        let s: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0)).collect();
        let t = decay_trend(&s).unwrap();
        assert_eq!(t.decay_factor, 1.0);
        assert_eq!(t.monotone_fraction, 1.0);
    }

    #[test]
    fn short_series_is_insufficient() {
        let s = [(0.0, 1.0), (1.0, 0.5), (2.0, 0.2), (3.0, 0.1)];
        assert_eq!(decay_trend(&s), Err(TrendError::InsufficientData(4)));
    }

    #[test]
    fn rise_then_decay() {
        // peak at t = 2, then 1/t decay with a sub-tolerance wiggle at t = 6
        let mut s: Vec<(f64, f64)> = (0..=10)
            .map(|i| {
                (
                    i as f64,
                    if i <= 2 {
                        1.0 + i as f64
                    } else {
                        6.0 / i as f64
                    },
                )
            })
            .collect();
        s[6].1 = s[5].1 * 1.005;
        let t = decay_trend(&s).unwrap();
        assert_eq!(t.peak, 3.0);
        assert_eq!(t.peak_time, 2.0);
        assert!((t.decay_factor - 5.0).abs() < 1e-12);
        assert!((t.monotone_fraction - 0.8).abs() < 1e-12);

        // a 5% bump late in the series cuts the suffix there
        s[8].1 = s[7].1 * 1.05;
        assert!((decay_trend(&s).unwrap().monotone_fraction - 0.2).abs() < 1e-12);
    }

    #[test]
    fn increments_over_windows() {
        let s: Vec<(f64, f64)> = (0..=20)
            .map(|i| (i as f64 * 0.5, (i as f64 * 0.5).sqrt()))
            .collect();
        let inc = window_increments(&s, 2.0, 2.0);
        assert_eq!(inc.len(), 4);
        assert!((inc[0].1 - (4f64.sqrt() - 2f64.sqrt())).abs() < 1e-15);
        assert!(inc.windows(2).all(|w| w[1].1 < w[0].1));
    }
}
