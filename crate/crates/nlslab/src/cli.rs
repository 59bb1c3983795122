//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlslab_core::admissible::{is_admissible, residual};
use nlslab_core::ExtRational;

use crate::config::{self, ConfigError, RunConfig};
use crate::records::Table;
use crate::runner::{self, decay_trend};
use crate::validate::{self, Options, Report};
use crate::{plot, Error};

const RANGES: &str = "\
Valid ranges:
  alpha: 0 < alpha < inf for d = 1, 2; 0 < alpha < 4/(d-2) = 4 for d = 3
  r:     2 < r < inf for d = 1, 2 (r = inf also allowed for d = 1);
         2 < r < 2d/(d-2) = 6 for d = 3";

#[derive(Debug, Parser)]
#[command(
    name = "nlslab",
    version,
    propagate_version = true,
    about = "Split-step simulator and decay diagnostics for i u_t = Δu - u|u|^alpha",
    after_help = RANGES
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set solver.alpha=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory; defaults to `output.output_path`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration and write its CSV, metadata and final checkpoint.
    #[command(after_help = RANGES)]
    Run {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the cartesian product of `--vary` values over a base config.
    #[command(after_help = RANGES)]
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// `KEY=v1,v2,...`; each listed value becomes one run. Repeatable.
        #[arg(long, value_name = "KEY=VALUES")]
        vary: Vec<String>,
        /// Skip configs whose metadata already exists in the output directory.
        #[arg(long)]
        resume: bool,
        /// Worker threads (0 uses all cores).
        #[arg(long, env = "NLSLAB_THREADS", default_value_t = 0)]
        threads: usize,
        /// Print the sweep report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run the built-in invariant suite.
    Validate {
        /// Print a machine-readable report.
        #[arg(long)]
        json: bool,
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
    /// Compare the propagator with the plane-wave and free-Gaussian solutions.
    OracleCheck {
        #[arg(long)]
        json: bool,
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
    /// Strichartz admissibility of (p, q) in dimension d; exit 0 iff admissible.
    Admissible {
        /// Time exponent: integer, fraction `a/b`, decimal or `inf`.
        p: String,
        /// Space exponent.
        q: String,
        d: usize,
    },
    /// Decay summary of one L^r column of a run CSV.
    #[command(after_help = RANGES)]
    Trend {
        record: PathBuf,
        /// Exponent, or `inf` for the sup norm.
        #[arg(long, default_value = "3")]
        r: String,
        #[arg(long)]
        json: bool,
    },
    /// Export `(t, column)` pairs of a run CSV as `.dat` files.
    PlotData {
        record: PathBuf,
        /// Comma-separated column names; all data columns when omitted.
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
        /// Output directory; defaults to the record's directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn load(args: &ConfigArgs, extra: &[String]) -> Result<RunConfig, Error> {
    let mut sets = args.set.clone();
    sets.extend_from_slice(extra);
    let mut cfg = config::load_config(&args.config, &sets)?;
    if let Some(out) = &args.out {
        cfg.output_path = out.clone();
    }
    Ok(cfg)
}

/// Expands `KEY=v1,v2` arguments into one override list per combination.
pub fn expand_vary(vary: &[String]) -> Result<Vec<Vec<String>>, Error> {
    let mut combos: Vec<Vec<String>> = vec![Vec::new()];
    for spec in vary {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(ConfigError::Override(spec.clone())))?;
        let values: Vec<&str> = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(Error::Config(ConfigError::Override(spec.clone())));
        }
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push(format!("{}={v}", key.trim()));
                    c
                })
            })
            .collect();
    }
    Ok(combos)
}

fn print_report(report: &Report, json: bool) -> Result<(), Error> {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(report).map_err(crate::runner::RunError::from)?
        );
    } else {
        for c in &report.checks {
            println!("{}", c.line());
        }
        println!(
            "{} ({} checks, {:.1}s)",
            if report.passed {
                "all checks passed"
            } else {
                "validation FAILED"
            },
            report.checks.len(),
            report.seconds
        );
    }
    Ok(())
}

fn parse_exponent(s: &str) -> Result<nlslab_core::Exponent, Error> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(nlslab_core::Exponent::Infinity),
        other => other
            .parse::<f64>()
            .map(nlslab_core::Exponent::Finite)
            .map_err(|_| Error::Usage(format!("cannot read `{s}` as an exponent"))),
    }
}

fn column_for(r: nlslab_core::Exponent) -> String {
    match r {
        nlslab_core::Exponent::Infinity => "l_inf".into(),
        nlslab_core::Exponent::Finite(v) => crate::records::lr_column(v),
    }
}

fn record_dir(record: &Path) -> PathBuf {
    record
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Executes a parsed command; `Ok(false)` means a check or query came out negative.
pub fn execute(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config, &[])?;
            for w in cfg.warnings() {
                eprintln!("warning: {w}");
            }
            let rec = runner::run_experiment(&cfg, &cfg.output_path)?;
            let paths = runner::RunPaths::new(&cfg.output_path, &cfg);
            println!(
                "{} {}: {} samples, horizon {}, {:.0} steps/s -> {}",
                cfg.short_hash(),
                rec.status(),
                rec.records.len(),
                rec.validity_horizon,
                rec.steps_per_second,
                paths.csv.display()
            );
            if rec.stop.is_sentinel() {
                return Err(Error::Sentinel(format!("{:?}", rec.stop)));
            }
            Ok(true)
        }
        Command::Sweep {
            config,
            vary,
            resume,
            threads,
            json,
        } => {
            let combos = expand_vary(&vary)?;
            let configs = combos
                .iter()
                .map(|extra| load(&config, extra))
                .collect::<Result<Vec<_>, _>>()?;
            let dir = config.out.clone().unwrap_or_else(|| {
                configs
                    .first()
                    .map(|c| c.output_path.clone())
                    .unwrap_or_else(|| "runs".into())
            });
            let report = runner::sweep(&configs, &dir, resume, threads)?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).map_err(runner::RunError::from)?
                );
            } else {
                for e in &report.entries {
                    let tail = e.error.as_deref().unwrap_or("");
                    println!(
                        "{} {}{} {tail}",
                        &e.config_hash[..16],
                        e.status,
                        if e.resumed { " (resumed)" } else { "" }
                    );
                }
                println!(
                    "computed {}, resumed {}, failed {}",
                    report.computed, report.resumed, report.failed
                );
            }
            if report
                .entries
                .iter()
                .any(|e| e.status == "non_finite" || e.status == "blow_up")
            {
                return Err(Error::Sentinel(
                    "a sweep run hit an internal sentinel".into(),
                ));
            }
            Ok(report.failed == 0)
        }
        Command::Validate {
            json,
            inject_sign_flip,
        } => {
            let report = validate::run(Options {
                flip_linear_sign: inject_sign_flip,
            });
            print_report(&report, json)?;
            Ok(report.passed)
        }
        Command::OracleCheck {
            json,
            inject_sign_flip,
        } => {
            let opts = Options {
                flip_linear_sign: inject_sign_flip,
            };
            let start = std::time::Instant::now();
            let checks = vec![
                validate::plane_wave_agreement(opts),
                validate::free_gaussian_agreement(opts),
            ];
            let report = Report {
                passed: checks.iter().all(|c| c.passed),
                checks,
                seconds: start.elapsed().as_secs_f64(),
            };
            print_report(&report, json)?;
            Ok(report.passed)
        }
        Command::Admissible { p, q, d } => {
            if d == 0 {
                return Err(Error::Usage("dimension must be at least 1".into()));
            }
            let p: ExtRational = p.parse()?;
            let q: ExtRational = q.parse()?;
            let ok = is_admissible(&p, &q, d);
            let res = match residual(&p, &q, d) {
                Some(r) => r.to_string(),
                None => "undefined (zero exponent)".into(),
            };
            println!(
                "(p, q, d) = ({p}, {q}, {d}): {}",
                if ok { "admissible" } else { "not admissible" }
            );
            println!("residual 2/p + d/q - d/2 = {res}");
            Ok(ok)
        }
        Command::Trend { record, r, json } => {
            let table = Table::read(&record)?;
            let column = column_for(parse_exponent(&r)?);
            let series = table.series(&column).ok_or_else(|| {
                Error::Plot(plot::PlotError::UnknownColumn {
                    column: column.clone(),
                    valid: plot::data_columns(&table),
                })
            })?;
            let summary = decay_trend(&series)?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&summary).map_err(runner::RunError::from)?
                );
            } else {
                println!("column {column}");
                println!("peak {:e} at t = {}", summary.peak, summary.peak_time);
                println!(
                    "final {:e} at t = {}",
                    summary.final_value, summary.final_time
                );
                println!("decay factor {:.4}", summary.decay_factor);
                println!("monotone tail fraction {:.4}", summary.monotone_fraction);
            }
            Ok(true)
        }
        Command::PlotData {
            record,
            columns,
            out,
        } => {
            let dir = out.unwrap_or_else(|| record_dir(&record));
            let files = plot::export(&record, &columns, &dir)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(true)
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn vary_expands_to_cartesian_product() {
        let c = expand_vary(&[
            "solver.alpha=0.5,1".into(),
            "grid.points_per_axis=64,128,256".into(),
        ])
        .unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(c[0], vec!["solver.alpha=0.5", "grid.points_per_axis=64"]);
        assert_eq!(expand_vary(&[]).unwrap(), vec![Vec::<String>::new()]);
        assert!(expand_vary(&["solver.alpha".into()]).is_err());
    }
}
