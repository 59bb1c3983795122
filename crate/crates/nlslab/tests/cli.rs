use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[grid]
dimension = 1
points_per_axis = 256
box_length = 40.0

[solver]
alpha = 1.0
dt = 0.01
t_end = 1.0
sample_every = 10

[profile]
kind = "gaussian"
amplitude = 1.0
width = 1.0

[diagnostics]
r_list = [3, 6, "inf"]

[output]
output_path = "unused"
seed = 1
"#;

fn nlslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlslab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn single_csv(dir: &Path) -> PathBuf {
    let mut csvs: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    assert_eq!(csvs.len(), 1, "{csvs:?}");
    csvs.pop().unwrap()
}

#[test]
fn run_writes_record_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = nlslab(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = single_csv(&out_dir);
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,mass,energy,h1,l_inf,l_3,l_6,local_mass_sup,gn_ratio,st_morawetz,edge_mass"
    );
    assert_eq!(lines.count(), 11);
    let stem = csv.file_stem().unwrap().to_str().unwrap();
    assert!(out_dir.join(format!("{stem}.jsonl")).exists());
    assert!(out_dir.join(format!("{stem}.final.nlsf")).exists());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn alpha_out_of_range_exits_two_and_quotes_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = nlslab(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "grid.dimension=3",
        "--set",
        "grid.points_per_axis=16",
        "--set",
        "solver.alpha=4.5",
        "--set",
        "profile.center=[0,0,0]",
        "--set",
        "profile.velocity=[0,0,0]",
        "--set",
        "diagnostics.r_list=[3, 6]",
    ]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(
        err.contains("solver.alpha") && err.contains("4/(d-2) = 4"),
        "{err}"
    );
    // both violations are reported, not just the first
    assert!(err.contains("diagnostics.r_list[1]"), "{err}");
}

#[test]
fn missing_config_exits_three() {
    let out = nlslab(&["run", "--config", "/nonexistent/run.toml"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn unknown_flag_is_rejected() {
    let out = nlslab(&["run", "--config", "x.toml", "--bogus"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn every_subcommand_has_help_and_version() {
    for sub in [
        "run",
        "sweep",
        "validate",
        "oracle-check",
        "admissible",
        "trend",
        "plot-data",
    ] {
        let help = nlslab(&[sub, "--help"]);
        assert_eq!(code(&help), 0, "{sub} --help");
        let version = nlslab(&[sub, "--version"]);
        assert_eq!(code(&version), 0, "{sub} --version");
        assert!(String::from_utf8_lossy(&version.stdout).contains(env!("CARGO_PKG_VERSION")));
    }
    let help = String::from_utf8_lossy(&nlslab(&["--help"]).stdout).into_owned();
    assert!(help.contains("0 < alpha < 4/(d-2)"));
    assert!(help.contains("2 < r < 2d/(d-2) = 6"));
}

#[test]
fn admissible_queries() {
    let out = nlslab(&["admissible", "inf", "2", "3"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("admissible"));

    let out = nlslab(&["admissible", "2", "inf", "2"]);
    assert_eq!(code(&out), 1);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("not admissible"));
    assert!(text.contains("residual 2/p + d/q - d/2 = 0"), "{text}");

    let out = nlslab(&["admissible", "4", "4", "2"]);
    assert_eq!(code(&out), 0);

    let out = nlslab(&["admissible", "3", "3", "1"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("= 1/2"));

    let out = nlslab(&["admissible", "four", "4", "2"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn oracle_check_catches_sign_flip() {
    let out = nlslab(&["oracle-check", "--json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).expect("well-formed JSON");
    assert_eq!(report["passed"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 2);

    let out = nlslab(&["oracle-check", "--inject-sign-flip"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL plane_wave_oracle"));
}

#[test]
fn duplicate_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        "kind = \"gaussian\"",
        "kind = \"random_phase\"\nspectrum_width = 2.0",
    );
    let cfg = write_config(dir.path(), &text);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = nlslab(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let csv = single_csv(&out_dir);
        let cp = csv.with_extension("final.nlsf");
        outputs.push((fs::read(&csv).unwrap(), fs::read(cp).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn plane_wave_norms_are_constant_and_trend_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace("kind = \"gaussian\"", "kind = \"plane_wave\"\nmode = [3]")
        .replace("amplitude = 1.0", "amplitude = 0.5");
    let cfg = write_config(dir.path(), &text);
    let out_dir = dir.path().join("out");
    let out = nlslab(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = single_csv(&out_dir);
    let mut rdr = csv::Reader::from_path(&csv).unwrap();
    let header = rdr.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    for (i, name) in header
        .iter()
        .enumerate()
        .filter(|(_, n)| n.starts_with("l_"))
    {
        let first: f64 = rows[0][i].parse().unwrap();
        for r in &rows {
            let v: f64 = r[i].parse().unwrap();
            assert!((v - first).abs() <= 1e-12 * first, "{name}: {v} vs {first}");
        }
    }
    for r in ["3", "6", "inf"] {
        let out = nlslab(&["trend", csv.to_str().unwrap(), "--r", r, "--json"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let s: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!((s["decay_factor"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(s["monotone_fraction"].as_f64().unwrap(), 1.0);
    }
}

#[test]
fn trend_on_short_record_reports_insufficient_data() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("short.csv");
    fs::write(&p, "t,l_3\n0,1\n1,0.5\n").unwrap();
    let out = nlslab(&["trend", p.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("insufficient data"));
}

#[test]
fn sweep_resume_skips_completed_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("sweep");
    let args = |resume: bool| {
        let mut a = vec![
            "sweep".to_string(),
            "--config".into(),
            cfg.to_str().unwrap().into(),
            "--out".into(),
            out_dir.to_str().unwrap().into(),
            "--vary".into(),
            "solver.alpha=0.5,1,2,4,6".into(),
            "--threads".into(),
            "2".into(),
            "--json".into(),
        ];
        if resume {
            a.push("--resume".into());
        }
        a
    };
    let run = |resume: bool| {
        let a = args(resume);
        let out = nlslab(&a.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()
    };
    let first = run(false);
    assert_eq!(first["computed"], 5);
    assert_eq!(first["entries"].as_array().unwrap().len(), 5);
    let csv_count = fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "csv")
        })
        .count();
    assert_eq!(csv_count, 5);
    let again = run(true);
    assert_eq!(again["computed"], 0);
    assert_eq!(again["resumed"], 5);
    assert_eq!(
        first["entries"][2]["config_hash"],
        again["entries"][2]["config_hash"]
    );
    assert!(out_dir.join("sweep_report.json").exists());
}

#[test]
fn sweep_threads_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_nlslab"))
        .args([
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--vary",
            "solver.alpha=1,2",
        ])
        .arg("--out")
        .arg(dir.path().join("s"))
        .env("NLSLAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let bad = Command::new(env!("CARGO_BIN_EXE_nlslab"))
        .args(["sweep", "--config", cfg.to_str().unwrap()])
        .env("NLSLAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn plot_data_exports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    assert_eq!(
        code(&nlslab(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap()
        ])),
        0
    );
    let csv = single_csv(&out_dir);
    let plots = dir.path().join("plots");
    let out = nlslab(&[
        "plot-data",
        csv.to_str().unwrap(),
        "--columns",
        "l_3",
        "--out",
        plots.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let files: Vec<PathBuf> = fs::read_dir(&plots)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(files.len(), 1);
    let text = fs::read_to_string(&files[0]).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 11);
    assert!(data.iter().all(|l| l.split_whitespace().count() == 2));

    let all = dir.path().join("all");
    assert_eq!(
        code(&nlslab(&[
            "plot-data",
            csv.to_str().unwrap(),
            "--out",
            all.to_str().unwrap()
        ])),
        0
    );
    // schema: t plus ten data columns
    assert_eq!(fs::read_dir(&all).unwrap().count(), 10);

    let out = nlslab(&["plot-data", csv.to_str().unwrap(), "--columns", "l_9"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("valid columns: mass, energy"));

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "t,mass,l_3\n").unwrap();
    let out = nlslab(&["plot-data", empty.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("insufficient data"));

    assert_eq!(code(&nlslab(&["plot-data", "/nonexistent.csv"])), 3);
}
