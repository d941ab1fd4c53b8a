use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use anneal_cli::config::ExperimentConfig;

fn anneal(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anneal"))
        .args(args)
        .env_remove("ANNEAL_OUT_DIR")
        .current_dir(out)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const EXPLOSION: &str = r#"
schema_version = 1
experiment = "explosion"
seed = 3

[potential]
name = "explosive_alpha"

[schedule]
constant_beta = 1.0

[budget]
n_paths = 100
horizon = 5.0

[events]
alphas = [0.5, 1.0, 1.5]
"#;

#[test]
fn barriers_on_double_well() {
    let tmp = tempfile::tempdir().unwrap();
    let o = anneal(
        &["barriers", "--potential", "double_well_1d", "--bounds", "-2,2", "--resolution", "401", "--out", "res"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((summary["c_star"].as_f64().unwrap() - 1.0).abs() < 0.02);
    let dir = tmp.path().join("res/barriers");
    for f in ["barriers.json", "merge_events.csv", "summary.json", "meta.json", "config.resolved.toml", "log.jsonl"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let leftovers: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with('.'))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn explosion_rows_and_worker_independence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e.toml", EXPLOSION);
    let a = anneal(&["explosion", "--config", &cfg, "--workers", "1", "--out", "a"], tmp.path());
    let b = anneal(&["run", "--experiment", &cfg, "--workers", "3", "--out", "b"], tmp.path());
    assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
    let csv_a = fs::read(tmp.path().join("a/explosion/explosion.csv")).unwrap();
    let csv_b = fs::read(tmp.path().join("b/explosion/explosion.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().count(), 4, "{text}");
    assert!(text.lines().nth(3).unwrap().starts_with("1.5,100,"));
}

#[test]
fn resolved_config_round_trips_and_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e.toml", EXPLOSION);
    assert!(anneal(&["explosion", "--config", &cfg, "--out", "first"], tmp.path()).status.success());
    let echo_path = tmp.path().join("first/explosion/config.resolved.toml");
    let echo = fs::read_to_string(&echo_path).unwrap();
    let parsed = ExperimentConfig::parse(&echo).unwrap();
    assert_eq!(parsed, parsed.resolve());
    let o = anneal(&["run", "--config", echo_path.to_str().unwrap(), "--out", "second"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(tmp.path().join("first/explosion/explosion.csv")).unwrap(),
        fs::read(tmp.path().join("second/explosion/explosion.csv")).unwrap()
    );
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_anneal"))
        .args(["gibbs", "--potential", "quadratic_d", "--betas", "1,2"])
        .env("ANNEAL_OUT_DIR", tmp.path().join("env-out"))
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("env-out/gibbs/gibbs.csv").is_file());
}

#[test]
fn validation_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = EXPLOSION.replace("constant_beta = 1.0", "constant_beta = 1.0\nbeta0 = -1.0");
    let cfg = write(tmp.path(), "bad.toml", &bad);
    let o = anneal(&["run", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schedule.beta0"), "{}", stderr(&o));

    let both = r#"
schema_version = 1
experiment = "run"
[potential]
name = "double_well_1d"
[schedule]
c = 1.0
multiplier = 2.0
[events]
x0 = [1.0]
"#;
    let cfg = write(tmp.path(), "both.toml", both);
    let o = anneal(&["run", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("schedule.c") && err.contains("schedule.multiplier"), "{err}");

    let o = anneal(&["barriers", "--potential", "no_such_potential"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = anneal(&["frobnicate"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_file_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let o = anneal(&["run", "--config", "absent.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unstable_step_exits_3_and_is_logged() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
schema_version = 1
experiment = "fp1d"
[potential]
name = "double_well_1d"
[schedule]
constant_beta = 1.0
[budget]
horizon = 1.0
[domain]
lo = [-2.0]
hi = [2.0]
[fp]
cells = 400
dt = 0.1
"#;
    let cfg = write(tmp.path(), "fp.toml", text);
    let o = anneal(&["fp1d", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let log = fs::read_to_string(tmp.path().join("o/fp1d/log.jsonl")).unwrap();
    assert!(log.lines().last().unwrap().contains("\"numeric\""), "{log}");
    assert!(!tmp.path().join("o/fp1d/fp1d.csv").exists());
}

#[test]
fn failed_check_exits_4_with_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = anneal(
        &["spectral", "--potential", "double_well_1d", "--torus-level", "5", "--half-width", "3", "--resolution", "128", "--out", "o"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = r#"
schema_version = 1
experiment = "spectral"
[potential]
name = "double_well_1d"
[budget]
resolution = 128
[torus]
level = 5.0
half_width = 3.0
[spectral]
prefactor = "hks"
[checks]
rate_rel_tol = 0.01
"#;
    let cfg = write(tmp.path(), "s.toml", text);
    let o = anneal(&["spectral", "--config", &cfg, "--out", "strict"], tmp.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("strict/spectral/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["checks_passed"], false);
    assert!(tmp.path().join("strict/spectral/spectral.csv").is_file());
}

#[test]
fn shipped_experiment_files_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let r = cfg.resolve();
            assert_eq!(ExperimentConfig::parse(&r.to_toml()).unwrap(), r);
            n += 1;
        }
    }
    assert!(n >= 5);
}
