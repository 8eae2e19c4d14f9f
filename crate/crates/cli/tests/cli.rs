use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const CONFIG: &str = r#"{
    "seed": 3,
    "data": {"source": "synthetic", "generator": "labeled_mixture",
             "classes": 3, "dim": 16, "samples_per_class": 8},
    "operator": {"ratio": 0.5},
    "model": {"layers": [12, 8], "sweeps": 4}
}"#;

fn dbcs(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dbcs"));
    cmd.args(args).env_remove("DBCS_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    fs::write(&path, CONFIG).unwrap();
    path.display().to_string()
}

fn report(dir: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    v["wall_time_seconds"] = Value::Null;
    v["config"]["output_dir"] = Value::Null;
    v
}

fn same_mats(a: &Path, b: &Path) {
    for name in ["X.mat", "Y.mat", "A.mat", "codes.mat", "Xhat.mat", "model/D1.mat", "model/D2.mat", "model/Z.mat"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn run_prints_report_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = dbcs(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()], &[]);
    ok(&out);
    let printed = String::from_utf8(out.stdout).unwrap();
    assert_eq!(printed.trim(), out_dir.join("report.json").display().to_string());
    let r = report(&out_dir);
    assert_eq!(r["format"], "dbcs-report/1");
    assert_eq!(r["config"]["seed"], 3);
    assert!(r["classification"]["accuracy"].is_number());
}

#[test]
fn stage_subcommands_match_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let whole = tmp.path().join("whole");
    let staged = tmp.path().join("staged");
    ok(&dbcs(&["run", "--config", &cfg, "--out", whole.to_str().unwrap()], &[]));
    for stage in ["synth", "acquire", "fit", "encode", "reconstruct", "classify", "report"] {
        ok(&dbcs(&[stage, "--config", &cfg, "--out", staged.to_str().unwrap()], &[]));
    }
    same_mats(&whole, &staged);
    assert_eq!(report(&whole), report(&staged));
}

#[test]
fn threads_do_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let one = tmp.path().join("one");
    let four = tmp.path().join("four");
    ok(&dbcs(&["run", "--config", &cfg, "--out", one.to_str().unwrap()], &[]));
    ok(&dbcs(&["--threads", "4", "run", "--config", &cfg, "--out", four.to_str().unwrap()], &[]));
    same_mats(&one, &four);
    assert_eq!(report(&one), report(&four));
}

#[test]
fn seed_environment_variable_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&dbcs(&["run", "--config", &cfg, "--out", a.to_str().unwrap()], &[("DBCS_SEED", "77")]));
    ok(&dbcs(&["run", "--config", &cfg, "--out", b.to_str().unwrap()], &[]));
    assert_eq!(report(&a)["config"]["seed"], 77);
    assert_ne!(fs::read(a.join("X.mat")).unwrap(), fs::read(b.join("X.mat")).unwrap());

    let bad = dbcs(&["run", "--config", &cfg, "--out", a.to_str().unwrap()], &[("DBCS_SEED", "x")]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("DBCS_SEED"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(&path, r#"{"seed": 1, "sweeps": 3}"#).unwrap();
    let out = dbcs(&["run", "--config", path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()], &[]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sweeps"), "{err}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn stage_without_inputs_names_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = dbcs(&["fit", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()], &[]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("fit"), "{err}");
    assert!(err.contains("X.mat"), "{err}");
}

#[test]
fn export_csv_writes_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out_dir = tmp.path().join("out");
    ok(&dbcs(&["synth", "--config", &cfg, "--out", out_dir.to_str().unwrap()], &[]));
    let csv = tmp.path().join("x.csv");
    ok(&dbcs(&["export-csv", out_dir.join("X.mat").to_str().unwrap(), csv.to_str().unwrap()], &[]));
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r.split(',').count() == 24));

    let missing = dbcs(&["export-csv", "/nonexistent.mat", csv.to_str().unwrap()], &[]);
    assert!(!missing.status.success());
}

#[test]
fn help_lists_subcommands() {
    let out = dbcs(&["--help"], &[]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["synth", "acquire", "fit", "encode", "reconstruct", "classify", "report", "export-csv", "run", "--threads"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}
