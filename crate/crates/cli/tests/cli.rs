use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eve"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const QUAD: &str = r#"name = "quad"
optimizer = "eve"
steps = 150
n_seeds = 2
lr_grid = [1e-3, 1e-2]

[objective]
kind = "quadratic"
dim = 6
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("c.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn verify_exit_code_agrees_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let o = eve(&["verify", "--json", out.to_str().unwrap()]);
    let report = json(&out);
    let passed = report["passed"].as_bool().unwrap();
    assert_eq!(code(&o), if passed { 0 } else { 1 });
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["gated"].as_bool().unwrap() && !c["passed"].as_bool().unwrap())
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    // The sampled velocity map is not a contraction on the requested region;
    // every other check passes.
    assert_eq!(failed, vec!["contraction/alpha=0.9"]);
    for c in report["checks"].as_array().unwrap() {
        assert!(c["measured"].is_object());
        assert!(c.get("tolerance").is_some());
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = eve(&["run", "--config", "definitely-missing.toml"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("definitely-missing.toml"));
}

#[test]
fn unknown_flag_is_rejected() {
    let o = eve(&["sweep", "--config", "x.toml", "--bogus", "1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn syntax_error_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &QUAD.replace("steps = 150", "steps = "));
    let o = eve(&["run", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("c.toml:3:"), "{}", stderr(&o));
}

#[test]
fn invalid_value_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &QUAD.replace("lr_grid = [1e-3, 1e-2]", "lr_grid = []"),
    );
    let o = eve(&["sweep", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("c.toml:5: invalid `lr_grid`"),
        "{}",
        stderr(&o)
    );
    assert!(!dir.path().join("runs").exists());
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUAD);
    let out = dir.path().join("out");
    let o = eve(&[
        "run",
        "--config",
        &cfg,
        "--optimizer",
        "adam",
        "--lr1",
        "0.005",
        "--steps",
        "40",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = json(&out.join("summary.json"));
    assert_eq!(s["optimizer"], "adam");
    assert_eq!(s["steps"], 40);
    assert_eq!(s["grid"]["lr1"][0], 0.005);
    assert_eq!(s["per_run"].as_array().unwrap().len(), 1);
    assert!(out.join("adam-0000.csv").exists());
}

#[test]
fn report_rederives_sweep_stats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUAD);
    let out = dir.path().join("sweep");
    let o = eve(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["per_run"].as_array().unwrap().len(), 4);
    let svg = fs::read(out.join("loss_curves.svg")).unwrap();

    let o = eve(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&out.join("stats.json")), summary["stats_by_field"]);
    assert_eq!(fs::read(out.join("loss_curves.svg")).unwrap(), svg);
    let first = fs::read(out.join("stats.json")).unwrap();
    assert_eq!(code(&eve(&["report", "--out", out.to_str().unwrap()])), 0);
    assert_eq!(fs::read(out.join("stats.json")).unwrap(), first);
}

#[test]
fn report_on_missing_directory_is_a_usage_error() {
    let o = eve(&["report", "--out", "no/such/dir"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweeps_are_byte_identical_across_repeats_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUAD);
    let mut dirs = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out = dir.path().join(name);
        let o = eve(&[
            "sweep",
            "--config",
            &cfg,
            "--seed",
            "5",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        dirs.push(out);
    }
    let mut names: Vec<_> = fs::read_dir(&dirs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 4 + 1 + 2);
    for other in &dirs[1..] {
        for n in &names {
            assert_eq!(
                fs::read(dirs[0].join(n)).unwrap(),
                fs::read(other.join(n)).unwrap(),
                "{n:?}"
            );
        }
    }
}
