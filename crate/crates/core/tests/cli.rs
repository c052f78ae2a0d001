//! The `qosdiff` binary: outputs, provenance and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qosdiff(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qosdiff"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("QOSDIFF_THREADS")
        .output()
        .unwrap()
}

fn scenario(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn optimize_writes_table_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario(dir.path(), "preset = \"paper-low\"\nloads = [0.1, 0.12]\n");
    let out = qosdiff(dir.path(), &["optimize", "--scenario", &file]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("optimize.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("lambda,gamma,revenue,phi_1,phi_2,p_1,p_2"));
    assert_eq!(lines.count(), 2);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("optimize.json")).unwrap()).unwrap();
    let prov = &json["provenance"];
    assert_eq!(prov["scenario_hash"].as_str().unwrap().len(), 64);
    assert!(prov["scenario"].as_str().unwrap().contains("delta = 0.02"));
    assert!(prov["wall_time_secs"].as_f64().unwrap() >= 0.0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("best gamma 1.8248"));
}

#[test]
fn same_inputs_same_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let hash = |dir: &Path| {
        let out = qosdiff(dir, &["bounds", "--preset", "paper-high"]);
        assert!(out.status.success(), "{}", stderr(&out));
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("bounds.json")).unwrap()).unwrap();
        json["provenance"]["scenario_hash"].as_str().unwrap().to_owned()
    };
    assert_eq!(hash(a.path()), hash(b.path()));
    assert!(a.path().join("bounds_hyper.csv").exists());
}

#[test]
fn simulate_validates_an_explicit_system() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario(
        dir.path(),
        "[simulation]\nmeasured_jobs = 100000\nreplications = 3\ntrace = true\n\
         system = { arch = \"pbs\", servers = 1, rates = [0.2, 0.2] }\n",
    );
    let out = qosdiff(dir.path(), &["simulate", "--validate", "--scenario", &file]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("validation passed"));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "job,class,server,arrival,start");
    assert!(dir.path().join("simulate_servers.csv").exists());
}

#[test]
fn dsic_reports_truthful_menus() {
    let dir = tempfile::tempdir().unwrap();
    let out = qosdiff(dir.path(), &["dsic", "--preset", "paper-high", "--L", "3", "--threads", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("26 menus truthful"));
    assert!(dir.path().join("dsic.csv").exists());
}

#[test]
fn reproduce_emits_figure_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = qosdiff(dir.path(), &["reproduce", "appendix"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("appendix.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("replay"));
    assert!(dir.path().join("reproduce_appendix.json").exists());
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str], i32, &str); 5] = [
        ("L = 2\nbogus = 1\n", &["optimize"], 2, "error[config]"),
        ("[wtp]\nT = -1.0\n[population]\ndelta = 0.0\n", &["optimize"], 2, "error[config]"),
        ("arch = \"pbs\"\nloads = [0.2, 0.3]\n", &["optimize"], 5, "error[infeasible]"),
        ("[simulation]\nsystem = { arch = \"od\", servers = 1, rates = [1.5] }\n", &["simulate"], 4, "error[unstable]"),
        ("L = 2\n", &["reproduce", "fig5"], 3, "error[invalid-input]"),
    ];
    for (text, args, code, tag) in cases {
        let file = scenario(dir.path(), text);
        let mut all = args.to_vec();
        all.extend(["--scenario", &file]);
        let out = qosdiff(dir.path(), &all);
        assert_eq!(out.status.code(), Some(code), "{text}: {}", stderr(&out));
        assert!(stderr(&out).starts_with(tag), "{text}: {}", stderr(&out));
    }
    let out = qosdiff(dir.path(), &["optimize", "--preset", "paper-mid"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = qosdiff(dir.path(), &["optimize", "--scenario", "/nonexistent/s.toml"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn validation_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario(dir.path(), "L = 0\nm = 0\n[wtp]\nbeta = 1.0\n");
    let out = qosdiff(dir.path(), &["optimize", "--scenario", &file]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.matches("\n  - ").count() >= 3, "{err}");
}

#[test]
fn shipped_scenarios_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        qosdiff::scenario::load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 2);
}
