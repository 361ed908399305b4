use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ridgemargin::experiments::{benign_demo, DemoSettings};
use ridgemargin::Spectrum;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_ridgemargin"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn files(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    v.sort();
    v
}

fn single_csv(dir: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let csvs = files(dir, "csv");
    assert_eq!(csvs.len(), 1, "{csvs:?}");
    let text = std::fs::read_to_string(&csvs[0]).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].clone()).collect()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn default_verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), "{}", &["verify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS") && !stdout.contains("FAIL"));
    assert_eq!(files(&tmp.path().join("out"), "json").len(), 1);
}

#[test]
fn perturbed_verify_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment": {"verify": {"instances": 100, "s_perturbation": 1e-3}}}"#;
    let o = run(tmp.path(), cfg, &["verify"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn unknown_key_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), r#"{"experiment": {"trails": 10}}"#, &["sweep-mu"]);
    assert_eq!(code(&o), 2);
    assert!(!tmp.path().join("out").exists());
    let o = run(tmp.path(), r#"{"problem": {"eta": 0.7}}"#, &["bounds"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn no_split_index_is_numeric_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), r#"{"problem": {"lambda": -1e9}}"#, &["bounds"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn phase_rows_cover_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment": {"phase": {"q_grid": [0.3, 0.5, 0.75], "n_grid": [100, 1000], "r": 0.5, "s": 1.5}}}"#;
    let o = run(tmp.path(), cfg, &["phase"]);
    assert_eq!(code(&o), 0);
    let (header, rows) = single_csv(&tmp.path().join("out"));
    assert_eq!(rows.len(), 6);
    assert!(column(&header, &rows, "muthukumar_ratio").iter().all(|v| v.parse::<f64>().unwrap() > 0.0));
}

#[test]
fn lambda_below_floor_drops_every_trial() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "problem": {"spectrum": {"kind": "isotropic", "p": 100}, "n": 20},
        "experiment": {"trials": 40, "eps": [0.25], "k": 0, "lambdas": [-1000.0, 0.0]}
    }"#;
    let o = run(tmp.path(), cfg, &["sweep-lambda"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = single_csv(&tmp.path().join("out"));
    assert_eq!(rows.len(), 2);
    assert_eq!(column(&header, &rows, "dropped"), ["40", "0"]);
    assert_eq!(column(&header, &rows, "alpha_hat")[0], "");
}

#[test]
fn manifest_replays_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "problem": {"spectrum": {"kind": "spiked", "p": 300, "k": 2, "spike": 20.0}, "n": 30, "eta": 0.1},
        "experiment": {"trials": 60, "eps": [0.25], "mu_scales": [0.5, 2.0]},
        "output": {"dump": true}
    }"#;
    let o = run(tmp.path(), cfg, &["sweep-mu", "--seed", "9", "--threads", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = tmp.path().join("out");
    let manifest = &files(&first, "json")[0];
    let echo: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(echo["run"]["seed"], 9);
    assert_eq!(echo["run"]["command"], "sweep-mu");

    let replay = tmp.path().join("replay");
    let o = Command::new(env!("CARGO_BIN_EXE_ridgemargin"))
        .args(["sweep-mu", "--threads", "1", "--config"])
        .arg(manifest)
        .arg("--out")
        .arg(&replay)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = std::fs::read(&files(&first, "csv")[0]).unwrap();
    let b = std::fs::read(&files(&replay, "csv")[0]).unwrap();
    assert_eq!(a, b);
    let dumps: Vec<_> = std::fs::read_dir(&replay).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).collect();
    assert_eq!(dumps.len(), 1);
}

#[test]
fn outputs_stay_in_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), r#"{"experiment": {"events": {"trials": 5}}}"#, &["events"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut top: Vec<_> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    top.sort();
    assert_eq!(top, ["config.json", "out"]);
    let (_, rows) = single_csv(&tmp.path().join("out"));
    assert_eq!(rows.len(), 5);
}

#[test]
fn demo_row_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "problem": {"spectrum": {"kind": "bilevel", "s": 2.0, "q": 0.5, "r": 0.0}, "n": 200},
        "experiment": {"seed": 3, "demo": {"trials": 20, "mu_scales": [40.0]}}
    }"#;
    let o = run(tmp.path(), cfg, &["demo"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = single_csv(&tmp.path().join("out"));
    assert_eq!(rows.len(), 1);

    let spec = Spectrum::bilevel(200, 2.0, 0.5, 0.0).unwrap();
    let mut dir = vec![0.0; spec.len()];
    dir[0] = 1.0;
    let settings = DemoSettings {
        trials: 20,
        seed: 3,
        ..Default::default()
    };
    let rec = benign_demo(&spec, &dir, 40.0, 200, 0.0, &settings).unwrap();
    let got: f64 = column(&header, &rows, "alpha_hat")[0].parse().unwrap();
    assert_eq!(got, rec.alpha_hat().unwrap());
    let met: f64 = column(&header, &rows, "scale_condition_met")[0].parse().unwrap();
    assert_eq!(met, rec.extra("scale_condition_met").unwrap());
}
