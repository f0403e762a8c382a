use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BASELINES_ONLY: &str = r#"
seed = 7
runs = 2
algorithms = ["PC", "LiNGAM"]

[[datasets]]
kind = "synthetic"
id = "S4"
nodes = 4
edge_prob = 0.4
n_samples = 200

[[datasets]]
kind = "synthetic"
id = "S6"
nodes = 6
edge_prob = 0.3
n_samples = 200
"#;

fn cdbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdbench")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("campaign.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn all_then_report_on_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), BASELINES_ONLY);
    let out = dir.path().join("out");
    let out_s = out.display().to_string();
    let run = cdbench(&["all", "-c", &config, "--out", &out_s, "--jobs", "1"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("Random Baseline"), "{stdout}");
    assert!(out.join("evaluation.json").exists());
    assert!(out.join("plots/coverage_by_model.svg").exists());

    let report = cdbench(&["report", "-c", &config, "--out", &out_s]);
    assert!(report.status.success());
}

#[test]
fn missing_predictions_exit_with_gap_list() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASELINES_ONLY}\n[[models]]\nid = \"m\"\nbase_url = \"http://127.0.0.1:9/v1\"\nmodel = \"m\"\n");
    let config = write_config(dir.path(), &text);
    let out_s = dir.path().join("out").display().to_string();
    for phase in ["generate", "ground-truth"] {
        let r = cdbench(&[phase, "-c", &config, "--out", &out_s]);
        assert!(r.status.success(), "{phase}: {}", String::from_utf8_lossy(&r.stderr));
    }
    let eval = cdbench(&["evaluate", "-c", &config, "--out", &out_s]);
    assert!(!eval.status.success());
    let stderr = String::from_utf8_lossy(&eval.stderr);
    assert!(stderr.contains("missing:"), "{stderr}");
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "seed = \"not a number\"\n");
    let r = cdbench(&["generate", "-c", &config]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("error"));
}
