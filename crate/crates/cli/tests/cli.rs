use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_enet-oracle"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn run_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--replications", "3", "--parallel", "2", "--config"])
        .arg(config("theorem1.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["records"], 3);
    assert_eq!(summary["violations"], 0);
    assert!(dir.path().join("summary.json").exists());

    let again = bin().arg("summarize").arg(dir.path().join("records.jsonl")).output().unwrap();
    assert!(again.status.success());
    let s2: serde_json::Value = serde_json::from_slice(&again.stdout).unwrap();
    assert_eq!(s2, summary);
}

#[test]
fn rate_emits_csv_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["rate", "--replications", "2", "--format", "csv", "--config"])
        .arg(config("series-rate.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("n,s_star,mse,mse_se"));
    assert!(dir.path().join("rate.csv").exists());
}

#[test]
fn rate_rejects_other_studies_and_bad_paths() {
    let out = bin().args(["rate", "--config"]).arg(config("theorem1.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["run", "--config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn aborting_study_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("theorem1.toml")).unwrap().replace("ell1_radius = 10.0", "ell1_radius = 2.0");
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = bin().args(["run", "--replications", "3", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fit_on_csv_sample() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sample.csv");
    let mut rows = String::from("x1,x2,y\n");
    for i in 0..50 {
        let a = (i as f64 * 0.37).sin();
        let b = (i as f64 * 0.91).cos();
        rows.push_str(&format!("{a},{b},{}\n", 2.0 * a - b));
    }
    std::fs::write(&path, rows).unwrap();
    let out = bin()
        .args(["fit", "--header", "--lambda1", "0.01", "--data"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(fit["converged"], true);
    assert_eq!(fit["support"], serde_json::json!([0, 1]));
}
