use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oac-kmeans"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    fs::write(
        &path,
        r#"{
  "scenario": { "rows": 3, "cols": 3, "gmm_count": 400, "uniform_count": 20, "seed": 4 },
  "algorithm": { "rounds": 15 },
  "variants": [
    { "beta": 5, "digits": 2, "channel": "awgn", "snr_db": 20.0, "s_min": 5 }
  ],
  "master_seed": 3,
  "repetitions": 2
}"#,
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

fn csv_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn single_variant_writes_curves_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = run(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    for f in [
        "points.csv",
        "baseline.csv",
        "baseline_centroids.csv",
        "rounds_awgn_snr20_b5_d2_smin5.csv",
        "centroids_awgn_snr20_b5_d2_smin5.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let rows = csv_rows(&out.join("rounds_awgn_snr20_b5_d2_smin5.csv"));
    assert_eq!(rows[0], "variant,repetition,round,loss,v_max,reinit_count,aggregation_error");
    assert_eq!(rows.len(), 1 + 2 * 16);
    assert_eq!(csv_rows(&out.join("baseline.csv")).len(), 1 + 16);
    assert_eq!(csv_rows(&out.join("centroids_awgn_snr20_b5_d2_smin5.csv")).len(), 1 + 2 * 9);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let v = &manifest["variants"][0];
    assert_eq!(v["xi"], 12);
    assert_eq!(v["noise_variance"].as_f64().unwrap(), 10f64.powf(-2.0));
    assert_eq!(v["symbol_energy"].as_f64().unwrap(), 5f64.sqrt());
    assert_eq!(v["resources"]["oac"], 2 * 9 * 5 * 2);
    assert_eq!(manifest["spec"]["master_seed"], 3);
    assert_eq!(manifest["repetition_seeds"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["num_points"], 420);
}

#[test]
fn zero_rounds_writes_only_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = run(&["--config", &cfg, "--rounds", "0", "--reps", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let rows = csv_rows(&out.join("rounds_awgn_snr20_b5_d2_smin5.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("awgn_snr20_b5_d2_smin5,0,0,"));
    assert_eq!(csv_rows(&out.join("baseline.csv")).len(), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["--config", &cfg, "--channel", "selective,flat", "--snr-db", "10", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 8);
    for n in names.iter().filter(|n| n.to_string_lossy().ends_with(".csv")) {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n:?}");
    }
}

#[test]
fn flags_expand_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = run(&["--config", &cfg, "--digits", "1,2", "--smin", "0,5", "--print-config"]);
    assert!(o.status.success());
    let spec: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(spec["variants"].as_array().unwrap().len(), 4);

    let o = run(&["--print-config"]);
    let spec: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(spec["variants"].as_array().unwrap().len(), 48);
    assert_eq!(spec["algorithm"]["rounds"], 1000);
    assert_eq!(spec["algorithm"]["learning_rate"], 0.1);

    let o = run(&["--beta", "5", "--digits", "2", "--channel", "awgn", "--snr-db", "20", "--smin", "5", "--print-config"]);
    let spec: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(spec["variants"].as_array().unwrap().len(), 1);

    let o = run(&["--perfect-aggregation", "--mu", "1", "--print-config"]);
    let spec: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(spec["variants"].as_array().unwrap().len(), 2);
    assert_eq!(spec["algorithm"]["learning_rate"], 1.0);
}

#[test]
fn baseline_only_skips_federated_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = run(&["--config", &cfg, "--baseline-only", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(out.join("baseline.csv").exists());
    assert!(!out.join("rounds_awgn_snr20_b5_d2_smin5.csv").exists());
}

#[test]
fn resource_report_matches_mall_numbers() {
    let o = run(&["resources"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("oac_resources 2000"));
    assert!(text.contains("non_oac_resources 32000"));

    let o = run(&["resources", "--eds", "1"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("oac_resources 2000"));
    assert!(text.contains("non_oac_resources 320"));

    assert!(!run(&["resources", "--r-bits", "0"]).status.success());
}

#[test]
fn export_scenario_writes_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let path = dir.path().join("pts.csv");
    let o = run(&["export-scenario", "--config", &cfg, "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let rows = csv_rows(&path);
    assert_eq!(rows[0], "x,y,ed_index");
    assert_eq!(rows.len(), 421);
}

#[test]
fn bad_input_exits_nonzero() {
    assert!(!run(&["--beta", "4", "--print-config"]).status.success());
    assert!(!run(&["--reps", "0", "--print-config"]).status.success());
    assert!(!run(&["--channel", "rayleigh"]).status.success());
    assert!(!run(&["--config", "/nonexistent/spec.json"]).status.success());

    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(&["--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert!(!o.status.success());
}
