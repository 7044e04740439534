//! End-to-end tests of the `lsdefect` binary: exit codes, output files, and
//! run-to-run determinism.

use std::path::Path;
use std::process::{Command, Output};

fn lsdefect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsdefect"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn gen_smoke(dir: &Path, seed: u64) {
    let out = lsdefect(&[
        "gen",
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        &seed.to_string(),
        "--count-per-class",
        "2",
    ]);
    assert_ok(&out);
}

#[test]
fn gen_writes_smoke_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen_smoke(&data, 9);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("manifest.json")).unwrap())
            .unwrap();
    let entries = manifest["entries"].as_array().unwrap();
    // 2 per class x 6 classes x 3 splits.
    assert_eq!(entries.len(), 36);
    assert_eq!(manifest["seed"], 9);
    assert!(manifest["config_hash"].as_str().unwrap().len() == 16);
    let first = &entries[0];
    assert!(data.join(first["file"].as_str().unwrap()).exists());
    assert!(data
        .join("annotations")
        .join(format!("{}.json", first["id"].as_str().unwrap()))
        .exists());
}

#[test]
fn gen_default_plan_is_600_images() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = lsdefect(&["gen", "--out", data.to_str().unwrap(), "--seed", "1"]);
    assert_ok(&out);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("manifest.json")).unwrap())
            .unwrap();
    let entries = manifest["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 600);
    for (split, want) in [("train", 480), ("val", 60), ("test", 60)] {
        let n = entries.iter().filter(|e| e["split"] == split).count();
        assert_eq!(n, want, "{split}");
    }
}

#[test]
fn detect_eval_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen_smoke(&data, 21);

    let pred = dir.path().join("pred.jsonl");
    let out = lsdefect(&[
        "detect",
        "--data",
        data.to_str().unwrap(),
        "--split",
        "test",
        "--out",
        pred.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let lines = std::fs::read_to_string(&pred).unwrap();
    // Noise-free corpus: one prediction per ground-truth instance.
    assert_eq!(lines.lines().count(), 12);

    let eval_dir = dir.path().join("eval");
    let out = lsdefect(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--pred",
        pred.to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let table = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(table.contains("mAP"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("eval.json")).unwrap())
            .unwrap();
    assert_eq!(summary["map_bbox"], 1.0);
    assert_eq!(summary["map_segmentation"], 1.0);
    assert!(eval_dir.join("eval.txt").exists());

    let report_dir = dir.path().join("report");
    let out = lsdefect(&[
        "report",
        "--data",
        data.to_str().unwrap(),
        "--pred",
        pred.to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let csv = std::fs::read_to_string(report_dir.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13); // header + 12 instances
    assert!(report_dir.join("stats.json").exists());
    // One directory per class, since the smoke corpus covers all six.
    for class in [
        "thin_bridge",
        "single_bridge",
        "line_collapse",
        "line_break",
        "multi_bridge_h",
        "multi_bridge_nh",
    ] {
        assert!(report_dir.join(class).is_dir(), "{class}");
    }
}

#[test]
fn report_from_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen_smoke(&data, 33);
    let report_dir = dir.path().join("report");
    let out = lsdefect(&[
        "report",
        "--data",
        data.to_str().unwrap(),
        "--source",
        "gt",
        "--out",
        report_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let csv = std::fs::read_to_string(report_dir.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn huge_min_area_empties_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen_smoke(&data, 40);
    let pred = dir.path().join("pred.jsonl");
    let out = lsdefect(&[
        "detect",
        "--data",
        data.to_str().unwrap(),
        "--out",
        pred.to_str().unwrap(),
        "--min-area",
        "1000000",
    ]);
    assert_ok(&out);
    assert_eq!(std::fs::read_to_string(&pred).unwrap(), "");
}

#[test]
fn clean_only_corpus_detects_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = lsdefect(&[
        "gen",
        "--out",
        data.to_str().unwrap(),
        "--seed",
        "70",
        "--count-per-class",
        "0",
        "--clean-per-split",
        "2",
    ]);
    assert_ok(&out);
    let pred = dir.path().join("pred.jsonl");
    let out = lsdefect(&[
        "detect",
        "--data",
        data.to_str().unwrap(),
        "--out",
        pred.to_str().unwrap(),
    ]);
    assert_ok(&out);
    assert_eq!(std::fs::read_to_string(&pred).unwrap(), "");

    // Reporting from an empty prediction file yields a header-only CSV.
    let report_dir = dir.path().join("report");
    let out = lsdefect(&[
        "report",
        "--data",
        data.to_str().unwrap(),
        "--pred",
        pred.to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let csv = std::fs::read_to_string(report_dir.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn errors_are_single_line_with_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Missing dataset directory.
    let out = lsdefect(&[
        "detect",
        "--data",
        dir.path().join("nope").to_str().unwrap(),
        "--out",
        dir.path().join("p.jsonl").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error[E_IO]"), "stderr: {stderr}");
    assert_eq!(stderr.trim_end().lines().count(), 1);

    // Missing prediction file.
    let data = dir.path().join("data");
    gen_smoke(&data, 50);
    let out = lsdefect(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--pred",
        dir.path().join("missing.jsonl").to_str().unwrap(),
        "--out",
        dir.path().join("eval").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[E_IO]"));

    // Bad config file.
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{oops").unwrap();
    let out = lsdefect(&[
        "gen",
        "--out",
        dir.path().join("x").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[E_CONFIG]"));
}

#[test]
fn full_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"scene": {"seed": 7, "noise_sigma": 5.0, "edge_roughness_amp": 1.0}}"#,
    )
    .unwrap();
    for run in ["a", "b"] {
        let out = lsdefect(&[
            "all",
            "--out",
            dir.path().join(run).to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "--count-per-class",
            "2",
        ]);
        assert_ok(&out);
    }
    for file in ["report/report.csv", "eval/eval.json", "predictions.jsonl"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
}

#[test]
fn jobs_flag_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen_smoke(&data, 60);
    let p1 = dir.path().join("p1.jsonl");
    let p4 = dir.path().join("p4.jsonl");
    for (pred, jobs) in [(&p1, "1"), (&p4, "4")] {
        let out = lsdefect(&[
            "detect",
            "--data",
            data.to_str().unwrap(),
            "--out",
            pred.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert_ok(&out);
    }
    assert_eq!(
        std::fs::read(&p1).unwrap(),
        std::fs::read(&p4).unwrap(),
        "parallel detection must match single-threaded output"
    );
}
