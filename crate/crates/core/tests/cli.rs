use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use zsadapt::eval::{offset_records, synth_generate, SynthSpec};
use zsadapt::{build_projection, read_dataset, write_dataset, StreamRecord};

fn zsadapt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zsadapt")).args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = zsadapt(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth_file(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut args = vec!["synth", "--out", s(&path)];
    args.extend_from_slice(extra);
    let out = zsadapt(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn synth_then_run_full() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "d.baft", &["--classes", "20", "--dim", "64", "--n", "2000", "--seed", "7"]);
    let report = ok_json(&["run", s(&data), "--mode", "full"]);
    assert_eq!(report["n_examples"], 2000);
    assert_eq!(report["n_labeled"], 2000);
    assert_eq!(report["warmup_boundary"], 200);
    assert_eq!(report["config"]["mode"], "full");
    assert!(report["top1_accuracy"].as_f64().unwrap() > 0.9);
    assert!(report["duration_ms"].is_u64());
    assert_eq!(report["class_counts"].as_array().unwrap().len(), 20);
}

#[test]
fn single_view_text_mode_is_the_zero_shot_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "d.baft", &["--classes", "6", "--dim", "24", "--n", "300", "--seed", "3"]);
    let preds = dir.path().join("p.jsonl");
    let out = zsadapt(&[
        "run",
        s(&data),
        "--mode",
        "te",
        "--views",
        "1",
        "--warmup-mult",
        "0",
        "--predictions",
        s(&preds),
    ]);
    assert!(out.status.success());

    let (model, reader) = read_dataset(&data).unwrap();
    let text: Vec<Vec<f64>> = model
        .text_embeddings()
        .iter()
        .map(|t| {
            let n = t.norm();
            t.as_slice().iter().map(|x| x / n).collect()
        })
        .collect();
    let lines = std::fs::read_to_string(&preds).unwrap();
    let mut count = 0;
    for (line, record) in lines.lines().zip(reader) {
        let record = record.unwrap();
        let v = record.views[0].as_slice();
        let cos: Vec<f64> = text.iter().map(|t| t.iter().zip(v).map(|(a, b)| a * b).sum()).collect();
        let mut best = 0;
        for (j, c) in cos.iter().enumerate() {
            if *c > cos[best] {
                best = j;
            }
        }
        let line: Value = serde_json::from_str(line).unwrap();
        assert_eq!(line["predicted_class"], best as u64, "example {}", record.example_id);
        count += 1;
    }
    assert_eq!(count, 300);
}

#[test]
fn predictions_jsonl_has_one_line_per_example() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "d.baft", &["--classes", "4", "--dim", "12", "--n", "150", "--views", "3"]);
    let preds = dir.path().join("p.jsonl");
    let report = dir.path().join("r.json");
    let out = zsadapt(&["run", s(&data), "--predictions", s(&preds), "--report", s(&report)]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let text = std::fs::read_to_string(&preds).unwrap();
    assert_eq!(text.lines().count() as u64, report["n_examples"].as_u64().unwrap());
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["example_id"], 0);
    let top = first["fused_probs_top5"].as_array().unwrap();
    assert_eq!(top.len(), 4);
    assert_eq!(top[0]["class"], first["predicted_class"]);
}

#[test]
fn shuffle_seed_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "d.baft", &["--classes", "5", "--dim", "16", "--n", "400", "--views", "2"]);
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("duration_ms");
        v
    };
    let a = strip(ok_json(&["run", s(&data), "--shuffle-seed", "9"]));
    let b = strip(ok_json(&["run", s(&data), "--shuffle-seed", "9"]));
    assert_eq!(a, b);
    let plain1 = strip(ok_json(&["run", s(&data)]));
    let plain2 = strip(ok_json(&["run", s(&data)]));
    assert_eq!(plain1, plain2);
    assert_eq!(a["n_examples"], plain1["n_examples"]);

    // Omitting the seed keeps file order: JSONL ids are 0, 1, 2, ...
    let preds = dir.path().join("p.jsonl");
    assert!(zsadapt(&["run", s(&data), "--predictions", s(&preds)]).status.success());
    let ids: Vec<u64> = std::fs::read_to_string(&preds)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["example_id"].as_u64().unwrap())
        .collect();
    assert_eq!(ids, (0..400).collect::<Vec<_>>());
}

#[test]
fn knn_projected_accuracy_ignores_e1_offset() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_generate(&SynthSpec {
        n_examples: 500,
        views: 1,
        seed: 4,
        ..SynthSpec::default()
    })
    .unwrap();
    let e1 = build_projection(&data.class_model, 150).unwrap().principal_axis().clone();
    let shifted: Vec<StreamRecord> = offset_records(&data.records, &e1, 3.0).unwrap();
    let clean_path = dir.path().join("clean.baft");
    let offset_path = dir.path().join("offset.baft");
    write_dataset(&clean_path, &data.class_model, &data.records).unwrap();
    write_dataset(&offset_path, &data.class_model, &shifted).unwrap();

    let clean = ok_json(&["knn", s(&clean_path), "--k", "5", "--projected", "true"]);
    let offset = ok_json(&["knn", s(&offset_path), "--k", "5", "--projected", "true"]);
    assert_eq!(clean["accuracy"], offset["accuracy"]);
    assert_eq!(offset["n"], 500);
    assert_eq!(offset["projected"], true);
    let raw = ok_json(&["knn", s(&offset_path), "--k", "5", "--projected", "false"]);
    assert_eq!(raw["projected"], false);
}

#[test]
fn sweep_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "d.baft", &["--classes", "4", "--dim", "12", "--n", "200", "--views", "2"]);
    let grid = dir.path().join("grid.json");
    std::fs::write(&grid, r#"{"beta": [10, 5, 4, 3, 2, 1, 0.5, 0.1]}"#).unwrap();
    let out = zsadapt(&["sweep", s(&data), "--grid", s(&grid)]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "beta,accuracy");
    assert_eq!(lines.len(), 9);
    assert!(lines[1].starts_with("10,"));
    assert!(lines[8].starts_with("0.1,"));

    let csv_path = dir.path().join("t.csv");
    let json_path = dir.path().join("t.json");
    let out = zsadapt(&["sweep", s(&data), "--grid", s(&grid), "--csv", s(&csv_path), "--json", s(&json_path)]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&csv_path).unwrap(), csv);
    let rows: Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 8);
}

#[test]
fn inspect_summarizes_header() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "d.baft", &["--classes", "3", "--dim", "8", "--n", "10", "--views", "2"]);
    let info = ok_json(&["inspect", s(&data)]);
    assert_eq!(info["classes"], 3);
    assert_eq!(info["dim"], 8);
    assert_eq!(info["views"], 2);
    assert_eq!(info["records"], 10);
    assert_eq!(info["labeled"], 10);
    assert!((info["view_norms"]["mean"].as_f64().unwrap() - 1.0).abs() < 1e-5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "d.baft", &["--classes", "3", "--dim", "8", "--n", "10"]);

    // Usage errors name the flag.
    let out = zsadapt(&["run", s(&data), "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--alpha"));
    let out = zsadapt(&["run", s(&data), "--mode", "bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--mode"));
    assert_eq!(zsadapt(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(zsadapt(&["knn", s(&data), "--k", "50"]).status.code(), Some(1));
    assert_eq!(zsadapt(&["synth", "--rotation", "95", "--out", s(&dir.path().join("x"))]).status.code(), Some(1));

    // Data errors.
    assert_eq!(zsadapt(&["run", s(&dir.path().join("missing.baft"))]).status.code(), Some(2));
    let junk = dir.path().join("junk.baft");
    std::fs::write(&junk, b"JUNKJUNKJUNKJUNKJUNKJUNKJUNKJUNK").unwrap();
    let out = zsadapt(&["run", s(&junk)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("magic"));
    let bytes = std::fs::read(&data).unwrap();
    let cut = dir.path().join("cut.baft");
    std::fs::write(&cut, &bytes[..bytes.len() - 7]).unwrap();
    assert_eq!(zsadapt(&["run", s(&cut)]).status.code(), Some(2));

    assert_eq!(zsadapt(&["--help"]).status.code(), Some(0));
}
