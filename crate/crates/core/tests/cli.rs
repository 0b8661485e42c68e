use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn readseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_readseq")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, participants: &str) {
    let out = readseq(&["synth", "--out", path(dir), "--seed", "3", "--participants", participants]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_input_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csv");
    let out = readseq(&["align", "--fixations", path(&missing), "--layout", path(&missing), "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_input_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    synth(&tmp.path().join("data"), "1");
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "participant_id,page_id,t_start_ms\np,q,1\n").unwrap();
    let layout = tmp.path().join("data/layout.json");
    let out = readseq(&["align", "--fixations", path(&bad), "--layout", path(&layout), "--out", path(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn degenerate_scores_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "4");
    let feat = tmp.path().join("feat");
    let out = readseq(&[
        "features",
        "--fixations",
        path(&data.join("fixations.csv")),
        "--layout",
        path(&data.join("layout.json")),
        "--out",
        path(&feat),
    ]);
    assert!(out.status.success());
    let scores = tmp.path().join("flat.csv");
    let mut text = String::from("participant_id,mcq_pre,mcq_post,essay_pre,essay_post\n");
    for i in 0..4 {
        text.push_str(&format!("s{i:03},5,5,5,5\n"));
    }
    fs::write(&scores, text).unwrap();
    let out = readseq(&[
        "compare",
        "--features",
        path(&feat.join("features.csv")),
        "--scores",
        path(&scores),
        "--out",
        path(&tmp.path().join("cmp")),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn manifest_records_radii_and_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "1");
    let out_dir = tmp.path().join("aligned");
    let out = readseq(&[
        "align",
        "--fixations",
        path(&data.join("fixations.csv")),
        "--layout",
        path(&data.join("layout.json")),
        "--out",
        path(&out_dir),
    ]);
    assert!(out.status.success());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["r_foveal_px_rounded"], 41.0);
    assert_eq!(manifest["r_parafoveal_px_rounded"], 185.0);
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    assert!(inputs.iter().all(|i| i["sha256"].as_str().is_some_and(|h| h.len() == 64)));
    assert!(out_dir.join("aligned.csv").exists());
    assert!(out_dir.join("sequences.csv").exists());
}

#[test]
fn geometry_flag_changes_radii() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "1");
    let out_dir = tmp.path().join("aligned");
    let out = readseq(&[
        "align",
        "--geometry",
        "distance=32.5",
        "--fixations",
        path(&data.join("fixations.csv")),
        "--layout",
        path(&data.join("layout.json")),
        "--out",
        path(&out_dir),
    ]);
    assert!(out.status.success());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["r_foveal_px_rounded"], 21.0);
}

#[test]
fn identical_feature_rows_are_never_significant() {
    let tmp = tempfile::tempdir().unwrap();
    let mut features = String::from("participant_id");
    for name in readseq::features::SessionFeatures::NAMES {
        features.push(',');
        features.push_str(name);
    }
    features.push('\n');
    let mut scores = String::from("participant_id,mcq_pre,mcq_post,essay_pre,essay_post\n");
    for i in 0..10 {
        features.push_str(&format!("p{i}{}\n", ",1.5".repeat(16)));
        scores.push_str(&format!("p{i},{},{},{},{}\n", i, (i * i) % 7, 10 - i, i % 3));
    }
    fs::write(tmp.path().join("features.csv"), features).unwrap();
    fs::write(tmp.path().join("scores.csv"), scores).unwrap();
    let out_dir = tmp.path().join("cmp");
    let out = readseq(&[
        "compare",
        "--features",
        path(&tmp.path().join("features.csv")),
        "--scores",
        path(&tmp.path().join("scores.csv")),
        "--out",
        path(&out_dir),
        "--summary-table",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(out_dir.join("comparison.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let tier = headers.iter().position(|h| h == "tier").unwrap();
    let mut rows = 0;
    for record in reader.records() {
        assert_eq!(&record.unwrap()[tier], "ns");
        rows += 1;
    }
    assert!(rows >= 16);
    assert!(out_dir.join("summary.txt").exists());
    assert!(out_dir.join("groups.txt").exists());
}

#[test]
fn pipeline_recovers_synthetic_regressions() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3");
    let out_dir = tmp.path().join("run");
    let out = readseq(&[
        "pipeline",
        "--fixations",
        path(&data.join("fixations.csv")),
        "--layout",
        path(&data.join("layout.json")),
        "--scores",
        path(&data.join("scores.csv")),
        "--out",
        path(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth = fs::read_to_string(data.join("truth.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(truth.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let reg = headers.iter().position(|h| h == "regression").unwrap();
    let expected = reader.records().filter(|r| &r.as_ref().unwrap()[reg] == "true").count();

    let mut reader = csv::Reader::from_path(out_dir.join("features.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let n_reg = headers.iter().position(|h| h == "n_Reg").unwrap();
    let found: f64 = reader.records().map(|r| r.unwrap()[n_reg].parse::<f64>().unwrap()).sum();
    assert_eq!(found as usize, expected);
}
