mod common;

use std::path::Path;
use std::process::{Command, Output};

use chorale::ingest::parse_musicxml;
use chorale::models::ModelSet;
use chorale::score::{validate, Voice};
use common::minicorpus_dir;
use serde_json::Value;

fn chorale(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chorale")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Value {
    let out = chorale(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(stdout.lines().last().unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_train_sample_reharmonize() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let model = dir.path().join("model.chm");
    let summary = ok(&["ingest", "--in", s(&minicorpus_dir()), "--out", s(&corpus), "--seed", "1"]);
    assert_eq!(summary["stats"]["sources"], 24);
    assert_eq!(summary["rejected"], 0);

    let summary = ok(&["train", "--corpus", s(&corpus), "--model", "maxent", "--out", s(&model), "--epochs", "2", "--delta-t", "4"]);
    assert!(dir.path().join("model.report.json").exists());
    let uniform = summary["uniform_cross_entropy"].as_array().unwrap();
    let validation = summary["validation_cross_entropy"].as_array().unwrap();
    for (u, v) in uniform.iter().zip(validation) {
        assert!(v.as_f64().unwrap() < u.as_f64().unwrap());
    }
    let models = ModelSet::load(&std::fs::read(&model).unwrap()).unwrap();

    let sample = dir.path().join("out/sample.musicxml");
    let summary = ok(&["sample", "--model", s(&model), "--length", "64", "--out", s(&sample), "--seed", "9", "--fermata-every", "2"]);
    assert_eq!(summary["stats"]["updates"], 100 * 256);
    let generated = parse_musicxml(&std::fs::read(&sample).unwrap()).unwrap();
    assert_eq!(generated.len(), 64);
    assert!(validate(&generated).is_empty());
    assert!(models.vocabs.violations(&generated).is_empty());
    assert!(generated.metadata.fermata[31] && !generated.metadata.fermata[16]);
    let midi = std::fs::read(dir.path().join("out/sample.mid")).unwrap();
    assert_eq!(&midi[..4], b"MThd");

    let again = dir.path().join("again.musicxml");
    ok(&["sample", "--model", s(&model), "--length", "64", "--out", s(&again), "--seed", "9", "--fermata-every", "2"]);
    assert_eq!(std::fs::read(&sample).unwrap(), std::fs::read(&again).unwrap());

    let melody = minicorpus_dir().join("exercise_05.musicxml");
    let harmonized = dir.path().join("harmonized.musicxml");
    ok(&["reharmonize", "--model", s(&model), "--melody", s(&melody), "--out", s(&harmonized), "--iterations", "5000"]);
    let original = parse_musicxml(&std::fs::read(&melody).unwrap()).unwrap();
    let result = parse_musicxml(&std::fs::read(&harmonized).unwrap()).unwrap();
    assert_eq!(result.voice(Voice::Soprano), original.voice(Voice::Soprano));
    assert!(validate(&result).is_empty());
}

#[test]
fn diagnose_fast_suites_pass() {
    for suite in ["gibbs", "kolmogorov", "representation", "blocks"] {
        let out = chorale(&["diagnose", "--suite", suite]);
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(out.status.success(), "{suite}: {stdout}");
        assert!(stdout.lines().count() > 0);
        for line in stdout.lines() {
            assert!(line.starts_with("check=") && !line.contains("verdict=fail"), "{line}");
        }
    }
}

#[test]
fn failures_are_json_records() {
    let out = chorale(&["sample", "--model", "/nonexistent.chm", "--length", "16", "--out", "/tmp/x.musicxml"]);
    assert_eq!(out.status.code(), Some(1));
    let record: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "io");

    let out = chorale(&["train", "--corpus", "x", "--model", "lstm", "--out", "y"]);
    assert_eq!(out.status.code(), Some(2));
    let record: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "usage");

    let out = chorale(&["diagnose", "--suite", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}
