use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn fsmix(run: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsmix"))
        .arg("--run-dir")
        .arg(run)
        .args(args)
        .output()
        .unwrap()
}

fn ok(run: &Path, args: &[&str]) -> String {
    let out = fsmix(run, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_line(out: &Output) -> String {
    let err = String::from_utf8_lossy(&out.stderr);
    err.lines().last().unwrap_or_default().to_string()
}

#[test]
fn help_exits_zero_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let subcommands = [
        "prep-sources", "gen-sed", "extract-clips", "featurize", "train-base", "train-dfsl", "eval", "report",
        "synth-world",
    ];
    assert_eq!(fsmix(dir.path(), &["--help"]).status.code(), Some(0));
    for sub in subcommands {
        let out = fsmix(dir.path(), &[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("FSMIX_"), "{sub} help lists env vars");
    }
}

#[test]
fn usage_errors_exit_2_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = fsmix(dir.path(), &["gen-sed", "--split", "nowhere", "--n", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out).starts_with("error kind=usage msg=\""));
    assert_eq!(fsmix(dir.path(), &["no-such-command"]).status.code(), Some(2));
}

#[test]
fn missing_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = fsmix(dir.path(), &["train-base", "--train", "absent.emb", "--val", "absent.emb"]);
    assert_eq!(out.status.code(), Some(3));
    let line = error_line(&out);
    assert!(line.starts_with("error kind=missing_input msg="), "{line}");
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);
}

#[test]
fn validation_and_bad_data_codes() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path();
    let out = fsmix(run, &["prep-sources", "--synthetic", "--base-ratio", "5:1"]);
    assert_eq!(out.status.code(), Some(4), "{}", error_line(&out));
    assert!(error_line(&out).starts_with("error kind=validation"));

    let junk = run.join("junk.emb");
    fs::write(&junk, b"not a store\n").unwrap();
    let j = junk.to_string_lossy();
    let out = fsmix(run, &["train-base", "--train", &j, "--val", &j]);
    assert_eq!(out.status.code(), Some(5), "{}", error_line(&out));
    assert!(error_line(&out).starts_with("error kind=bad_data"));
}

#[test]
fn environment_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_fsmix"))
        .args(["synth-world", "--size", "0.1"])
        .env("FSMIX_RUN_DIR", &run)
        .env("FSMIX_SEED", "5")
        .env("FSMIX_DIM", "16")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let world: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("features/world.json")).unwrap()).unwrap();
    let text = world.to_string();
    assert!(text.contains("\"seed\":5"), "{text}");
    assert!(text.contains("\"dim\":16"), "{text}");
}

#[test]
fn world_pipeline_writes_manifest_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let go = |run: &Path| {
        let p = |rel: &str| run.join(rel).to_string_lossy().into_owned();
        ok(run, &["synth-world", "--seed", "3", "--size", "0.3", "--dim", "32", "--n-base", "10"]);
        ok(run, &["train-base", "--train", &p("features/base-train.emb"), "--val", &p("features/base-val.emb")]);
        ok(run, &["train-dfsl", "--train", &p("features/base-train.emb"), "--iters", "50", "--n", "2"]);
        ok(run, &["--jobs", "1", "eval", "--method", "dfsl", "--iters", "3", "--n", "2"]);
        ok(run, &["eval", "--method", "lr", "--iters", "3", "--n", "2", "--lr-negatives", "100"]);
        ok(run, &["report"]);
    };
    go(&run);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("artifacts.json")).unwrap()).unwrap();
    let entries = manifest.as_object().unwrap();
    for stage in ["synth-world", "train-base", "train-dfsl", "eval", "report"] {
        assert!(entries.values().any(|e| e["stage"] == stage), "no {stage} artifact");
    }
    for (rel, e) in entries {
        let bytes = fs::read(run.join(rel)).unwrap();
        assert_eq!(e["bytes"].as_u64(), Some(bytes.len() as u64), "{rel}");
        let hex: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(e["sha256"].as_str(), Some(hex.as_str()), "{rel}");
    }

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("eval/dfsl_n2_mono_mixed/report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["seed"], 0);
    assert!(report["config"].is_object());

    let first = fs::read(run.join("artifacts.json")).unwrap();
    fs::remove_dir_all(&run).unwrap();
    go(&run);
    assert_eq!(fs::read(run.join("artifacts.json")).unwrap(), first);
}
