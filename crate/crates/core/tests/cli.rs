//! End-to-end runs of the `cabin-ews` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cabin_ews::seq2seq::load_checkpoint;
use cabin_ews::telemetry::{read_csv, write_frames};

const BIN: &str = env!("CARGO_BIN_EXE_cabin-ews");

/// Small network and few epochs so each training call stays under a second.
const CONFIG: &str = r#"{
  "preprocess": { "lookback_s": 300, "horizon_s": 60, "window_stride_s": 60 },
  "architecture": { "enc_hidden": 6, "dec_hidden": 6, "head_hidden": 4 },
  "train": { "epochs": 3, "batch_size": 16 }
}"#;

struct Work {
    dir: tempfile::TempDir,
}

impl Work {
    fn new() -> Self {
        let w = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        std::fs::write(w.path("config.json"), CONFIG).unwrap();
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        let config = self.path("config.json");
        Command::new(BIN)
            .current_dir(self.dir.path())
            .arg("--config")
            .arg(&config)
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed:\n{}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    }

    fn read(&self, name: &str) -> Vec<u8> {
        std::fs::read(self.path(name)).unwrap()
    }
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn same_dir(a: &Path, b: &Path) {
    let mut names: Vec<_> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        assert!(
            std::fs::read(a.join(&n)).unwrap() == std::fs::read(b.join(&n)).unwrap(),
            "{n:?} differs"
        );
    }
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["gen", "prep", "train", "eval", "predict", "monitor", "retrain"] {
        let out = Command::new(BIN).args([sub, "--help"]).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
    let out = Command::new(BIN).arg("bogus").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn day_of_frames_is_reproducible() {
    let w = Work::new();
    w.ok(&["--seed", "3", "gen", "--hours", "24", "--out", "a.csv"]);
    w.ok(&["--seed", "3", "gen", "--hours", "24", "--out", "b.csv"]);
    let a = w.read("a.csv");
    assert!(a == w.read("b.csv"));
    assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 86_401);
}

#[test]
fn pipeline_artifacts_are_byte_identical() {
    let w = Work::new();
    w.ok(&["--seed", "5", "gen", "--hours", "2", "--out", "t.csv"]);
    for ds in ["ds1", "ds2"] {
        w.ok(&["--seed", "5", "prep", "--input", "t.csv", "--out", ds]);
    }
    same_dir(&w.path("ds1"), &w.path("ds2"));
    for m in ["m1.ckpt", "m2.ckpt"] {
        w.ok(&["--seed", "5", "train", "--dataset", "ds1", "--out", m]);
    }
    assert!(w.read("m1.ckpt") == w.read("m2.ckpt"));
    assert!(w.read("m1.loss.csv") == w.read("m2.loss.csv"));
    assert_eq!(String::from_utf8(w.read("m1.loss.csv")).unwrap().lines().count(), 4);

    // baseline next to the Bi-GRU, listed first so column assignment is by encoder type
    w.ok(&[
        "--seed",
        "5",
        "train",
        "--dataset",
        "ds1",
        "--out",
        "uni.ckpt",
        "--bidirectional",
        "false",
    ]);
    w.ok(&[
        "eval",
        "--checkpoint",
        "uni.ckpt",
        "--checkpoint",
        "m1.ckpt",
        "--dataset",
        "ds1",
        "--out",
        "ev",
    ]);
    let cmp = String::from_utf8(w.read("ev/comparison.csv")).unwrap();
    let lines: Vec<&str> = cmp.lines().collect();
    assert_eq!(lines[0], "seed,rmse_gru,rmse_bigru");
    assert!(lines.iter().all(|l| l.split(',').count() == 3));
    let scores: serde_json::Value = serde_json::from_slice(&w.read("ev/rmse.json")).unwrap();
    let bi = &scores[1];
    assert_eq!(bi["bidirectional"], true);
    let bi_test = bi["splits"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["split"] == "test")
        .unwrap();
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(
        row[2].parse::<f64>().unwrap(),
        bi_test["overall_normalized"].as_f64().unwrap()
    );
    assert!(w.path("ev/predictions.csv").exists() && w.path("ev/predictions_2.csv").exists());

    let out = w.ok(&["predict", "--checkpoint", "m1.ckpt", "--input", "t.csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("timestamp_s,channel,predicted"));
    let targets = load_checkpoint(w.path("m1.ckpt")).unwrap().targets.len();
    assert_eq!(text.lines().count(), 1 + 60 * targets);
}

#[test]
fn mismatched_dataset_names_both_shapes() {
    let w = Work::new();
    w.ok(&["--seed", "1", "gen", "--hours", "2", "--out", "t.csv"]);
    w.ok(&["--seed", "1", "prep", "--input", "t.csv", "--out", "long"]);
    w.ok(&[
        "--seed",
        "1",
        "prep",
        "--input",
        "t.csv",
        "--out",
        "short",
        "--lookback-s",
        "240",
    ]);
    w.ok(&[
        "--seed",
        "1",
        "train",
        "--dataset",
        "long",
        "--out",
        "m.ckpt",
        "--epochs",
        "1",
    ]);
    let out = w.run(&["eval", "--checkpoint", "m.ckpt", "--dataset", "short", "--out", "ev"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("lookback 300") && err.contains("lookback 240"), "{err}");
}

#[test]
fn monitor_reports_rejections_and_quiet_streams() {
    let w = Work::new();
    w.ok(&["--seed", "2", "gen", "--hours", "2", "--out", "t.csv"]);
    w.ok(&["--seed", "2", "prep", "--input", "t.csv", "--out", "ds"]);
    w.ok(&[
        "--seed",
        "2",
        "train",
        "--dataset",
        "ds",
        "--out",
        "m.ckpt",
        "--epochs",
        "1",
    ]);

    // replay the last 20 minutes with one row repeated out of order
    let text = String::from_utf8(w.read("t.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let mut stream = vec![lines[0]];
    let tail = &lines[lines.len() - 1200..];
    stream.extend_from_slice(&tail[..600]);
    stream.push(tail[10]);
    stream.extend_from_slice(&tail[600..]);
    std::fs::write(w.path("stream.csv"), stream.join("\n") + "\n").unwrap();
    std::fs::write(
        w.path("lax.json"),
        r#"{ "thresholds": { "pm25_mass_limit_ugm3": 1e9, "pm03_count_limit_per_dl": 1e9 } }"#,
    )
    .unwrap();
    let out = Command::new(BIN)
        .current_dir(w.dir.path())
        .args([
            "--config",
            "lax.json",
            "monitor",
            "--checkpoint",
            "m.ckpt",
            "--input",
            "stream.csv",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("frames 1200 accepted, 1 rejected, 0 unparsable"), "{err}");
    assert!(err.contains("no alarms"), "{err}");
    // 1200 frames, lookback 300, one forecast per 60 s from the 300th frame on
    assert!(err.contains("predictions 16;"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn retrain_matches_a_fresh_training_run() {
    let w = Work::new();
    w.ok(&["--seed", "4", "gen", "--hours", "2", "--out", "t.csv"]);
    w.ok(&["--seed", "4", "prep", "--input", "t.csv", "--out", "ds"]);
    w.ok(&["--seed", "4", "train", "--dataset", "ds", "--out", "g0.ckpt"]);
    w.ok(&[
        "--seed",
        "9",
        "gen",
        "--hours",
        "2",
        "--out",
        "new.csv",
        "--start",
        "1700007200",
    ]);
    w.ok(&["--seed", "9", "prep", "--input", "new.csv", "--out", "fresh_ds"]);
    w.ok(&["--seed", "9", "train", "--dataset", "fresh_ds", "--out", "fresh.ckpt"]);
    w.ok(&[
        "--seed",
        "9",
        "retrain",
        "--checkpoint",
        "g0.ckpt",
        "--input",
        "new.csv",
        "--out",
        "g1.ckpt",
    ]);

    let g0 = load_checkpoint(w.path("g0.ckpt")).unwrap();
    let g1 = load_checkpoint(w.path("g1.ckpt")).unwrap();
    let fresh = load_checkpoint(w.path("fresh.ckpt")).unwrap();
    assert_eq!(g1.generation, 1);
    assert_ne!(g1.model_id(), g0.model_id());
    assert_eq!(g1.model, fresh.model);
    assert!(g1.norm.bits_eq(&fresh.norm));
}

#[test]
fn retrain_refuses_a_changed_feature_set() {
    let w = Work::new();
    w.ok(&["--seed", "1", "gen", "--hours", "2", "--out", "t.csv"]);
    w.ok(&["--seed", "1", "prep", "--input", "t.csv", "--out", "ds"]);
    w.ok(&[
        "--seed",
        "1",
        "train",
        "--dataset",
        "ds",
        "--out",
        "m.ckpt",
        "--epochs",
        "1",
    ]);

    // tie CO2 to temperature so pruning drops it
    let mut frames = read_csv(w.path("t.csv")).unwrap();
    for f in &mut frames {
        f.co2_ppm = 400.0 + 100.0 * f.temp_c;
    }
    let mut buf = Vec::new();
    write_frames(&frames, &mut buf).unwrap();
    std::fs::write(w.path("tied.csv"), buf).unwrap();

    let args = [
        "retrain",
        "--checkpoint",
        "m.ckpt",
        "--input",
        "tied.csv",
        "--out",
        "m2.ckpt",
    ];
    let out = w.run(&args);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("feature set changed") && err.contains("co2_ppm"), "{err}");
    assert!(!w.path("m2.ckpt").exists());
    let mut allowed = args.to_vec();
    allowed.push("--allow-feature-change");
    w.ok(&allowed);
    assert_eq!(load_checkpoint(w.path("m2.ckpt")).unwrap().features.len(), 10);
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let w = Work::new();
    assert_eq!(w.run(&["gen", "--hours", "0"]).status.code(), Some(1));
    assert_eq!(
        w.run(&["train", "--dataset", "nowhere", "--out", "m.ckpt"])
            .status
            .code(),
        Some(3)
    );
    std::fs::write(w.path("bad.json"), r#"{ "trian": {} }"#).unwrap();
    let out = Command::new(BIN)
        .args(["--config"])
        .arg(w.path("bad.json"))
        .args(["gen", "--hours", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
