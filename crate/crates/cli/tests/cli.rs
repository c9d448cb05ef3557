//! End-to-end checks of the installed binary: determinism of `gen`,
//! split proportions, perfect-prediction evaluation, the exit-code
//! contract, config-file resolution, and pipeline composability.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrseg_core::datagen::{read_dataset, write_dataset};
use chrseg_core::network::{load_checkpoint, predict_dataset};
use chrseg_core::{Dataset, Sample};

fn chrseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chrseg"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed (code {:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exits normally")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn gen_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = p(dir.path(), "a.chrseg");
    let b = p(dir.path(), "b.chrseg");
    assert_ok(&chrseg(&["gen", "--n", "10", "--seed", "7", "--out", &a]));
    assert_ok(&chrseg(&["gen", "--n", "10", "--seed", "7", "--out", &b]));
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert_eq!(bytes_a, bytes_b);
    // A manifest sits alongside the primary output.
    assert!(dir.path().join("a.chrseg.manifest.json").is_file());
}

#[test]
fn split_yields_64_16_20() {
    let dir = tempfile::tempdir().unwrap();
    let raw = p(dir.path(), "raw.chrseg");
    let clean = p(dir.path(), "clean.chrseg");
    let splits = p(dir.path(), "splits");
    assert_ok(&chrseg(&["gen", "--n", "100", "--seed", "3", "--out", &raw]));
    assert_ok(&chrseg(&["clean", "--input", &raw, "--out", &clean]));
    assert_ok(&chrseg(&["split", "--input", &clean, "--out", &splits, "--seed", "3"]));
    let counts: Vec<usize> = ["train.chrseg", "val.chrseg", "test.chrseg"]
        .iter()
        .map(|f| read_dataset(&dir.path().join("splits").join(f)).unwrap().len())
        .collect();
    assert_eq!(counts, vec![64, 16, 20]);
}

#[test]
fn eval_against_identical_predictions_reports_unit_iou() {
    let dir = tempfile::tempdir().unwrap();
    let raw = p(dir.path(), "raw.chrseg");
    let clean = p(dir.path(), "clean.chrseg");
    let model = p(dir.path(), "model.ckpt");
    assert_ok(&chrseg(&["gen", "--n", "6", "--seed", "5", "--out", &raw]));
    assert_ok(&chrseg(&["clean", "--input", &raw, "--out", &clean]));
    assert_ok(&chrseg(&[
        "train", "--train", &clean, "--out", &model, "--epochs", "1", "--seed", "5",
    ]));

    // Build a dataset whose labels are exactly what this checkpoint
    // predicts; evaluating it with the same checkpoint must score a
    // perfect IOU for every class that occurs.
    let cleaned = read_dataset(Path::new(&clean)).unwrap();
    let (params, _) = load_checkpoint(Path::new(&model)).unwrap();
    let preds = predict_dataset(&params, &cleaned, 8).unwrap();
    let mut perfect = Dataset::new(cleaned.h, cleaned.w);
    for (sample, pred) in cleaned.samples.iter().zip(preds) {
        perfect
            .push(Sample { image: sample.image.clone(), label: pred, meta: None })
            .unwrap();
    }
    let perfect_path = dir.path().join("perfect.chrseg");
    write_dataset(&perfect, &perfect_path).unwrap();

    let report_path = p(dir.path(), "report.json");
    assert_ok(&chrseg(&[
        "eval",
        "--data",
        &perfect_path.display().to_string(),
        "--model",
        &model,
        "--out",
        &report_path,
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let ious = report["per_class_global"].as_array().unwrap();
    assert_eq!(ious.len(), 4);
    let mut defined = 0;
    for v in ious {
        if let Some(x) = v.as_f64() {
            assert_eq!(x, 1.0, "a class present in the data must score exactly 1.0");
            defined += 1;
        }
    }
    assert!(defined > 0, "at least one class occurs");
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();

    // Missing input file -> 2.
    let out = chrseg(&[
        "eval",
        "--data",
        &p(dir.path(), "nope.chrseg"),
        "--model",
        &p(dir.path(), "nope.ckpt"),
        "--out",
        &p(dir.path(), "r.json"),
    ]);
    assert_eq!(code(&out), 2);

    // Missing source directory -> 2.
    let out = chrseg(&[
        "gen",
        "--n",
        "4",
        "--source-dir",
        &p(dir.path(), "no-such-dir"),
        "--out",
        &p(dir.path(), "d.chrseg"),
    ]);
    assert_eq!(code(&out), 2);

    // Flag validation failures -> 1, with usage on stderr.
    let out = chrseg(&["train", "--train", "x.chrseg", "--out", "m.ckpt", "--epochs", "soon"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = chrseg(&["gen", "--out", "d.chrseg", "--no-such-flag"]);
    assert_eq!(code(&out), 1);
    let out = chrseg(&["frobnicate"]);
    assert_eq!(code(&out), 1);

    // Help is not an error.
    let out = chrseg(&["--help"]);
    assert_eq!(code(&out), 0);

    // Numerical divergence -> 3.
    let raw = p(dir.path(), "raw.chrseg");
    let clean = p(dir.path(), "clean.chrseg");
    assert_ok(&chrseg(&["gen", "--n", "8", "--seed", "2", "--out", &raw]));
    assert_ok(&chrseg(&["clean", "--input", &raw, "--out", &clean]));
    let out = chrseg(&[
        "train", "--train", &clean, "--out", &p(dir.path(), "m.ckpt"), "--epochs", "2", "--lr",
        "1e9",
    ]);
    assert_eq!(code(&out), 3, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_resolves_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# generation defaults\nn = 12\nseed = 9\n").unwrap();
    let cfg = cfg.display().to_string();

    // Config value applies when no flag is given.
    let a = p(dir.path(), "a.chrseg");
    assert_ok(&chrseg(&["gen", "--config", &cfg, "--out", &a]));
    assert_eq!(read_dataset(Path::new(&a)).unwrap().len(), 12);

    // An explicit flag overrides the config file.
    let b = p(dir.path(), "b.chrseg");
    assert_ok(&chrseg(&["gen", "--config", &cfg, "--n", "5", "--out", &b]));
    assert_eq!(read_dataset(Path::new(&b)).unwrap().len(), 5);

    // The manifest records the resolved values.
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("b.chrseg.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["settings"]["n"], "5");
    assert_eq!(manifest["seed"], 9);

    // Malformed config line -> 1; missing config file -> 2.
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "n 12\n").unwrap();
    let out = chrseg(&["gen", "--config", &bad.display().to_string(), "--out", &a]);
    assert_eq!(code(&out), 1);
    let out = chrseg(&["gen", "--config", &p(dir.path(), "ghost.conf"), "--out", &a]);
    assert_eq!(code(&out), 2);
}

#[test]
fn pipeline_composes_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let raw = p(dir.path(), "raw.chrseg");
    let clean = p(dir.path(), "clean.chrseg");
    let splits = p(dir.path(), "splits");
    let model = p(dir.path(), "model.ckpt");
    let report = p(dir.path(), "report.json");

    assert_ok(&chrseg(&["gen", "--n", "200", "--seed", "1", "--out", &raw]));
    assert_ok(&chrseg(&["clean", "--input", &raw, "--out", &clean]));
    assert_ok(&chrseg(&["split", "--input", &clean, "--out", &splits, "--seed", "1"]));
    assert_ok(&chrseg(&[
        "train",
        "--train",
        &p(&PathBuf::from(&splits), "train.chrseg"),
        "--val",
        &p(&PathBuf::from(&splits), "val.chrseg"),
        "--out",
        &model,
        "--epochs",
        "1",
        "--seed",
        "1",
    ]));
    assert_ok(&chrseg(&[
        "eval",
        "--data",
        &p(&PathBuf::from(&splits), "test.chrseg"),
        "--model",
        &model,
        "--out",
        &report,
    ]));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report["per_class_global"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("model.ckpt.manifest.json").is_file());
    assert!(dir.path().join("splits").join("manifest.json").is_file());

    // The remaining subcommands consume the same artifacts.
    let hist = p(dir.path(), "hist.csv");
    assert_ok(&chrseg(&["hist", "--input", &clean, "--out", &hist]));
    assert!(std::fs::read_to_string(&hist).unwrap().lines().count() > 1);

    let frames = p(dir.path(), "frames");
    assert_ok(&chrseg(&[
        "render", "--data", &clean, "--model", &model, "--out", &frames, "--count", "2",
    ]));
    assert!(dir.path().join("frames").join("sample_0_pred.ppm").is_file());

    let base = p(dir.path(), "baseline.json");
    assert_ok(&chrseg(&[
        "baseline",
        "--train",
        &p(&PathBuf::from(&splits), "train.chrseg"),
        "--test",
        &p(&PathBuf::from(&splits), "test.chrseg"),
        "--out",
        &base,
    ]));
    let base: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&base).unwrap()).unwrap();
    assert!(base.get("per_class_global").is_some());
}
