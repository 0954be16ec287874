use std::path::Path;
use std::process::{Command, Output};

use seedpure::formats::spft::load_features;

fn seedpure(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seedpure")).args(args).env("SEEDPURE_THREADS", "1").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = seedpure(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    seedpure(args).status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.spwt");
    assert_eq!(code(&["gen-weights", "--model", "alexnet", "--out", s(&out)]), 2);
    assert_eq!(code(&["gen-synth", "--out-dir", s(dir.path()), "--per-class", "0"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert!(!out.exists());
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.spft");
    assert_eq!(code(&["inspect", s(&missing)]), 1);
    let junk = dir.path().join("junk.spwt");
    std::fs::write(&junk, b"SPWX\x01\x00\x00\x00").unwrap();
    let out = seedpure(&["inspect", s(&junk)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn gen_weights_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.spwt");
    let b = dir.path().join("b.spwt");
    let c = dir.path().join("c.spwt");
    ok(&["gen-weights", "--model", "resnet50", "--seed", "4", "--out", s(&a)]);
    ok(&["gen-weights", "--model", "resnet50", "--seed", "4", "--out", s(&b)]);
    ok(&["gen-weights", "--model", "resnet50", "--seed", "5", "--out", s(&c)]);
    let (a, b, c) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), std::fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(&a[..4], b"SPWT");
}

#[test]
fn gen_synth_writes_per_class_directories() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen-synth", "--out-dir", s(dir.path()), "--per-class", "3", "--seed", "1", "--height", "20", "--width", "30"]);
    for class in ["variety_a", "variety_b"] {
        let files: Vec<_> = std::fs::read_dir(dir.path().join(class)).unwrap().collect();
        assert_eq!(files.len(), 3);
    }
    let info = ok(&["inspect", s(&dir.path().join("variety_a").join("variety_a_0000.ppm"))]);
    assert!(info.contains("20") && info.contains("30"), "{info}");

    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "[[class]]\nname = \"red\"\ncolor = [200, 30, 30]\n").unwrap();
    let out = dir.path().join("custom");
    ok(&["gen-synth", "--out-dir", s(&out), "--per-class", "2", "--spec", s(&spec), "--height", "16", "--width", "16"]);
    assert_eq!(std::fs::read_dir(out.join("red")).unwrap().count(), 2);
}

#[test]
fn extract_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["gen-synth", "--out-dir", s(&data), "--per-class", "4", "--seed", "3"]);
    let weights = dir.path().join("vgg.spwt");
    ok(&["gen-weights", "--model", "vgg16", "--seed", "42", "--out", s(&weights)]);
    let feats = dir.path().join("f.spft");
    let (a, b) = (data.join("variety_a"), data.join("variety_b"));
    let base = ["extract", "--model", "vgg16", "--weights", s(&weights), "--tap", "block3"];
    let mut args = base.to_vec();
    args.extend(["--input-dir", s(&a), "--input-dir", s(&b), "--positive", "variety_a", "--out", s(&feats)]);
    ok(&args);
    let m = load_features(&feats).unwrap();
    assert_eq!(m.n_samples(), 8);
    assert_eq!(m.n_features(), 256 * 9 * 21);
    assert_eq!(m.n_features(), 48384);
    assert_eq!(m.count_label(1), 4);

    let bad_tap = seedpure(&[
        "extract",
        "--model",
        "vgg16",
        "--weights",
        s(&weights),
        "--tap",
        "stage5.block1",
        "--input-dir",
        s(&a),
        "--positive",
        "variety_a",
        "--out",
        s(&feats),
    ]);
    assert_eq!(bad_tap.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_tap.stderr).contains("block3"));

    let model = dir.path().join("knn.json");
    ok(&["train", "--algo", "knn", "--k", "3", "--features", s(&feats), "--model-out", s(&model)]);
    let report = ok(&["eval", "--model-in", s(&model), "--features", s(&feats)]);
    assert!(report.contains("accuracy: 1 (8/8)"), "{report}");
    assert!(report.contains("tp=4 tn=4 fp=0 fn=0"), "{report}");

    // Mean-pooled rows cannot be scored by a model trained on flattened ones.
    let narrow = dir.path().join("narrow.spft");
    let mut args = base.to_vec();
    args.extend(["--input-dir", s(&a), "--input-dir", s(&b), "--positive", s(&a), "--out", s(&narrow), "--pooling", "mean"]);
    args[6] = "vgg.block3";
    ok(&args);
    assert_eq!(load_features(&narrow).unwrap().n_features(), 256);
    let mismatch = seedpure(&["eval", "--model-in", s(&model), "--features", s(&narrow)]);
    assert_eq!(mismatch.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("48384"));
}

#[test]
fn empty_input_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let weights = dir.path().join("w.spwt");
    ok(&["gen-weights", "--model", "vgg16", "--geometry", "32x32", "--out", s(&weights)]);
    let out = dir.path().join("f.spft");
    let status = code(&[
        "extract",
        "--model",
        "vgg16",
        "--weights",
        s(&weights),
        "--tap",
        "block3",
        "--input-dir",
        s(&empty),
        "--positive",
        "empty",
        "--geometry",
        "32x32",
        "--out",
        s(&out),
    ]);
    assert_eq!(status, 1);
    assert!(!out.exists());
}
