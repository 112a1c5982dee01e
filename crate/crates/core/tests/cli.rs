//! End-to-end runs of the command-line tool.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use trilemma_eval::data::save_image_dataset;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trilemma-eval"))
}

fn run_json(args: &[&str]) -> Value {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Hand-encoded GEVB file, as the external embedder writes it.
fn write_gevb(path: &Path, rows: &[[f32; 2]], source: u8) {
    let mut b = Vec::new();
    b.extend_from_slice(b"GEVB");
    b.extend_from_slice(&1u32.to_le_bytes());
    b.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    b.extend_from_slice(&2u32.to_le_bytes());
    b.extend_from_slice(&[source, 0, 0, 0]);
    for r in rows {
        for v in r {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, b).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn embedder_files_drive_manifold_and_fid() {
    let dir = tempfile::tempdir().unwrap();
    let real = dir.path().join("real.gevb");
    let synth = dir.path().join("synth.gevb");
    write_gevb(&real, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], 0);
    write_gevb(&synth, &[[0.5, 0.5], [5.0, 5.0]], 0);
    let v = run_json(&["manifold", "--real", p(&real), "--synth", p(&synth), "--k", "1"]);
    assert_eq!(v["precision"], 0.5);
    // Each synth ball has the radius of the distance between the two synth rows.
    assert_eq!(v["recall"], 1.0);
    let f = run_json(&["fid", "--real", p(&real), "--synth", p(&real)]);
    assert!(f.as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn corrupt_embedding_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let real = dir.path().join("real.gevb");
    write_gevb(&real, &[[0.0, 0.0], [1.0, 0.0]], 2);
    let bytes = fs::read(&real).unwrap();
    let cut = dir.path().join("cut.gevb");
    fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
    let out = bin().args(["fid", "--real", p(&real), "--synth", p(&cut)]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncated"));
}

#[test]
fn ingest_train_eval_attack() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train");
    let val = dir.path().join("val");
    save_image_dataset(&common::toy_images(40, 8, 1), &train).unwrap();
    save_image_dataset(&common::toy_images(10, 8, 2), &val).unwrap();

    let ingest = run_json(&["ingest", "--root", p(&train), "--out", p(&dir.path().join("split"))]);
    assert_eq!(ingest["images"], 80);
    assert_eq!(ingest["classes"], 2);
    assert!(dir.path().join("split/splits.json").exists());

    let feats = dir.path().join("train.gevb");
    let f = run_json(&["features", "--dir", p(&train), "--out", p(&feats), "--dim", "8"]);
    assert_eq!(f["rows"], 80);

    let model = dir.path().join("m.gevm");
    let t = run_json(&[
        "train", "--train", p(&train), "--val", p(&val), "--out", p(&model),
        "--variant", "three-block", "--epochs", "15", "--hidden", "32",
    ]);
    assert_eq!(t["curve"].as_array().unwrap().len(), 15);
    let e = run_json(&["eval", "--model", p(&model), "--test", p(&val)]);
    assert!(e["accuracy"].as_f64().unwrap() >= 0.9, "{e}");
    let a = run_json(&["attack", "--model", p(&model), "--test", p(&val), "--iters", "5"]);
    assert!(a["adversarial"]["accuracy"].as_f64().unwrap() <= e["accuracy"].as_f64().unwrap());
}

#[test]
fn bench_with_external_command() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("sample.png");
    trilemma_eval::data::write_png(&common::random_image(&mut common::rng(3), 8, 8, 3), &src).unwrap();
    let template = format!(
        "for i in $(seq 1 {{count}}); do cp {} {{outdir}}/$i.png; done",
        p(&src)
    );
    let work = dir.path().join("work");
    let v = run_json(&[
        "bench", "--adapter", "cmd", "--template", &template, "--count", "4", "--workdir", p(&work),
    ]);
    assert_eq!(v["count"], 4);
    assert!(v["samples_per_second"].as_f64().unwrap() > 0.0);

    let out = bin()
        .args(["bench", "--adapter", "cmd", "--template", "exit 3 {count} {outdir}", "--workdir", p(&work)])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn bad_arguments_fail() {
    assert!(!bin().args(["report"]).output().unwrap().status.success());
    let out = bin().args(["manifold", "--real", "/nonexistent", "--synth", "/nonexistent"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn readme_config_example_parses() {
    let readme = include_str!("../../../README.md");
    let json = readme.split("```json\n").nth(1).unwrap().split("```").next().unwrap();
    let cfg = trilemma_eval::config::RunConfig::from_json(json).unwrap();
    assert_eq!(cfg.generators.len(), 2);
    assert_eq!(cfg.plan.variants(&cfg.generator_ids()).unwrap().len(), 1 + 1 + 2 * 9);
}
