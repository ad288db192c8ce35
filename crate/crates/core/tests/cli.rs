use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_voxelforge");

fn voxelforge(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.args(args)
        .env("VOXELFORGE_LOG", "error")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, value: &Value) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).trim().to_string()
}

fn assert_error(o: &Output, class: &str, code: i32) {
    let err = stderr(o);
    assert_eq!(o.status.code(), Some(code), "{err}");
    let last = err.lines().last().unwrap_or_default();
    assert!(last.starts_with(&format!("error[{class}]: ")), "{err}");
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["images", "labels"] {
        let mut names: Vec<_> = fs::read_dir(root.join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        names.sort();
        for p in names {
            out.push((
                format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()),
                fs::read(&p).unwrap(),
            ));
        }
    }
    out
}

fn phantoms(dir: &Path, seed: &str, cases: usize) -> std::path::PathBuf {
    let cfg = write_config(
        dir,
        "phantom.json",
        &json!({ "phantom": { "cases": cases, "dims": [16, 16, 16] } }),
    );
    let out = dir.join("data");
    let o = voxelforge(
        &["--seed", seed, "--out", out.to_str().unwrap(), "phantom"],
        Some(&cfg),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn phantom_output_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ta = read_tree(&phantoms(a.path(), "11", 3));
    let tb = read_tree(&phantoms(b.path(), "11", 3));
    assert_eq!(ta.len(), 6);
    assert_eq!(ta, tb);
    let c = tempfile::tempdir().unwrap();
    assert_ne!(ta, read_tree(&phantoms(c.path(), "12", 3)));

    let manifest: Value = serde_json::from_str(
        &fs::read_to_string(a.path().join("data/phantom_manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "phantom");
    assert_eq!(manifest["config"]["seed"], 11);
    assert_eq!(manifest["cases"].as_array().unwrap().len(), 3);
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let data = phantoms(dir.path(), "3", 3);
    let d = |s: &str| data.join(s).to_str().unwrap().to_string();

    let prep_cfg = write_config(
        dir.path(),
        "prep.json",
        &json!({ "seed": 3, "data": { "images": d("images"), "labels": d("labels") } }),
    );
    let o = voxelforge(
        &[
            "--out",
            dir.path().join("prep").to_str().unwrap(),
            "preprocess",
        ],
        Some(&prep_cfg),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_dir(dir.path().join("prep/preprocessed/images"))
            .unwrap()
            .count(),
        3
    );

    let train_cfg = write_config(
        dir.path(),
        "train.json",
        &json!({
            "seed": 3,
            "data": { "images": d("images"), "labels": d("labels") },
            "folds": { "count": 3, "only": [0] },
            "train": { "arch": { "base_width": 2 }, "patch": [8, 8, 8], "toy_scale_factor": 100 }
        }),
    );
    let train_out = dir.path().join("train");
    let o = voxelforge(
        &["--out", train_out.to_str().unwrap(), "train"],
        Some(&train_cfg),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let ck = train_out.join("checkpoints/fold_0.tnpk");
    assert!(ck.is_file());
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(train_out.join("train_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["folds"].as_array().unwrap().len(), 1);

    let infer_cfg = write_config(
        dir.path(),
        "infer.json",
        &json!({
            "seed": 3,
            "data": { "images": d("images") },
            "train": { "arch": { "base_width": 2 } },
            "infer": { "ensemble": { "checkpoints": [ck], "tta": false } }
        }),
    );
    let infer_out = dir.path().join("infer");
    let o = voxelforge(
        &["--out", infer_out.to_str().unwrap(), "infer"],
        Some(&infer_cfg),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let preds = infer_out.join("predictions");
    assert_eq!(fs::read_dir(&preds).unwrap().count(), 3);

    let merge_cfg = write_config(
        dir.path(),
        "merge.json",
        &json!({ "seed": 3, "merge": { "a_dir": preds, "b_dir": d("labels") } }),
    );
    let merge_out = dir.path().join("merge");
    let o = voxelforge(
        &["--out", merge_out.to_str().unwrap(), "merge"],
        Some(&merge_cfg),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_dir(merge_out.join("merged")).unwrap().count(), 3);

    let eval_cfg = write_config(
        dir.path(),
        "eval.json",
        &json!({ "seed": 3, "evaluate": { "pred_dir": d("labels"), "ref_dir": d("labels") } }),
    );
    let eval_out = dir.path().join("eval");
    let o = voxelforge(
        &["--out", eval_out.to_str().unwrap(), "evaluate"],
        Some(&eval_cfg),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(eval_out.join("report.json")).unwrap();
    let report: Value = serde_json::from_str(&report).unwrap();
    for case in report["cases"].as_array().unwrap() {
        for region in ["ET", "TC", "WT"] {
            assert_eq!(case[region]["dice"], 1.0, "{case}");
            assert_eq!(case[region]["hd95_mm"], 0.0, "{case}");
        }
    }
    assert!(eval_out.join("report.txt").is_file());
}

#[test]
fn merge_rejects_mismatched_case_sets() {
    let dir = tempfile::tempdir().unwrap();
    let data = phantoms(dir.path(), "5", 2);
    let partial = dir.path().join("partial");
    fs::create_dir(&partial).unwrap();
    fs::copy(
        data.join("labels/case_000.segv"),
        partial.join("case_000.segv"),
    )
    .unwrap();
    let cfg = write_config(
        dir.path(),
        "merge.json",
        &json!({ "seed": 1, "merge": { "a_dir": data.join("labels"), "b_dir": partial } }),
    );
    let o = voxelforge(
        &["--out", dir.path().join("m").to_str().unwrap(), "merge"],
        Some(&cfg),
    );
    assert_error(&o, "invalid_argument", 1);
    assert!(stderr(&o).contains("case_001"));
}

#[test]
fn configuration_problems_are_reported_as_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    let o = voxelforge(&["--out", out, "phantom"], None);
    assert_error(&o, "config", 1);
    assert!(stderr(&o).contains("seed"));

    let unknown = write_config(
        dir.path(),
        "unknown.json",
        &json!({ "seed": 1, "phantom": { "casez": 2 } }),
    );
    assert_error(
        &voxelforge(&["--out", out, "phantom"], Some(&unknown)),
        "config",
        1,
    );

    let zero = write_config(
        dir.path(),
        "zero.json",
        &json!({ "seed": 1, "phantom": { "cases": 0 } }),
    );
    assert_error(
        &voxelforge(&["--out", out, "phantom"], Some(&zero)),
        "config",
        1,
    );

    let o = Command::new(BIN)
        .args(["--seed", "1", "--out", out, "phantom"])
        .env("VOXELFORGE_LOG", "verbose")
        .output()
        .unwrap();
    assert_error(&o, "config", 1);

    let missing = dir.path().join("nope.json");
    assert_error(
        &voxelforge(&["--out", out, "phantom"], Some(&missing)),
        "io",
        1,
    );
}

#[test]
fn usage_errors_exit_with_two() {
    assert_error(&voxelforge(&["frobnicate"], None), "usage", 2);
    assert_error(&voxelforge(&["--seed", "x", "phantom"], None), "usage", 2);
    let o = voxelforge(&["--help"], None);
    assert!(o.status.success());
    let help = String::from_utf8_lossy(&o.stdout);
    for sub in [
        "phantom",
        "preprocess",
        "train",
        "infer",
        "merge",
        "evaluate",
    ] {
        assert!(help.contains(sub), "{help}");
    }
}
