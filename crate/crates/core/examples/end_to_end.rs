//! Every command of the binary in sequence, on a scratch directory.

use serde_json::json;
use voxelforge::cli::{run, Command, RunConfig};

fn main() -> voxelforge::Result<()> {
    let root = std::env::temp_dir().join("voxelforge-end-to-end");
    let p = |s: &str| root.join(s);
    let step = |cmd: Command, cfg: serde_json::Value, out: &str| -> voxelforge::Result<()> {
        let cfg = RunConfig::from_json(&cfg.to_string())?;
        println!("{}", run(cmd, cfg, Some(1), Some(root.join(out)), 1)?);
        Ok(())
    };

    step(
        Command::Phantom,
        json!({ "phantom": { "cases": 4, "dims": [24, 24, 24] } }),
        "data",
    )?;
    let data = json!({ "images": p("data/images"), "labels": p("data/labels") });
    step(
        Command::Train,
        json!({
            "data": data,
            "folds": { "count": 2 },
            "train": {
                "arch": { "base_width": 4 },
                "patch": [16, 16, 16],
                "toy_scale_factor": 10,
                "schedule_a": { "lr0": 0.01, "swa": { "lr_restart": 0.005 } }
            }
        }),
        "train",
    )?;
    step(
        Command::Infer,
        json!({
            "data": { "images": p("data/images") },
            "train": { "arch": { "base_width": 4 } },
            "infer": { "ensemble": { "checkpoints": [p("train/checkpoints/fold_0.tnpk"), p("train/checkpoints/fold_1.tnpk")] } }
        }),
        "infer",
    )?;
    step(
        Command::Merge,
        json!({ "merge": { "a_dir": p("infer/predictions"), "b_dir": p("infer/predictions") } }),
        "merge",
    )?;
    step(
        Command::Evaluate,
        json!({ "evaluate": { "pred_dir": p("merge/merged"), "ref_dir": p("data/labels") } }),
        "evaluate",
    )?;
    Ok(())
}
