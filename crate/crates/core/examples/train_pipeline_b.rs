//! Validation-selected training with the plain-sum Dice loss.

use voxelforge::preprocess::{prepare_case, NormMode};
use voxelforge::train::{train_pipeline_b, Pipeline, TrainConfig, TrainingCase};
use voxelforge::unet3d::ArchConfig;
use voxelforge::volio::generate_phantom;

fn main() -> voxelforge::Result<()> {
    let cases = (0..4)
        .map(|i| {
            let (v, l) = generate_phantom(10 + i, [24, 24, 24])?;
            let p = prepare_case(&v, Some(&l), NormMode::ZScoreNonzero)?;
            Ok(TrainingCase {
                id: format!("case_{i}"),
                image: p.image,
                labels: p.labels.expect("labels were supplied"),
            })
        })
        .collect::<voxelforge::Result<Vec<_>>>()?;
    let mut cfg = TrainConfig {
        pipeline: Pipeline::B,
        arch: ArchConfig {
            base_width: 4,
            ..ArchConfig::default()
        },
        patch: [16, 16, 16],
        ..TrainConfig::default()
    };
    cfg.schedule_b.epochs_max = 20;
    cfg.schedule_b.lr0 = 1e-2;

    let out = train_pipeline_b(&cases[..3], &cases[3..], &cfg, 0)?;
    let m = &out.manifest;
    for e in &m.epochs {
        println!(
            "epoch {:3} lr {:.2e} train {:.4} validation {:.4}",
            e.epoch,
            e.lr,
            e.train_loss,
            e.validation_loss.unwrap_or(f64::NAN)
        );
    }
    println!(
        "kept epoch {:?} with validation loss {:.4}",
        m.selected_epoch,
        m.selected_validation_loss.unwrap_or(f64::NAN)
    );
    Ok(())
}
