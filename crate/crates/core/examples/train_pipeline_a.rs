//! Cosine schedule followed by weight-averaging cycles, on toy phantoms.

use voxelforge::preprocess::{prepare_case, NormMode};
use voxelforge::train::{train_pipeline_a, Phase, TrainConfig, TrainingCase};
use voxelforge::unet3d::ArchConfig;
use voxelforge::volio::generate_phantom;

fn main() -> voxelforge::Result<()> {
    let cases = (0..3)
        .map(|i| {
            let (v, l) = generate_phantom(i, [24, 24, 24])?;
            let p = prepare_case(&v, Some(&l), NormMode::MinMaxClip)?;
            Ok(TrainingCase {
                id: format!("case_{i}"),
                image: p.image,
                labels: p.labels.expect("labels were supplied"),
            })
        })
        .collect::<voxelforge::Result<Vec<_>>>()?;
    let mut cfg = TrainConfig {
        arch: ArchConfig {
            base_width: 4,
            ..ArchConfig::default()
        },
        patch: [16, 16, 16],
        toy_scale_factor: 10,
        ..TrainConfig::default()
    };
    cfg.schedule_a.lr0 = 1e-2;
    cfg.schedule_a.swa.lr_restart = 5e-3;

    let out = train_pipeline_a(&cases, &[], &cfg, 0)?;
    let m = &out.manifest;
    for e in &m.epochs {
        let tag = if e.snapshot { " snapshot" } else { "" };
        let phase = if e.phase == Phase::Main {
            "main"
        } else {
            "swa"
        };
        println!(
            "epoch {:3} {phase:4} lr {:.2e} loss {:.4}{tag}",
            e.epoch, e.lr, e.train_loss
        );
    }
    println!(
        "{} snapshots averaged, optimizer reset after epoch {:?}",
        m.snapshot_epochs.len(),
        m.optimizer_resets
    );
    Ok(())
}
