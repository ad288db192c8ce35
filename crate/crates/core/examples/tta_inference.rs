//! The sixteen test-time transforms and ensemble inference on a full case.

use voxelforge::infer::{apply_tta_shaped, enumerate_tta, infer_case, invert_tta_shaped, Ensemble};
use voxelforge::preprocess::NormMode;
use voxelforge::rng::seeded;
use voxelforge::unet3d::{build_model, ArchConfig};
use voxelforge::volio::generate_phantom;

fn main() -> voxelforge::Result<()> {
    let dims = [2, 3, 4];
    let probe: Vec<u32> = (0..24).collect();
    for t in enumerate_tta() {
        let (out, td) = apply_tta_shaped(t, &probe, dims)?;
        let (back, bd) = invert_tta_shaped(t, &out, td)?;
        assert_eq!((back, bd), (probe.clone(), dims));
        println!("{t:?}: {dims:?} -> {td:?}, first row {:?}", &out[..td[2]]);
    }

    let arch = ArchConfig {
        base_width: 2,
        ..ArchConfig::default()
    };
    let models = (0..2)
        .map(|s| build_model(&arch, &mut seeded(s)))
        .collect::<voxelforge::Result<Vec<_>>>()?;
    let ens = Ensemble::new(models, true, 0.5)?;
    let (image, _) = generate_phantom(5, [24, 24, 24])?;
    let (labels, info) = infer_case(&ens, "demo", &image, NormMode::MinMaxClip)?;
    println!(
        "{} forward passes over {} transforms, labelmap {:?}",
        info.forward_passes,
        info.transforms,
        labels.spatial()
    );
    Ok(())
}
