//! Build the network, count parameters and run one forward pass.

use voxelforge::preprocess::{pad_to_multiple, prepare_case, NormMode};
use voxelforge::rng::seeded;
use voxelforge::train::{image_tensor, probs_from_tensor};
use voxelforge::unet3d::{build_model, layer_plan, predict, ArchConfig};
use voxelforge::volio::{generate_phantom, Region};

fn main() -> voxelforge::Result<()> {
    let arch = ArchConfig::default();
    let model = build_model(&arch, &mut seeded(0))?;
    println!(
        "{} layers, {} parameters",
        layer_plan(&arch).len(),
        model.parameter_count()
    );

    let (image, _) = generate_phantom(2, [32, 32, 32])?;
    let prep = prepare_case(&image, None, NormMode::MinMaxClip)?;
    let (padded, _) = pad_to_multiple(&prep.image, 8)?;
    let y = predict(&model, &image_tensor(&[&padded])?)?;
    let probs = probs_from_tensor(&y, 0)?;
    for r in Region::ALL {
        let p = probs.get(r);
        println!(
            "{r:?}: mean probability {:.4}",
            p.iter().sum::<f64>() / p.len() as f64
        );
    }
    Ok(())
}
