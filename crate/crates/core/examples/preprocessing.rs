//! Normalize, crop to the brain and pad for the network.

use voxelforge::preprocess::{pad_to_multiple, prepare_case, unpad, NormMode};
use voxelforge::volio::generate_phantom;

fn main() -> voxelforge::Result<()> {
    let (image, labels) = generate_phantom(3, [40, 36, 44])?;
    for mode in [NormMode::MinMaxClip, NormMode::ZScoreNonzero] {
        let prep = prepare_case(&image, Some(&labels), mode)?;
        let ch0 = prep.image.channel(0);
        let (lo, hi) = ch0
            .iter()
            .fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        println!(
            "{mode:?}: {:?} -> cropped {:?} (bbox {:?}), channel 0 in [{lo:.3}, {hi:.3}]",
            prep.original_dims,
            prep.image.spatial(),
            prep.bbox,
        );
    }

    let prep = prepare_case(&image, None, NormMode::MinMaxClip)?;
    let (padded, rec) = pad_to_multiple(&prep.image, 8)?;
    println!(
        "padded {:?} -> {:?}",
        prep.image.spatial(),
        padded.spatial()
    );
    assert_eq!(unpad(&padded, &rec)?, prep.image);
    Ok(())
}
