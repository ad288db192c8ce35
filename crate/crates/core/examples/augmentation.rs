//! Draw a few augmented samples and show which transforms fired.

use voxelforge::augment::{apply_policy_traced, AugmentPolicy};
use voxelforge::rng::stream;
use voxelforge::volio::generate_phantom;

fn main() -> voxelforge::Result<()> {
    let (image, labels) = generate_phantom(1, [24, 24, 24])?;
    for (name, policy) in [
        ("A", AugmentPolicy::pipeline_a()),
        ("B", AugmentPolicy::pipeline_b()),
    ] {
        println!("policy {name}: {policy:?}");
        for s in 0..4 {
            let (out, _, trace) =
                apply_policy_traced(&image, &labels, &policy, &mut stream(42, &[s]))?;
            let mean = out.data().iter().map(|&v| v as f64).sum::<f64>() / out.data().len() as f64;
            println!("  sample {s}: mean {mean:.4}, {trace:?}");
        }
    }
    Ok(())
}
