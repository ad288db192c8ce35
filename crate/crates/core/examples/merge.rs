//! Combine two labelmaps voxel by voxel.

use voxelforge::infer::{merge_labelmaps, MERGE_LABELS};
use voxelforge::volio::{generate_phantom, LabelMap};

fn main() -> voxelforge::Result<()> {
    println!("   b\\a {MERGE_LABELS:?}");
    for b in MERGE_LABELS {
        let row = MERGE_LABELS
            .iter()
            .map(|&a| {
                let one = |v| LabelMap::new([1, 1, 1], [1.0; 3], vec![v]);
                Ok(merge_labelmaps(&one(a)?, &one(b)?)?.labels()[0])
            })
            .collect::<voxelforge::Result<Vec<u8>>>()?;
        println!("{b:6} {row:?}");
    }

    let (_, a) = generate_phantom(1, [24, 24, 24])?;
    let (_, b) = generate_phantom(2, [24, 24, 24])?;
    let merged = merge_labelmaps(&a, &b)?;
    let count = |l: &LabelMap, v: u8| l.labels().iter().filter(|&&x| x == v).count();
    for v in MERGE_LABELS {
        println!(
            "label {v}: a {} b {} merged {}",
            count(&a, v),
            count(&b, v),
            count(&merged, v)
        );
    }
    Ok(())
}
