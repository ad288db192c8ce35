//! Score one phantom labelmap against a perturbed copy.

use voxelforge::metrics::{aggregate, evaluate_case};
use voxelforge::volio::{generate_phantom, LabelMap};

fn main() -> voxelforge::Result<()> {
    let mut cases = Vec::new();
    for seed in 0..3 {
        let (_, reference) = generate_phantom(seed, [32, 32, 32])?;
        let dims = reference.spatial();
        // shift the prediction one voxel along x
        let mut shifted = vec![0u8; reference.labels().len()];
        for z in 0..dims[0] {
            for y in 0..dims[1] {
                for x in 1..dims[2] {
                    shifted[(z * dims[1] + y) * dims[2] + x] = reference.get(z, y, x - 1);
                }
            }
        }
        let pred = LabelMap::new(dims, reference.spacing(), shifted)?;
        let spacing = reference.spacing().map(f64::from);
        cases.push(evaluate_case(
            &format!("case_{seed}"),
            &pred,
            &reference,
            spacing,
        )?);
    }
    print!("{}", aggregate(&cases)?.to_table());
    Ok(())
}
