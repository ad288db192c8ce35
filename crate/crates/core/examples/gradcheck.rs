//! Check tape gradients of a small conv + norm + pooling graph against
//! central differences.

use rand::Rng;
use voxelforge::rng::seeded;
use voxelforge::tensornet::{grad_check, ConvSpec, GradCheckOptions, Tape, Tensor, Var, NORM_EPS};

fn random(dims: [usize; 5], g: &mut impl Rng) -> Tensor {
    let n = dims.iter().product();
    Tensor::new(dims, (0..n).map(|_| g.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn main() -> voxelforge::Result<()> {
    let mut g = seeded(0);
    let spec = ConvSpec::k3(2, 4);
    let params = vec![
        random([1, 2, 6, 6, 6], &mut g),
        random(spec.weight_dims(), &mut g),
        random(spec.bias_dims(), &mut g),
        Tensor::vector(vec![1.0, 0.5, 2.0, 1.5]),
        Tensor::vector(vec![0.0, 0.1, -0.2, 0.3]),
    ];
    let weights = random([1, 4, 3, 3, 3], &mut g);
    let report = grad_check(
        |t: &mut Tape, v: &[Var]| {
            let y = t.conv3d(v[0], v[1], Some(v[2]), spec)?;
            let y = t.group_norm(y, 2, v[3], v[4], NORM_EPS)?;
            let y = t.sigmoid(y);
            let y = t.maxpool3d(y)?;
            t.weighted_sum(y, weights.clone())
        },
        &params,
        &GradCheckOptions::default(),
    )?;
    println!(
        "checked {} coordinates, max rel err {:.2e}, passed {}",
        report.checked, report.max_rel_err, report.passed
    );
    Ok(())
}
