//! Group and instance normalization.

use super::tape::{BackwardCtx, BackwardOp, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const NORM_EPS: f64 = 1e-5;

/// Largest divisor of `channels` that is at most 8.
pub fn default_groups(channels: usize) -> usize {
    (1..=channels.min(8))
        .rev()
        .find(|g| channels % g == 0)
        .unwrap_or(1)
}

struct Stats {
    groups: usize,
    /// per (sample, group)
    mean: Vec<f64>,
    rstd: Vec<f64>,
}

fn check(x: &Tensor, groups: usize, gamma: &Tensor, beta: &Tensor) -> Result<()> {
    let c = x.channels();
    if groups == 0 || c % groups != 0 {
        return Err(Error::InvalidArgument(format!(
            "{c} channels cannot be split into {groups} groups"
        )));
    }
    let pd = [c, 1, 1, 1, 1];
    if gamma.dims() != pd || beta.dims() != pd {
        return Err(Error::Shape(format!(
            "norm affine parameters must have dims {pd:?}"
        )));
    }
    Ok(())
}

fn forward(x: &Tensor, groups: usize, gamma: &Tensor, beta: &Tensor, eps: f64) -> (Tensor, Stats) {
    let [n, c, ..] = x.dims();
    let cpg = c / groups;
    let s = x.spatial_len();
    let m = (cpg * s) as f64;
    let mut out = Tensor::zeros(x.dims());
    let mut stats = Stats {
        groups,
        mean: Vec::with_capacity(n * groups),
        rstd: Vec::with_capacity(n * groups),
    };
    for b in 0..n {
        for g in 0..groups {
            let chans = g * cpg..(g + 1) * cpg;
            let mean = chans
                .clone()
                .map(|ch| x.plane(b, ch).iter().sum::<f64>())
                .sum::<f64>()
                / m;
            let var = chans
                .clone()
                .map(|ch| {
                    x.plane(b, ch)
                        .iter()
                        .map(|v| (v - mean).powi(2))
                        .sum::<f64>()
                })
                .sum::<f64>()
                / m;
            let rstd = 1.0 / (var + eps).sqrt();
            for ch in chans {
                let (ga, be) = (gamma.data()[ch], beta.data()[ch]);
                let src = x.plane(b, ch);
                for (o, &v) in out.plane_mut(b, ch).iter_mut().zip(src) {
                    *o = ga * (v - mean) * rstd + be;
                }
            }
            stats.mean.push(mean);
            stats.rstd.push(rstd);
        }
    }
    (out, stats)
}

/// Normalize each (sample, channel group) over its channels and spatial axes,
/// then apply the per-channel affine map.
pub fn group_norm_forward(
    x: &Tensor,
    groups: usize,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f64,
) -> Result<Tensor> {
    check(x, groups, gamma, beta)?;
    Ok(forward(x, groups, gamma, beta, eps).0)
}

struct GroupNormOp {
    stats: Stats,
}

impl BackwardOp for GroupNormOp {
    fn name(&self) -> &'static str {
        "group_norm"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let (x, gamma) = (ctx.inputs[0], ctx.inputs[1]);
        let dy = ctx.grad_output;
        let [n, c, ..] = x.dims();
        let groups = self.stats.groups;
        let cpg = c / groups;
        let m = (cpg * x.spatial_len()) as f64;
        let mut dx = Tensor::zeros(x.dims());
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        for b in 0..n {
            for g in 0..groups {
                let mean = self.stats.mean[b * groups + g];
                let rstd = self.stats.rstd[b * groups + g];
                let chans = g * cpg..(g + 1) * cpg;
                // Σ ĝ and Σ ĝ·x̂ where ĝ = dy·γ
                let mut sum_g = 0.0;
                let mut sum_gx = 0.0;
                for ch in chans.clone() {
                    let ga = gamma.data()[ch];
                    let (mut sdy, mut sdyx) = (0.0, 0.0);
                    for (&d, &v) in dy.plane(b, ch).iter().zip(x.plane(b, ch)) {
                        let xh = (v - mean) * rstd;
                        sdy += d;
                        sdyx += d * xh;
                    }
                    dgamma[ch] += sdyx;
                    dbeta[ch] += sdy;
                    sum_g += ga * sdy;
                    sum_gx += ga * sdyx;
                }
                if !ctx.needs_grad[0] {
                    continue;
                }
                let (mg, mgx) = (sum_g / m, sum_gx / m);
                for ch in chans {
                    let ga = gamma.data()[ch];
                    let xs = x.plane(b, ch);
                    let ds = dy.plane(b, ch);
                    for ((o, &d), &v) in dx.plane_mut(b, ch).iter_mut().zip(ds).zip(xs) {
                        let xh = (v - mean) * rstd;
                        *o = rstd * (ga * d - mg - xh * mgx);
                    }
                }
            }
        }
        Ok(vec![
            ctx.needs_grad[0].then_some(dx),
            ctx.needs_grad[1].then(|| Tensor::vector(dgamma)),
            ctx.needs_grad[2].then(|| Tensor::vector(dbeta)),
        ])
    }
}

impl Tape {
    pub fn group_norm(
        &mut self,
        x: Var,
        groups: usize,
        gamma: Var,
        beta: Var,
        eps: f64,
    ) -> Result<Var> {
        let (xv, gv, bv) = (self.value(x), self.value(gamma), self.value(beta));
        check(xv, groups, gv, bv)?;
        let (out, stats) = forward(xv, groups, gv, bv, eps);
        Ok(self.push(out, &[x, gamma, beta], Box::new(GroupNormOp { stats })))
    }

    /// Group norm with one group per channel.
    pub fn instance_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let c = self.value(x).channels();
        self.group_norm(x, c, gamma, beta, eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(dims: [usize; 5]) -> Tensor {
        let n: usize = dims.iter().product();
        Tensor::new(
            dims,
            (0..n).map(|i| ((i * 37 % 11) as f64) * 0.3 - 1.0).collect(),
        )
        .unwrap()
    }

    #[test]
    fn group_counts() {
        assert_eq!(default_groups(8), 8);
        assert_eq!(default_groups(48), 8);
        assert_eq!(default_groups(12), 6);
        assert_eq!(default_groups(7), 7);
        assert_eq!(default_groups(9), 3);
        assert_eq!(default_groups(3), 3);
    }

    #[test]
    fn constant_input_normalizes_to_zero() {
        let x = Tensor::filled([2, 4, 3, 3, 3], 5.0);
        let y = group_norm_forward(
            &x,
            2,
            &Tensor::vector(vec![1.0; 4]),
            &Tensor::vector(vec![0.0; 4]),
            NORM_EPS,
        )
        .unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn per_group_moments() {
        let x = ramp([2, 6, 3, 4, 5]);
        let y = group_norm_forward(
            &x,
            3,
            &Tensor::vector(vec![1.0; 6]),
            &Tensor::vector(vec![0.0; 6]),
            0.0,
        )
        .unwrap();
        for b in 0..2 {
            for g in 0..3 {
                let vals: Vec<f64> = (2 * g..2 * g + 2)
                    .flat_map(|c| y.plane(b, c).to_vec())
                    .collect();
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
                assert!(m.abs() < 1e-5 && (v - 1.0).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn groups_equal_channels_is_instance_norm_and_shift_invariant() {
        let x = ramp([1, 4, 3, 3, 3]);
        let ga = Tensor::vector(vec![1.5, 0.5, 2.0, 1.0]);
        let be = Tensor::vector(vec![0.1, -0.2, 0.0, 0.3]);
        let mut t = Tape::new();
        let (xv, gv, bv) = (
            t.constant(x.clone()),
            t.constant(ga.clone()),
            t.constant(be.clone()),
        );
        let inst = t.instance_norm(xv, gv, bv, NORM_EPS).unwrap();
        let grp = group_norm_forward(&x, 4, &ga, &be, NORM_EPS).unwrap();
        assert_eq!(t.value(inst), &grp);
        let shifted = group_norm_forward(&x.map(|v| v + 3.0), 4, &ga, &be, NORM_EPS).unwrap();
        assert!(shifted.max_abs_diff(&grp) < 1e-9);
    }

    #[test]
    fn indivisible_groups_rejected() {
        let x = Tensor::zeros([1, 6, 2, 2, 2]);
        let p = Tensor::vector(vec![1.0; 6]);
        assert!(group_norm_forward(&x, 4, &p, &p, NORM_EPS).is_err());
    }
}
