//! Elementwise activations, channel concatenation and reductions.

use super::tape::{BackwardCtx, BackwardOp, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

struct ReluOp;

impl BackwardOp for ReluOp {
    fn name(&self) -> &'static str {
        "relu"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let x = ctx.inputs[0];
        let data = ctx
            .grad_output
            .data()
            .iter()
            .zip(x.data())
            .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
            .collect();
        Ok(vec![Some(Tensor::new(x.dims(), data)?)])
    }
}

struct SigmoidOp;

impl BackwardOp for SigmoidOp {
    fn name(&self) -> &'static str {
        "sigmoid"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let y = ctx.output;
        let data = ctx
            .grad_output
            .data()
            .iter()
            .zip(y.data())
            .map(|(&g, &s)| g * s * (1.0 - s))
            .collect();
        Ok(vec![Some(Tensor::new(y.dims(), data)?)])
    }
}

struct ConcatOp {
    split: usize,
}

impl BackwardOp for ConcatOp {
    fn name(&self) -> &'static str {
        "concat_channels"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let g = ctx.grad_output;
        let [n, c, z, y, x] = g.dims();
        let mut ga = Tensor::zeros([n, self.split, z, y, x]);
        let mut gb = Tensor::zeros([n, c - self.split, z, y, x]);
        for s in 0..n {
            for ch in 0..c {
                let src = g.plane(s, ch);
                if ch < self.split {
                    ga.plane_mut(s, ch).copy_from_slice(src);
                } else {
                    gb.plane_mut(s, ch - self.split).copy_from_slice(src);
                }
            }
        }
        Ok(vec![Some(ga), Some(gb)])
    }
}

/// Concatenate along the channel axis.
pub fn concat_forward(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (da, db) = (a.dims(), b.dims());
    if da[0] != db[0] || da[2..] != db[2..] {
        return Err(Error::Shape(format!(
            "cannot concatenate {da:?} with {db:?}"
        )));
    }
    let mut out = Tensor::zeros([da[0], da[1] + db[1], da[2], da[3], da[4]]);
    for s in 0..da[0] {
        for ch in 0..da[1] {
            out.plane_mut(s, ch).copy_from_slice(a.plane(s, ch));
        }
        for ch in 0..db[1] {
            out.plane_mut(s, da[1] + ch).copy_from_slice(b.plane(s, ch));
        }
    }
    Ok(out)
}

struct AddOp;

impl BackwardOp for AddOp {
    fn name(&self) -> &'static str {
        "add"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let g = ctx.grad_output;
        Ok(vec![
            ctx.needs_grad[0].then(|| g.clone()),
            ctx.needs_grad[1].then(|| g.clone()),
        ])
    }
}

struct ScaleOp {
    factor: f64,
}

impl BackwardOp for ScaleOp {
    fn name(&self) -> &'static str {
        "scale"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(ctx.grad_output.map(|g| g * self.factor))])
    }
}

/// Σ x·w against a constant weight tensor.
struct WeightedSumOp {
    weights: Tensor,
}

impl BackwardOp for WeightedSumOp {
    fn name(&self) -> &'static str {
        "weighted_sum"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let g = ctx.grad_output.item();
        Ok(vec![Some(self.weights.map(|w| w * g))])
    }
}

impl Tape {
    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(out, &[x], Box::new(ReluOp))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        self.push(out, &[x], Box::new(SigmoidOp))
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = concat_forward(self.value(a), self.value(b))?;
        let split = self.value(a).channels();
        Ok(self.push(out, &[a, b], Box::new(ConcatOp { split })))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.dims() != vb.dims() {
            return Err(Error::Shape(format!(
                "cannot add {:?} and {:?}",
                va.dims(),
                vb.dims()
            )));
        }
        let mut out = va.clone();
        out.add_assign(vb);
        Ok(self.push(out, &[a, b], Box::new(AddOp)))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let out = self.value(x).map(|v| v * factor);
        self.push(out, &[x], Box::new(ScaleOp { factor }))
    }

    /// Scalar Σ x·w for a fixed `weights` tensor of the same dims.
    pub fn weighted_sum(&mut self, x: Var, weights: Tensor) -> Result<Var> {
        if self.value(x).dims() != weights.dims() {
            return Err(Error::Shape(
                "weighted_sum weights must match input dims".into(),
            ));
        }
        let out = Tensor::scalar(self.value(x).dot(&weights));
        Ok(self.push(out, &[x], Box::new(WeightedSumOp { weights })))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let w = Tensor::filled(self.value(x).dims(), 1.0);
        self.weighted_sum(x, w).expect("dims match by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_cases() {
        let mut t = Tape::new();
        let x = t.param(Tensor::new([1, 1, 1, 1, 4], vec![-2.0, 0.0, 1.0, 3.0]).unwrap());
        let y = t.relu(x);
        assert_eq!(t.value(y).data(), &[0.0, 0.0, 1.0, 3.0]);
        let s = t.sum(y);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn sigmoid_symmetry() {
        assert_eq!(sigmoid(0.0), 0.5);
        for v in [-30.0, -3.0, -0.1, 0.7, 12.0] {
            assert!((sigmoid(-v) - (1.0 - sigmoid(v))).abs() < 1e-15);
        }
    }

    #[test]
    fn concat_dims_and_split() {
        let mut t = Tape::new();
        let a = t.param(Tensor::filled([2, 1, 2, 2, 2], 1.0));
        let b = t.param(Tensor::filled([2, 3, 2, 2, 2], 2.0));
        let c = t.concat_channels(a, b).unwrap();
        assert_eq!(t.value(c).dims(), [2, 4, 2, 2, 2]);
        let w = Tensor::new([2, 4, 2, 2, 2], (0..64).map(f64::from).collect()).unwrap();
        let s = t.weighted_sum(c, w.clone()).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(a).unwrap().plane(1, 0), w.plane(1, 0));
        assert_eq!(g.get(b).unwrap().plane(1, 2), w.plane(1, 3));

        let empty = t.constant(Tensor::zeros([2, 0, 2, 2, 2]));
        let same = t.concat_channels(a, empty).unwrap();
        assert_eq!(t.value(same), t.value(a));
        let bad = t.constant(Tensor::zeros([2, 1, 2, 2, 4]));
        assert!(t.concat_channels(a, bad).is_err());
    }
}
