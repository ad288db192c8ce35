//! 2x2x2 max pooling and trilinear upsampling.

use super::tape::{BackwardCtx, BackwardOp, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Blockwise 2x2x2 max. Also returns, per output element, the flat input
/// index that won; ties go to the first voxel in row-major block order.
pub fn maxpool3d_forward(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let [n, c, zn, yn, xn] = x.dims();
    if zn % 2 != 0 || yn % 2 != 0 || xn % 2 != 0 {
        return Err(Error::Shape(format!(
            "maxpool needs even spatial dims, got {:?}",
            x.spatial()
        )));
    }
    let (oz, oy, ox) = (zn / 2, yn / 2, xn / 2);
    let mut out = Tensor::zeros([n, c, oz, oy, ox]);
    let mut argmax = Vec::with_capacity(out.numel());
    let data = x.data();
    let mut o = 0;
    for nc in 0..n * c {
        let base = nc * zn * yn * xn;
        for z in 0..oz {
            for y in 0..oy {
                for xx in 0..ox {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = usize::MAX;
                    for dz in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let i = base + ((2 * z + dz) * yn + 2 * y + dy) * xn + 2 * xx + dx;
                                if data[i] > best || best_i == usize::MAX {
                                    best = data[i];
                                    best_i = i;
                                }
                            }
                        }
                    }
                    out.data_mut()[o] = best;
                    argmax.push(best_i);
                    o += 1;
                }
            }
        }
    }
    Ok((out, argmax))
}

/// Route each output gradient to its argmax input.
pub fn maxpool3d_backward(g: &Tensor, argmax: &[usize], input_dims: [usize; 5]) -> Tensor {
    let mut dx = Tensor::zeros(input_dims);
    for (&i, &v) in argmax.iter().zip(g.data()) {
        dx.data_mut()[i] += v;
    }
    dx
}

struct MaxPoolOp {
    argmax: Vec<usize>,
}

impl BackwardOp for MaxPoolOp {
    fn name(&self) -> &'static str {
        "maxpool3d"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(maxpool3d_backward(
            ctx.grad_output,
            &self.argmax,
            ctx.inputs[0].dims(),
        ))])
    }
}

/// Linear interpolation taps for one axis: (i0, i1, weight of i1).
///
/// Half-pixel centres (the `align_corners = false` convention): output `i`
/// samples input coordinate `(i + 0.5) / s - 0.5`, clamped at the borders.
pub fn interp_table(n: usize, factor: usize) -> Vec<(usize, usize, f64)> {
    (0..n * factor)
        .map(|i| {
            let src = ((i as f64 + 0.5) / factor as f64 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

/// Interpolate the middle axis of an `[outer, n, inner]` block.
fn interp_axis(
    data: &[f64],
    outer: usize,
    n: usize,
    inner: usize,
    table: &[(usize, usize, f64)],
) -> Vec<f64> {
    let m = table.len();
    let mut out = vec![0.0; outer * m * inner];
    for o in 0..outer {
        let src = &data[o * n * inner..(o + 1) * n * inner];
        let dst = &mut out[o * m * inner..(o + 1) * m * inner];
        for (j, &(i0, i1, l)) in table.iter().enumerate() {
            let a = &src[i0 * inner..(i0 + 1) * inner];
            let b = &src[i1 * inner..(i1 + 1) * inner];
            for ((d, &a), &b) in dst[j * inner..(j + 1) * inner].iter_mut().zip(a).zip(b) {
                *d = (1.0 - l) * a + l * b;
            }
        }
    }
    out
}

/// Transpose of [`interp_axis`].
fn interp_axis_t(
    g: &[f64],
    outer: usize,
    n: usize,
    inner: usize,
    table: &[(usize, usize, f64)],
) -> Vec<f64> {
    let m = table.len();
    let mut out = vec![0.0; outer * n * inner];
    for o in 0..outer {
        let src = &g[o * m * inner..(o + 1) * m * inner];
        let dst = &mut out[o * n * inner..(o + 1) * n * inner];
        for (j, &(i0, i1, l)) in table.iter().enumerate() {
            let gs = &src[j * inner..(j + 1) * inner];
            for (k, &v) in gs.iter().enumerate() {
                dst[i0 * inner + k] += (1.0 - l) * v;
                dst[i1 * inner + k] += l * v;
            }
        }
    }
    out
}

/// Separable trilinear upsampling by an integer factor.
pub fn upsample_forward(x: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::InvalidArgument(
            "upsample factor must be >= 1".into(),
        ));
    }
    let [n, c, zn, yn, xn] = x.dims();
    let (tz, ty, tx) = (
        interp_table(zn, factor),
        interp_table(yn, factor),
        interp_table(xn, factor),
    );
    let (mz, my, mx) = (zn * factor, yn * factor, xn * factor);
    let a = interp_axis(x.data(), n * c * zn * yn, xn, 1, &tx);
    let b = interp_axis(&a, n * c * zn, yn, mx, &ty);
    let d = interp_axis(&b, n * c, zn, my * mx, &tz);
    Tensor::new([n, c, mz, my, mx], d)
}

pub fn upsample_backward(g: &Tensor, input_dims: [usize; 5], factor: usize) -> Tensor {
    let [n, c, zn, yn, xn] = input_dims;
    let (tz, ty, tx) = (
        interp_table(zn, factor),
        interp_table(yn, factor),
        interp_table(xn, factor),
    );
    let (my, mx) = (yn * factor, xn * factor);
    let b = interp_axis_t(g.data(), n * c, zn, my * mx, &tz);
    let a = interp_axis_t(&b, n * c * zn, yn, mx, &ty);
    let d = interp_axis_t(&a, n * c * zn * yn, xn, 1, &tx);
    Tensor::new(input_dims, d).expect("transpose preserves element count")
}

struct UpsampleOp {
    factor: usize,
}

impl BackwardOp for UpsampleOp {
    fn name(&self) -> &'static str {
        "upsample_trilinear"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(upsample_backward(
            ctx.grad_output,
            ctx.inputs[0].dims(),
            self.factor,
        ))])
    }
}

impl Tape {
    pub fn maxpool3d(&mut self, x: Var) -> Result<Var> {
        let (out, argmax) = maxpool3d_forward(self.value(x))?;
        Ok(self.push(out, &[x], Box::new(MaxPoolOp { argmax })))
    }

    pub fn upsample_trilinear(&mut self, x: Var, factor: usize) -> Result<Var> {
        let out = upsample_forward(self.value(x), factor)?;
        Ok(self.push(out, &[x], Box::new(UpsampleOp { factor })))
    }

    pub fn upsample2x(&mut self, x: Var) -> Result<Var> {
        self.upsample_trilinear(x, 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_block_and_constant() {
        let x = Tensor::new([1, 1, 2, 2, 2], (1..=8).map(f64::from).collect()).unwrap();
        let (y, am) = maxpool3d_forward(&x).unwrap();
        assert_eq!(y.data(), &[8.0]);
        assert_eq!(am, vec![7]);
        let c = Tensor::filled([1, 2, 4, 6, 2], 3.0);
        let (y, _) = maxpool3d_forward(&c).unwrap();
        assert_eq!(y.dims(), [1, 2, 2, 3, 1]);
        assert!(y.data().iter().all(|&v| v == 3.0));
        assert!(maxpool3d_forward(&Tensor::zeros([1, 1, 3, 2, 2])).is_err());
    }

    #[test]
    fn pool_ties_go_to_first_voxel() {
        // every 2x2x2 block with a tie between two maxima at positions p < q
        for p in 0..8 {
            for q in p + 1..8 {
                let mut v = vec![0.0; 8];
                v[p] = 1.0;
                v[q] = 1.0;
                let x = Tensor::new([1, 1, 2, 2, 2], v).unwrap();
                let (_, am) = maxpool3d_forward(&x).unwrap();
                assert_eq!(am, vec![p]);
                let dx = maxpool3d_backward(&Tensor::filled([1; 5], 2.5), &am, x.dims());
                assert_eq!(dx.data()[p], 2.5);
                assert_eq!(dx.sum(), 2.5);
            }
        }
        let (_, am) = maxpool3d_forward(&Tensor::zeros([1, 1, 2, 2, 2])).unwrap();
        assert_eq!(am, vec![0]);
    }

    #[test]
    fn ramp_upsamples_with_half_pixel_centres() {
        let x = Tensor::new([1, 1, 1, 1, 2], vec![0.0, 1.0]).unwrap();
        let y = upsample_forward(&x, 2).unwrap();
        assert_eq!(y.dims(), [1, 1, 2, 2, 4]);
        for row in y.data().chunks(4) {
            assert_eq!(row, &[0.0, 0.25, 0.75, 1.0]);
        }
    }

    #[test]
    fn constant_stays_constant() {
        let y = upsample_forward(&Tensor::filled([1, 2, 2, 3, 1], 0.7), 4).unwrap();
        assert_eq!(y.dims(), [1, 2, 8, 12, 4]);
        assert!(y.data().iter().all(|&v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn upsample_adjoint() {
        let x = Tensor::new(
            [1, 2, 2, 3, 2],
            (0..24).map(|i| (i as f64 * 0.37).sin()).collect(),
        )
        .unwrap();
        for f in [2, 4, 8] {
            let y = upsample_forward(&x, f).unwrap();
            let g = y.map(|v| (v * 3.1).cos());
            let xt = upsample_backward(&g, x.dims(), f);
            assert!((y.dot(&g) - x.dot(&xt)).abs() < 1e-9);
        }
    }
}
