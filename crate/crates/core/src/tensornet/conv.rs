//! Same-size 3D cross-correlation with optional dilation.
//!
//! Kernels run row by row: for every (output channel, input channel, kz, ky)
//! the three x-taps are fused into one pass over contiguous rows.

use serde::{Deserialize, Serialize};

use super::tape::{BackwardCtx, BackwardOp, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// 1 or 3
    pub kernel: usize,
    /// 1 or 2
    pub dilation: usize,
}

impl ConvSpec {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        dilation: usize,
    ) -> Result<Self> {
        let spec = ConvSpec {
            in_channels,
            out_channels,
            kernel,
            dilation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn k3(in_channels: usize, out_channels: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: 3,
            dilation: 1,
        }
    }

    pub fn k1(in_channels: usize, out_channels: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: 1,
            dilation: 1,
        }
    }

    pub fn dilated(in_channels: usize, out_channels: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: 3,
            dilation: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.kernel, 1 | 3) {
            return Err(Error::InvalidArgument(format!(
                "kernel {} not in {{1,3}}",
                self.kernel
            )));
        }
        if !matches!(self.dilation, 1 | 2) {
            return Err(Error::InvalidArgument(format!(
                "dilation {} not in {{1,2}}",
                self.dilation
            )));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::InvalidArgument("conv channels must be >= 1".into()));
        }
        Ok(())
    }

    /// Zero padding that preserves spatial dims.
    pub fn padding(&self) -> usize {
        self.dilation * (self.kernel - 1) / 2
    }

    pub fn weight_dims(&self) -> [usize; 5] {
        let k = self.kernel;
        [self.out_channels, self.in_channels, k, k, k]
    }

    pub fn bias_dims(&self) -> [usize; 5] {
        [self.out_channels, 1, 1, 1, 1]
    }

    fn taps(&self) -> usize {
        self.kernel.pow(3)
    }

    /// Signed offset of kernel index `k` along one axis.
    fn offset(&self, k: usize) -> isize {
        (k * self.dilation) as isize - self.padding() as isize
    }
}

/// Rows along one axis where both `i` and `i + off` lie inside `0..n`.
fn valid_range(n: usize, off: isize) -> std::ops::Range<usize> {
    let lo = (-off).max(0) as usize;
    let hi = (n as isize - off.max(0)).max(0) as usize;
    lo.min(hi)..hi
}

/// `out[x] += Σ_t w[t] · inp[x + offs[t]]` for the in-bounds terms.
#[inline]
fn row_accumulate(out: &mut [f64], inp: &[f64], w: &[f64], offs: &[isize]) {
    let n = out.len();
    if w.len() == 1 {
        let w0 = w[0];
        for (o, &i) in out.iter_mut().zip(inp) {
            *o += w0 * i;
        }
        return;
    }
    // three symmetric taps at -d, 0, +d
    let d = offs[2] as usize;
    let (w0, w1, w2) = (w[0], w[1], w[2]);
    if n > 2 * d {
        let body = &mut out[d..n - d];
        let a = &inp[..n - 2 * d];
        let b = &inp[d..n - d];
        let c = &inp[2 * d..];
        for (((o, &a), &b), &c) in body.iter_mut().zip(a).zip(b).zip(c) {
            *o += w0 * a + w1 * b + w2 * c;
        }
    }
    let head = d.min(n);
    for x in (0..head).chain(n.saturating_sub(d).max(head)..n) {
        let mut acc = w1 * inp[x];
        if x >= d {
            acc += w0 * inp[x - d];
        }
        if x + d < n {
            acc += w2 * inp[x + d];
        }
        out[x] += acc;
    }
}

/// `acc[t] += Σ_x g[x] · inp[x + offs[t]]`.
#[inline]
fn row_correlate(acc: &mut [f64], g: &[f64], inp: &[f64], offs: &[isize]) {
    let n = g.len();
    for (a, &off) in acc.iter_mut().zip(offs) {
        let r = valid_range(n, off);
        if r.is_empty() {
            continue;
        }
        let shifted = &inp[(r.start as isize + off) as usize..(r.end as isize + off) as usize];
        *a += g[r].iter().zip(shifted).map(|(x, y)| x * y).sum::<f64>();
    }
}

struct Geometry {
    spatial: [usize; 3],
    offs: Vec<isize>,
}

impl Geometry {
    fn new(spec: &ConvSpec, spatial: [usize; 3]) -> Self {
        Geometry {
            spatial,
            offs: (0..spec.kernel).map(|k| spec.offset(k)).collect(),
        }
    }

    /// Visit every (kz, ky) pair of rows: `f(kz, ky, out_row_start, in_row_start)`.
    fn for_each_row_pair(&self, mut f: impl FnMut(usize, usize, usize, usize)) {
        let [zn, yn, xn] = self.spatial;
        for (kz, &dz) in self.offs.iter().enumerate() {
            for (ky, &dy) in self.offs.iter().enumerate() {
                for z in valid_range(zn, dz) {
                    let zs = (z as isize + dz) as usize;
                    for y in valid_range(yn, dy) {
                        let ys = (y as isize + dy) as usize;
                        f(kz, ky, (z * yn + y) * xn, (zs * yn + ys) * xn);
                    }
                }
            }
        }
    }
}

fn check_conv(x: &Tensor, w: &Tensor, b: Option<&Tensor>, spec: &ConvSpec) -> Result<()> {
    spec.validate()?;
    if x.channels() != spec.in_channels {
        return Err(Error::Shape(format!(
            "conv expects {} input channels, got {}",
            spec.in_channels,
            x.channels()
        )));
    }
    if w.dims() != spec.weight_dims() {
        return Err(Error::Shape(format!(
            "conv weight dims {:?}, expected {:?}",
            w.dims(),
            spec.weight_dims()
        )));
    }
    if let Some(b) = b {
        if b.dims() != spec.bias_dims() {
            return Err(Error::Shape(format!("conv bias dims {:?}", b.dims())));
        }
    }
    Ok(())
}

/// Forward cross-correlation.
pub fn conv3d_forward(
    x: &Tensor,
    w: &Tensor,
    b: Option<&Tensor>,
    spec: &ConvSpec,
) -> Result<Tensor> {
    check_conv(x, w, b, spec)?;
    let [n, _, zn, yn, xn] = x.dims();
    let co_n = spec.out_channels;
    let ci_n = spec.in_channels;
    let k = spec.kernel;
    let taps = spec.taps();
    let geo = Geometry::new(spec, [zn, yn, xn]);
    let mut out = Tensor::zeros([n, co_n, zn, yn, xn]);
    for s in 0..n {
        for co in 0..co_n {
            let plane = out.plane_mut(s, co);
            if let Some(b) = b {
                plane.fill(b.data()[co]);
            }
            for ci in 0..ci_n {
                let inp = x.plane(s, ci);
                let wk = &w.data()[(co * ci_n + ci) * taps..(co * ci_n + ci + 1) * taps];
                geo.for_each_row_pair(|kz, ky, o, i| {
                    let wr = &wk[(kz * k + ky) * k..(kz * k + ky + 1) * k];
                    row_accumulate(&mut plane[o..o + xn], &inp[i..i + xn], wr, &geo.offs);
                });
            }
        }
    }
    Ok(out)
}

/// Gradient with respect to the input.
pub fn conv3d_backward_input(g: &Tensor, w: &Tensor, spec: &ConvSpec) -> Tensor {
    let [n, _, zn, yn, xn] = g.dims();
    let (co_n, ci_n, k, taps) = (
        spec.out_channels,
        spec.in_channels,
        spec.kernel,
        spec.taps(),
    );
    let geo = Geometry::new(spec, [zn, yn, xn]);
    // transposed taps: reversed weights, same offset set
    let mut dx = Tensor::zeros([n, ci_n, zn, yn, xn]);
    let mut wr = vec![0.0; k];
    for s in 0..n {
        for ci in 0..ci_n {
            let plane = dx.plane_mut(s, ci);
            for co in 0..co_n {
                let gp = g.plane(s, co);
                let wk = &w.data()[(co * ci_n + ci) * taps..(co * ci_n + ci + 1) * taps];
                geo.for_each_row_pair(|kz, ky, o, i| {
                    let src = &wk[(kz * k + ky) * k..(kz * k + ky + 1) * k];
                    for (t, v) in wr.iter_mut().enumerate() {
                        *v = src[k - 1 - t];
                    }
                    row_accumulate(&mut plane[i..i + xn], &gp[o..o + xn], &wr, &geo.offs);
                });
            }
        }
    }
    dx
}

/// Gradient with respect to the weights.
pub fn conv3d_backward_weight(g: &Tensor, x: &Tensor, spec: &ConvSpec) -> Tensor {
    let [n, _, zn, yn, xn] = g.dims();
    let (co_n, ci_n, k, taps) = (
        spec.out_channels,
        spec.in_channels,
        spec.kernel,
        spec.taps(),
    );
    let geo = Geometry::new(spec, [zn, yn, xn]);
    let mut dw = Tensor::zeros(spec.weight_dims());
    for s in 0..n {
        for co in 0..co_n {
            let gp = g.plane(s, co);
            for ci in 0..ci_n {
                let inp = x.plane(s, ci);
                let base = (co * ci_n + ci) * taps;
                let wk = &mut dw.data_mut()[base..base + taps];
                geo.for_each_row_pair(|kz, ky, o, i| {
                    let acc = &mut wk[(kz * k + ky) * k..(kz * k + ky + 1) * k];
                    // input row start `i` already includes the z/y shift
                    row_correlate(acc, &gp[o..o + xn], &inp[i..i + xn], &geo.offs);
                });
            }
        }
    }
    dw
}

pub fn conv3d_backward_bias(g: &Tensor) -> Tensor {
    let [n, c, ..] = g.dims();
    let mut db = vec![0.0; c];
    for s in 0..n {
        for (co, d) in db.iter_mut().enumerate() {
            *d += g.plane(s, co).iter().sum::<f64>();
        }
    }
    Tensor::vector(db)
}

struct Conv3dOp {
    spec: ConvSpec,
    has_bias: bool,
}

impl BackwardOp for Conv3dOp {
    fn name(&self) -> &'static str {
        "conv3d"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let g = ctx.grad_output;
        let (x, w) = (ctx.inputs[0], ctx.inputs[1]);
        let mut out = vec![
            ctx.needs_grad[0].then(|| conv3d_backward_input(g, w, &self.spec)),
            ctx.needs_grad[1].then(|| conv3d_backward_weight(g, x, &self.spec)),
        ];
        if self.has_bias {
            out.push(ctx.needs_grad[2].then(|| conv3d_backward_bias(g)));
        }
        Ok(out)
    }
}

impl Tape {
    pub fn conv3d(&mut self, x: Var, w: Var, b: Option<Var>, spec: ConvSpec) -> Result<Var> {
        let out = conv3d_forward(
            self.value(x),
            self.value(w),
            b.map(|b| self.value(b)),
            &spec,
        )?;
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(
            out,
            &inputs,
            Box::new(Conv3dOp {
                spec,
                has_bias: b.is_some(),
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct per-voxel summation, independent of the row kernels.
    fn naive(x: &Tensor, w: &Tensor, b: &Tensor, spec: &ConvSpec) -> Tensor {
        let [n, ci_n, zn, yn, xn] = x.dims();
        let k = spec.kernel as isize;
        let d = spec.dilation as isize;
        let p = spec.padding() as isize;
        let mut out = Tensor::zeros([n, spec.out_channels, zn, yn, xn]);
        for s in 0..n {
            for co in 0..spec.out_channels {
                for z in 0..zn as isize {
                    for y in 0..yn as isize {
                        for xx in 0..xn as isize {
                            let mut acc = b.data()[co];
                            for ci in 0..ci_n {
                                for kz in 0..k {
                                    for ky in 0..k {
                                        for kx in 0..k {
                                            let (sz, sy, sx) =
                                                (z + kz * d - p, y + ky * d - p, xx + kx * d - p);
                                            if sz < 0
                                                || sy < 0
                                                || sx < 0
                                                || sz >= zn as isize
                                                || sy >= yn as isize
                                                || sx >= xn as isize
                                            {
                                                continue;
                                            }
                                            let xi = (((s * ci_n + ci) * zn + sz as usize) * yn
                                                + sy as usize)
                                                * xn
                                                + sx as usize;
                                            let wi = ((((co * ci_n + ci) as isize * k + kz) * k
                                                + ky)
                                                * k
                                                + kx)
                                                as usize;
                                            acc += x.data()[xi] * w.data()[wi];
                                        }
                                    }
                                }
                            }
                            let oi = (((s * spec.out_channels + co) * zn + z as usize) * yn
                                + y as usize)
                                * xn
                                + xx as usize;
                            out.data_mut()[oi] = acc;
                        }
                    }
                }
            }
        }
        out
    }

    fn pseudo(dims: [usize; 5], seed: u64) -> Tensor {
        let mut state = seed;
        let n = dims.iter().product();
        let data = (0..n)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        Tensor::new(dims, data).unwrap()
    }

    #[test]
    fn matches_naive_summation() {
        for spec in [
            ConvSpec::k3(2, 3),
            ConvSpec::dilated(2, 2),
            ConvSpec::k1(3, 2),
        ] {
            for dims in [
                [2, spec.in_channels, 5, 4, 6],
                [1, spec.in_channels, 3, 3, 3],
                [1, spec.in_channels, 2, 5, 1],
            ] {
                let x = pseudo(dims, 1);
                let w = pseudo(spec.weight_dims(), 2);
                let b = pseudo(spec.bias_dims(), 3);
                let fast = conv3d_forward(&x, &w, Some(&b), &spec).unwrap();
                let slow = naive(&x, &w, &b, &spec);
                assert!(fast.max_abs_diff(&slow) < 1e-12, "{spec:?} {dims:?}");
            }
        }
    }

    #[test]
    fn one_by_one_identity() {
        let x = pseudo([1, 1, 3, 4, 5], 9);
        let w = Tensor::filled([1, 1, 1, 1, 1], 1.0);
        let y = conv3d_forward(&x, &w, None, &ConvSpec::k1(1, 1)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_kernel_on_constant_interior() {
        let x = Tensor::filled([1, 1, 7, 7, 7], 1.0);
        let w = Tensor::filled([1, 1, 3, 3, 3], 1.0);
        let y = conv3d_forward(&x, &w, None, &ConvSpec::k3(1, 1)).unwrap();
        assert_eq!(y.data()[(3 * 7 + 3) * 7 + 3], 27.0);
        // corner sees 2x2x2 in-bounds voxels
        assert_eq!(y.data()[0], 8.0);
    }

    #[test]
    fn adjoint_identities() {
        for (spec, sp) in [
            (ConvSpec::k3(2, 3), [4, 5, 6]),
            (ConvSpec::dilated(3, 2), [4, 5, 6]),
            (ConvSpec::k1(2, 2), [4, 5, 6]),
            (ConvSpec::dilated(2, 2), [1, 1, 1]),
            (ConvSpec::k3(2, 2), [1, 2, 1]),
        ] {
            let x = pseudo([2, spec.in_channels, sp[0], sp[1], sp[2]], 4);
            let w = pseudo(spec.weight_dims(), 5);
            let g = pseudo([2, spec.out_channels, sp[0], sp[1], sp[2]], 6);
            let ax = conv3d_forward(&x, &w, None, &spec).unwrap();
            let atg = conv3d_backward_input(&g, &w, &spec);
            assert!((ax.dot(&g) - x.dot(&atg)).abs() < 1e-9);
            // linear in the weights too
            let dw = conv3d_backward_weight(&g, &x, &spec);
            assert!((ax.dot(&g) - w.dot(&dw)).abs() < 1e-9);
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let x = Tensor::zeros([1, 2, 4, 4, 4]);
        let w = Tensor::zeros(ConvSpec::k3(3, 1).weight_dims());
        assert!(conv3d_forward(&x, &w, None, &ConvSpec::k3(3, 1)).is_err());
        assert!(ConvSpec::new(1, 1, 5, 1).is_err());
        assert!(ConvSpec::new(1, 1, 3, 3).is_err());
    }
}
