use crate::error::{Error, Result};
use crate::preprocess::nearest_rank;
use crate::volio::{flat_index, voxel_count, Dims3};

pub const HD_PERCENTILE: f64 = 0.95;

fn check(mask: &[bool], dims: Dims3) -> Result<()> {
    if mask.len() != voxel_count(dims) {
        return Err(Error::Shape(format!(
            "mask of {} voxels does not fill {dims:?}",
            mask.len()
        )));
    }
    Ok(())
}

/// Mask voxels with at least one of their six face neighbours outside the
/// mask; the volume border counts as outside.
pub fn surface_voxels(mask: &[bool], dims: Dims3) -> Result<Vec<[usize; 3]>> {
    check(mask, dims)?;
    let [zn, yn, xn] = dims;
    let inside = |z: usize, y: usize, x: usize| mask[flat_index(dims, z, y, x)];
    let mut out = Vec::new();
    for z in 0..zn {
        for y in 0..yn {
            for x in 0..xn {
                if !inside(z, y, x) {
                    continue;
                }
                let edge = z == 0
                    || y == 0
                    || x == 0
                    || z + 1 == zn
                    || y + 1 == yn
                    || x + 1 == xn
                    || !inside(z - 1, y, x)
                    || !inside(z + 1, y, x)
                    || !inside(z, y - 1, x)
                    || !inside(z, y + 1, x)
                    || !inside(z, y, x - 1)
                    || !inside(z, y, x + 1);
                if edge {
                    out.push([z, y, x]);
                }
            }
        }
    }
    Ok(out)
}

/// Length of the volume's diagonal in mm (the one-empty-mask penalty).
pub fn volume_diagonal(dims: Dims3, spacing: [f64; 3]) -> f64 {
    (0..3)
        .map(|a| (dims[a] as f64 * spacing[a]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Lower envelope of parabolas along one line (Felzenszwalb and Huttenlocher).
/// `f` holds squared distances, `s` is the sample spacing.
fn edt_1d(f: &[f64], s: f64, out: &mut [f64], v: &mut Vec<usize>, zb: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    zb.clear();
    let pos = |q: usize| q as f64 * s;
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    zb.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let b = ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p)))
                        / (2.0 * (pos(q) - pos(p)));
                    if b <= *zb.last().expect("same length as v") {
                        v.pop();
                        zb.pop();
                    } else {
                        v.push(q);
                        zb.push(b);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && zb[k + 1] < pos(q) {
            k += 1;
        }
        let d = (q as f64 - v[k] as f64) * s;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance (in mm²) from every voxel to the nearest
/// `true` voxel of `sites`; infinite everywhere when `sites` is empty.
pub fn squared_distance_transform(
    sites: &[bool],
    dims: Dims3,
    spacing: [f64; 3],
) -> Result<Vec<f64>> {
    check(sites, dims)?;
    let mut d: Vec<f64> = sites
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    let [zn, yn, xn] = dims;
    let (mut v, mut zb) = (Vec::new(), Vec::new());
    let strides = [yn * xn, xn, 1];
    for axis in 0..3 {
        let n = dims[axis];
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        for z in 0..if axis == 0 { 1 } else { zn } {
            for y in 0..if axis == 1 { 1 } else { yn } {
                for x in 0..if axis == 2 { 1 } else { xn } {
                    let base = flat_index(dims, z, y, x);
                    for (i, l) in line.iter_mut().enumerate() {
                        *l = d[base + i * strides[axis]];
                    }
                    edt_1d(&line, spacing[axis], &mut out, &mut v, &mut zb);
                    for (i, &o) in out.iter().enumerate() {
                        d[base + i * strides[axis]] = o;
                    }
                }
            }
        }
    }
    Ok(d)
}

/// Distance from each surface voxel of `from` to the nearest surface voxel
/// of `to`. Empty when `from` is empty; infinite entries when `to` is.
pub fn directed_distances(
    from: &[bool],
    to: &[bool],
    dims: Dims3,
    spacing: [f64; 3],
) -> Result<Vec<f64>> {
    let src = surface_voxels(from, dims)?;
    let mut dst_mask = vec![false; voxel_count(dims)];
    for [z, y, x] in surface_voxels(to, dims)? {
        dst_mask[flat_index(dims, z, y, x)] = true;
    }
    let edt = squared_distance_transform(&dst_mask, dims, spacing)?;
    Ok(src
        .into_iter()
        .map(|[z, y, x]| edt[flat_index(dims, z, y, x)].sqrt())
        .collect())
}

fn symmetric(
    pred: &[bool],
    reference: &[bool],
    dims: Dims3,
    spacing: [f64; 3],
    q: f64,
) -> Result<f64> {
    check(pred, dims)?;
    check(reference, dims)?;
    if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "spacing {spacing:?} must be positive"
        )));
    }
    let (pe, re) = (!pred.contains(&true), !reference.contains(&true));
    if pe && re {
        return Ok(0.0);
    }
    if pe || re {
        return Ok(volume_diagonal(dims, spacing));
    }
    let mut worst: f64 = 0.0;
    for (a, b) in [(pred, reference), (reference, pred)] {
        let mut d = directed_distances(a, b, dims, spacing)?;
        d.sort_by(f64::total_cmp);
        worst = worst.max(nearest_rank(&d, q));
    }
    Ok(worst)
}

/// Larger of the two directed nearest-rank 95th percentile surface distances.
pub fn hd95(pred: &[bool], reference: &[bool], dims: Dims3, spacing: [f64; 3]) -> Result<f64> {
    symmetric(pred, reference, dims, spacing, HD_PERCENTILE)
}

/// Symmetric surface Hausdorff distance (the 100th percentile).
pub fn hausdorff(pred: &[bool], reference: &[bool], dims: Dims3, spacing: [f64; 3]) -> Result<f64> {
    symmetric(pred, reference, dims, spacing, 1.0)
}
