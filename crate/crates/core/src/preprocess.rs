//! Intensity standardization, brain bounding-box cropping, patch extraction
//! and divisibility padding.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::volio::{flat_index, voxel_count, Dims3, LabelMap, Volume4D};

/// Lower/upper percentiles for the clipped min-max scheme.
pub const CLIP_LOW_PERCENTILE: f64 = 0.01;
pub const CLIP_HIGH_PERCENTILE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Per-channel clip to the 1st/99th non-zero percentiles, then min-max to [0, 1].
    MinMaxClip,
    /// Per-channel z-score over non-zero voxels; zeros stay zero.
    ZScoreNonzero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocConfig {
    pub mode: NormMode,
    pub patch: Dims3,
    pub pad_multiple: usize,
}

impl Default for PreprocConfig {
    fn default() -> Self {
        PreprocConfig {
            mode: NormMode::MinMaxClip,
            patch: [128, 128, 128],
            pad_multiple: 8,
        }
    }
}

impl PreprocConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.patch.iter().any(|&p| p < 8) {
            errors.push(format!(
                "preprocess.patch components must be >= 8, got {:?}",
                self.patch
            ));
        }
        if self.pad_multiple == 0 {
            errors.push("preprocess.pad_multiple must be >= 1".into());
        }
    }
}

/// 0-based index of the nearest-rank `q`-quantile in a sorted list of length `n`.
pub fn nearest_rank_index(n: usize, q: f64) -> usize {
    assert!(n > 0, "nearest rank of an empty list");
    // the small slack absorbs representation error in products such as 0.99 * 100
    let rank = (q * n as f64 - 1e-9).ceil() as isize;
    (rank.clamp(1, n as isize) - 1) as usize
}

/// Nearest-rank quantile of an ascending-sorted slice.
pub fn nearest_rank<T: Copy>(sorted: &[T], q: f64) -> T {
    sorted[nearest_rank_index(sorted.len(), q)]
}

fn sorted_nonzero(channel: &[f32]) -> Vec<f32> {
    let mut v: Vec<f32> = channel.iter().copied().filter(|&x| x != 0.0).collect();
    v.sort_by(f32::total_cmp);
    v
}

/// Clip to the given non-zero percentiles, then min-max scale the whole channel.
///
/// The affine map sends the lower clip value to 0 and the upper to 1 and is
/// applied to every voxel, zeros included. A zero-width clip range sends
/// everything to 0.
pub fn clip_percentile_minmax_with(channel: &[f32], low_q: f64, high_q: f64) -> Result<Vec<f32>> {
    let nz = sorted_nonzero(channel);
    if nz.is_empty() {
        return Err(Error::Degenerate("channel has no non-zero voxels".into()));
    }
    let lo = nearest_rank(&nz, low_q);
    let hi = nearest_rank(&nz, high_q);
    let range = hi as f64 - lo as f64;
    Ok(channel
        .iter()
        .map(|&v| {
            if range > 0.0 {
                let c = v.clamp(lo, hi) as f64;
                ((c - lo as f64) / range) as f32
            } else {
                0.0
            }
        })
        .collect())
}

pub fn clip_percentile_minmax(channel: &[f32]) -> Result<Vec<f32>> {
    clip_percentile_minmax_with(channel, CLIP_LOW_PERCENTILE, CLIP_HIGH_PERCENTILE)
}

/// Z-score of the non-zero voxels with the population standard deviation.
pub fn zscore_nonzero(channel: &[f32]) -> Result<Vec<f32>> {
    let nz: Vec<f64> = channel
        .iter()
        .filter(|&&v| v != 0.0)
        .map(|&v| v as f64)
        .collect();
    if nz.is_empty() {
        return Err(Error::Degenerate("channel has no non-zero voxels".into()));
    }
    let n = nz.len() as f64;
    let mean = nz.iter().sum::<f64>() / n;
    let var = nz.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::Degenerate(
            "non-zero voxels have zero variance".into(),
        ));
    }
    Ok(channel
        .iter()
        .map(|&v| {
            if v == 0.0 {
                0.0
            } else {
                ((v as f64 - mean) / sd) as f32
            }
        })
        .collect())
}

/// Apply the configured standardization to every channel independently.
pub fn normalize(v: &Volume4D, mode: NormMode) -> Result<Volume4D> {
    let mut out = Vec::with_capacity(v.data().len());
    for c in 0..v.channels() {
        let ch = v.channel(c);
        let norm = match mode {
            NormMode::MinMaxClip => clip_percentile_minmax(ch),
            NormMode::ZScoreNonzero => zscore_nonzero(ch),
        }
        .map_err(|e| match e {
            Error::Degenerate(msg) => Error::Degenerate(format!("channel {c}: {msg}")),
            other => other,
        })?;
        out.extend(norm);
    }
    v.with_data(out)
}

/// Axis-aligned box, inclusive `min`, exclusive `max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl BBox {
    pub fn full(dims: Dims3) -> Self {
        BBox {
            min: [0; 3],
            max: dims,
        }
    }

    pub fn extent(&self) -> Dims3 {
        std::array::from_fn(|a| self.max[a] - self.min[a])
    }

    fn check(&self, dims: Dims3) -> Result<()> {
        for a in 0..3 {
            if self.min[a] >= self.max[a] || self.max[a] > dims[a] {
                return Err(Error::InvalidArgument(format!(
                    "box {:?}..{:?} is empty or outside volume {:?}",
                    self.min, self.max, dims
                )));
            }
        }
        Ok(())
    }
}

/// Tightest box containing every voxel that is non-zero in any channel.
pub fn brain_bounding_box(v: &Volume4D) -> Result<BBox> {
    let dims = v.spatial();
    let mut min = dims;
    let mut max = [0usize; 3];
    let mut any = false;
    for z in 0..dims[0] {
        for y in 0..dims[1] {
            for x in 0..dims[2] {
                let i = flat_index(dims, z, y, x);
                if (0..v.channels()).any(|c| v.channel(c)[i] != 0.0) {
                    any = true;
                    for (a, p) in [z, y, x].into_iter().enumerate() {
                        min[a] = min[a].min(p);
                        max[a] = max[a].max(p + 1);
                    }
                }
            }
        }
    }
    if !any {
        return Err(Error::Degenerate("volume has no non-zero voxel".into()));
    }
    Ok(BBox { min, max })
}

/// Copy the box out of one channel.
pub fn crop_channel<T: Copy>(data: &[T], dims: Dims3, b: &BBox) -> Vec<T> {
    let mut out = Vec::with_capacity(voxel_count(b.extent()));
    for z in b.min[0]..b.max[0] {
        for y in b.min[1]..b.max[1] {
            let row = flat_index(dims, z, y, 0);
            out.extend_from_slice(&data[row + b.min[2]..row + b.max[2]]);
        }
    }
    out
}

/// Place `data` (of `dims`) into a `fill`-initialized volume of `out_dims` at `offset`.
pub fn embed_channel<T: Copy>(
    data: &[T],
    dims: Dims3,
    out_dims: Dims3,
    offset: [usize; 3],
    fill: T,
) -> Vec<T> {
    let mut out = vec![fill; voxel_count(out_dims)];
    for z in 0..dims[0] {
        for y in 0..dims[1] {
            let src = flat_index(dims, z, y, 0);
            let dst = flat_index(out_dims, z + offset[0], y + offset[1], offset[2]);
            out[dst..dst + dims[2]].copy_from_slice(&data[src..src + dims[2]]);
        }
    }
    out
}

pub fn crop_to_bbox(v: &Volume4D, b: &BBox) -> Result<Volume4D> {
    let dims = v.spatial();
    b.check(dims)?;
    let e = b.extent();
    let mut data = Vec::with_capacity(v.channels() * voxel_count(e));
    for c in 0..v.channels() {
        data.extend(crop_channel(v.channel(c), dims, b));
    }
    Volume4D::new([v.channels(), e[0], e[1], e[2]], v.spacing(), data)
}

pub fn crop_labels_to_bbox(lm: &LabelMap, b: &BBox) -> Result<LabelMap> {
    b.check(lm.spatial())?;
    LabelMap::new(
        b.extent(),
        lm.spacing(),
        crop_channel(lm.labels(), lm.spatial(), b),
    )
}

fn embed_volume(v: &Volume4D, out_dims: Dims3, offset: [usize; 3]) -> Result<Volume4D> {
    let mut data = Vec::with_capacity(v.channels() * voxel_count(out_dims));
    for c in 0..v.channels() {
        data.extend(embed_channel(
            v.channel(c),
            v.spatial(),
            out_dims,
            offset,
            0.0,
        ));
    }
    Volume4D::new(
        [v.channels(), out_dims[0], out_dims[1], out_dims[2]],
        v.spacing(),
        data,
    )
}

/// Re-insert a cropped volume at its box position inside a zero volume of `dims`.
pub fn uncrop(v: &Volume4D, b: &BBox, dims: Dims3) -> Result<Volume4D> {
    if v.spatial() != b.extent() {
        return Err(Error::Shape("volume does not match box extent".into()));
    }
    b.check(dims)?;
    embed_volume(v, dims, b.min)
}

pub fn uncrop_labels(lm: &LabelMap, b: &BBox, dims: Dims3) -> Result<LabelMap> {
    if lm.spatial() != b.extent() {
        return Err(Error::Shape("labelmap does not match box extent".into()));
    }
    b.check(dims)?;
    LabelMap::new(
        dims,
        lm.spacing(),
        embed_channel(lm.labels(), lm.spatial(), dims, b.min, 0),
    )
}

/// Zero-pad symmetrically (extra voxel on the high side) up to at least `target`.
pub fn pad_symmetric(v: &Volume4D, lm: &LabelMap, target: Dims3) -> Result<(Volume4D, LabelMap)> {
    let dims = v.spatial();
    if lm.spatial() != dims {
        return Err(Error::Shape(format!(
            "image {:?} and labelmap {:?} differ",
            dims,
            lm.spatial()
        )));
    }
    let out: Dims3 = std::array::from_fn(|a| dims[a].max(target[a]));
    if out == dims {
        return Ok((v.clone(), lm.clone()));
    }
    let offset: [usize; 3] = std::array::from_fn(|a| (out[a] - dims[a]) / 2);
    let img = embed_volume(v, out, offset)?;
    let labels = LabelMap::new(
        out,
        lm.spacing(),
        embed_channel(lm.labels(), dims, out, offset, 0),
    )?;
    Ok((img, labels))
}

/// Uniform crop offset for each axis in `0..=dims-patch`.
pub fn random_crop_offset(dims: Dims3, patch: Dims3, rng: &mut Rng) -> [usize; 3] {
    std::array::from_fn(|a| rng.gen_range(0..=dims[a].saturating_sub(patch[a])))
}

/// Crop image and labels to `patch` at one shared uniform offset; smaller
/// inputs are padded symmetrically first.
pub fn random_crop_patch(
    v: &Volume4D,
    lm: &LabelMap,
    patch: Dims3,
    rng: &mut Rng,
) -> Result<(Volume4D, LabelMap)> {
    let (v, lm) = pad_symmetric(v, lm, patch)?;
    let offset = random_crop_offset(v.spatial(), patch, rng);
    let b = BBox {
        min: offset,
        max: std::array::from_fn(|a| offset[a] + patch[a]),
    };
    Ok((crop_to_bbox(&v, &b)?, crop_labels_to_bbox(&lm, &b)?))
}

/// Enough to undo [`pad_to_multiple`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaddingRecord {
    pub original: Dims3,
    pub padded: Dims3,
}

impl PaddingRecord {
    pub fn for_dims(dims: Dims3, multiple: usize) -> Self {
        let m = multiple.max(1);
        PaddingRecord {
            original: dims,
            padded: dims.map(|d| d.div_ceil(m) * m),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.original == self.padded
    }

    pub fn unpad_channel<T: Copy>(&self, data: &[T]) -> Vec<T> {
        crop_channel(data, self.padded, &BBox::full(self.original))
    }

    pub fn pad_channel<T: Copy>(&self, data: &[T], fill: T) -> Vec<T> {
        embed_channel(data, self.original, self.padded, [0; 3], fill)
    }
}

/// Zero-pad the high side of every spatial axis to a multiple of `m`.
pub fn pad_to_multiple(v: &Volume4D, m: usize) -> Result<(Volume4D, PaddingRecord)> {
    if m == 0 {
        return Err(Error::InvalidArgument("pad multiple must be >= 1".into()));
    }
    let rec = PaddingRecord::for_dims(v.spatial(), m);
    Ok((embed_volume(v, rec.padded, [0; 3])?, rec))
}

pub fn unpad(v: &Volume4D, rec: &PaddingRecord) -> Result<Volume4D> {
    if v.spatial() != rec.padded {
        return Err(Error::Shape(format!(
            "volume {:?} does not match padded dims {:?}",
            v.spatial(),
            rec.padded
        )));
    }
    crop_to_bbox(v, &BBox::full(rec.original))
}

/// Normalized, brain-cropped case ready for training or inference.
#[derive(Debug, Clone)]
pub struct PreparedCase {
    pub image: Volume4D,
    pub labels: Option<LabelMap>,
    pub bbox: BBox,
    pub original_dims: Dims3,
}

/// Standardize intensities and crop to the brain box.
pub fn prepare_case(v: &Volume4D, lm: Option<&LabelMap>, mode: NormMode) -> Result<PreparedCase> {
    let bbox = brain_bounding_box(v)?;
    let normed = normalize(v, mode)?;
    let labels = match lm {
        Some(l) => {
            if l.spatial() != v.spatial() {
                return Err(Error::Shape("image and labelmap dims differ".into()));
            }
            Some(crop_labels_to_bbox(l, &bbox)?)
        }
        None => None,
    };
    Ok(PreparedCase {
        image: crop_to_bbox(&normed, &bbox)?,
        labels,
        bbox,
        original_dims: v.spatial(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::volio::{generate_phantom, labelmap_to_regions};

    #[test]
    fn percentile_example_one_to_hundred() {
        let ch: Vec<f32> = (1..=100).map(|v| v as f32).collect();
        let out = clip_percentile_minmax(&ch).unwrap();
        // p1 = 1, p99 = 99
        assert_eq!(out[0], 0.0);
        assert_eq!(out[98], 1.0);
        assert_eq!(out[99], 1.0);
        assert!((out[49] - 49.0 / 98.0).abs() < 1e-7);
    }

    #[test]
    fn constant_channel_maps_to_zero() {
        let ch = vec![0.0, 5.0, 5.0, 5.0];
        assert_eq!(clip_percentile_minmax(&ch).unwrap(), vec![0.0; 4]);
        assert!(matches!(
            clip_percentile_minmax(&[0.0; 3]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn zscore_example() {
        let out = zscore_nonzero(&[0.0, 2.0, 4.0, 6.0]).unwrap();
        let s = (8.0f64 / 3.0).sqrt();
        assert_eq!(out[0], 0.0);
        assert!((out[1] as f64 + 2.0 / s).abs() < 1e-6);
        assert!(out[2].abs() < 1e-6);
        assert!((out[3] as f64 - 2.0 / s).abs() < 1e-6);
        assert!(matches!(
            zscore_nonzero(&[3.0, 3.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn bbox_single_voxel_and_union() {
        let mut v = Volume4D::zeros([4, 10, 8, 8], [1.0; 3]).unwrap();
        v.channel_mut(1)[flat_index([10, 8, 8], 2, 3, 4)] = 1.0;
        let b = brain_bounding_box(&v).unwrap();
        assert_eq!(b.min, [2, 3, 4]);
        assert_eq!(b.max, [3, 4, 5]);

        let mut v = Volume4D::zeros([4, 10, 8, 8], [1.0; 3]).unwrap();
        v.channel_mut(0)[flat_index([10, 8, 8], 0, 1, 1)] = 1.0;
        v.channel_mut(3)[flat_index([10, 8, 8], 9, 2, 2)] = -1.0;
        let b = brain_bounding_box(&v).unwrap();
        assert_eq!((b.min[0], b.max[0]), (0, 10));

        let empty = Volume4D::zeros([1, 2, 2, 2], [1.0; 3]).unwrap();
        assert!(brain_bounding_box(&empty).is_err());
    }

    #[test]
    fn crop_full_box_is_identity_and_out_of_bounds_fails() {
        let (v, lm) = generate_phantom(5, [16, 16, 16]).unwrap();
        let full = BBox::full(v.spatial());
        assert_eq!(crop_to_bbox(&v, &full).unwrap(), v);
        assert_eq!(crop_labels_to_bbox(&lm, &full).unwrap(), lm);
        let bad = BBox {
            min: [0; 3],
            max: [17, 16, 16],
        };
        assert!(crop_to_bbox(&v, &bad).is_err());
        let one = BBox {
            min: [3, 4, 5],
            max: [4, 5, 6],
        };
        let c = crop_to_bbox(&v, &one).unwrap();
        assert_eq!(c.spatial(), [1, 1, 1]);
        assert_eq!(c.get(2, 0, 0, 0), v.get(2, 3, 4, 5));
    }

    #[test]
    fn crop_then_uncrop_restores_interior() {
        let (v, _) = generate_phantom(6, [16, 16, 16]).unwrap();
        let b = brain_bounding_box(&v).unwrap();
        let back = uncrop(&crop_to_bbox(&v, &b).unwrap(), &b, v.spatial()).unwrap();
        // the box holds every non-zero voxel, so the round trip is exact
        assert_eq!(back, v);
    }

    #[test]
    fn equal_size_crop_is_identity() {
        let (v, lm) = generate_phantom(7, [16, 16, 16]).unwrap();
        let mut r = rng::seeded(0);
        assert_eq!(random_crop_offset([16; 3], [16; 3], &mut r), [0, 0, 0]);
        let (cv, cl) = random_crop_patch(&v, &lm, [16; 3], &mut r).unwrap();
        assert_eq!(cv, v);
        assert_eq!(cl, lm);
    }

    #[test]
    fn random_crop_keeps_alignment() {
        let (v, lm) = generate_phantom(8, [20, 20, 20]).unwrap();
        let mut r = rng::seeded(1);
        for _ in 0..5 {
            let (cv, cl) = random_crop_patch(&v, &lm, [16; 3], &mut r).unwrap();
            assert_eq!(cv.spatial(), [16; 3]);
            assert!(labelmap_to_regions(&cl).is_nested());
        }
        // smaller than the patch: padded first
        let (cv, cl) = random_crop_patch(&v, &lm, [24; 3], &mut r).unwrap();
        assert_eq!(cv.spatial(), [24; 3]);
        assert_eq!(cl.spatial(), [24; 3]);
        assert_eq!(cl.count(4), lm.count(4));
    }

    #[test]
    fn pad_arithmetic() {
        let v = Volume4D::zeros([1, 70, 8, 9], [1.0; 3]).unwrap();
        let (p, rec) = pad_to_multiple(&v, 8).unwrap();
        assert_eq!(p.spatial(), [72, 8, 16]);
        assert_eq!(unpad(&p, &rec).unwrap(), v);
        let v = Volume4D::zeros([1, 16, 8, 8], [1.0; 3]).unwrap();
        let (p, rec) = pad_to_multiple(&v, 8).unwrap();
        assert!(rec.is_identity());
        assert_eq!(p, v);
    }
}
