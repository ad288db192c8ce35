//! Conversions between volumes and network tensors.

use crate::error::{Error, Result};
use crate::tensornet::Tensor;
use crate::volio::{labelmap_to_regions, Dims3, LabelMap, Region, RegionProbs, Volume4D};

/// A prepared (normalized, brain-cropped) training case.
#[derive(Debug, Clone)]
pub struct TrainingCase {
    pub id: String,
    pub image: Volume4D,
    pub labels: LabelMap,
}

/// Stack images along the batch axis: `[b, C, Z, Y, X]`.
pub fn image_tensor(images: &[&Volume4D]) -> Result<Tensor> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty image batch".into()))?;
    let (c, [z, y, x]) = (first.channels(), first.spatial());
    let mut data = Vec::with_capacity(images.len() * first.data().len());
    for v in images {
        if v.channels() != c || v.spatial() != [z, y, x] {
            return Err(Error::Shape("images in a batch must share dims".into()));
        }
        data.extend(v.data().iter().map(|&f| f64::from(f)));
    }
    Tensor::new([images.len(), c, z, y, x], data)
}

/// ET/TC/WT target masks as a `[b, 3, Z, Y, X]` tensor of 0/1.
pub fn target_tensor(labels: &[&LabelMap]) -> Result<Tensor> {
    let first = labels
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty label batch".into()))?;
    let [z, y, x] = first.spatial();
    let mut data = Vec::with_capacity(labels.len() * 3 * z * y * x);
    for l in labels {
        if l.spatial() != [z, y, x] {
            return Err(Error::Shape("labelmaps in a batch must share dims".into()));
        }
        let m = labelmap_to_regions(l);
        for r in Region::ALL {
            data.extend(m.get(r).iter().map(|&b| if b { 1.0 } else { 0.0 }));
        }
    }
    Tensor::new([labels.len(), 3, z, y, x], data)
}

/// Region probabilities of batch element `b` of a `[n, 3, Z, Y, X]` tensor.
pub fn probs_from_tensor(t: &Tensor, b: usize) -> Result<RegionProbs> {
    let [n, c, z, y, x] = t.dims();
    if c != 3 || b >= n {
        return Err(Error::Shape(format!(
            "cannot read regions of sample {b} from {:?}",
            t.dims()
        )));
    }
    let dims: Dims3 = [z, y, x];
    let ch = |r: Region| {
        t.plane(b, r.channel())
            .iter()
            .map(|p| p.clamp(0.0, 1.0))
            .collect()
    };
    RegionProbs::new(dims, ch(Region::Et), ch(Region::Tc), ch(Region::Wt))
}
