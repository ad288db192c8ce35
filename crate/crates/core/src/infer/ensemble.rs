use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::tta::{
    apply_tta_shaped, enumerate_tta, invert_tta_shaped, transformed_dims, TtaTransform,
};
use crate::error::{Error, Result};
use crate::preprocess::{pad_to_multiple, prepare_case, uncrop_labels, NormMode};
use crate::tensornet::{read_checkpoint, Tensor};
use crate::train::{image_tensor, probs_from_tensor};
use crate::unet3d::{predict, ArchConfig, ModelParams, SPATIAL_MULTIPLE};
use crate::volio::{
    regions_to_labelmap, voxel_count, LabelMap, RegionMasks, RegionProbs, Volume4D,
};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Serializable description of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub checkpoints: Vec<PathBuf>,
    pub tta: bool,
    pub threshold: f64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            checkpoints: Vec::new(),
            tta: true,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.checkpoints.is_empty() {
            errors.push("infer.checkpoints must list at least one checkpoint".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            errors.push(format!(
                "infer.threshold {} must lie in (0,1)",
                self.threshold
            ));
        }
    }

    /// Read every checkpoint against `arch`.
    pub fn load(&self, arch: &ArchConfig) -> Result<Ensemble> {
        let mut errors = Vec::new();
        self.validate(&mut errors);
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        let models = self
            .checkpoints
            .iter()
            .map(|p| ModelParams::from_named(*arch, read_checkpoint(p)?))
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(models, self.tta, self.threshold)
    }
}

/// Loaded models plus inference settings.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub models: Vec<ModelParams>,
    pub tta: bool,
    pub threshold: f64,
}

impl Ensemble {
    pub fn new(models: Vec<ModelParams>, tta: bool, threshold: f64) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidArgument(
                "an ensemble needs at least one model".into(),
            ));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold {threshold} must lie in (0,1)"
            )));
        }
        Ok(Ensemble {
            models,
            tta,
            threshold,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RegionPrediction {
    pub probs: RegionProbs,
    pub transforms: Vec<TtaTransform>,
    pub forward_passes: usize,
}

/// Mean region probabilities over every model and every transform.
///
/// The volume is zero-padded to a multiple of 8 first and the mean is cropped
/// back to the input dims. Summation runs in model-major, transform-minor order.
pub fn predict_regions(ens: &Ensemble, v: &Volume4D) -> Result<RegionPrediction> {
    let (padded, rec) = pad_to_multiple(v, SPATIAL_MULTIPLE)?;
    let dims = padded.spatial();
    let transforms = if ens.tta {
        enumerate_tta()
    } else {
        vec![TtaTransform::IDENTITY]
    };
    let n = voxel_count(dims);
    let mut sum = vec![0.0f64; 3 * n];
    let mut passes = 0;
    for model in &ens.models {
        for &t in &transforms {
            let data = (0..padded.channels())
                .map(|c| apply_tta_shaped(t, padded.channel(c), dims).map(|r| r.0))
                .collect::<Result<Vec<_>>>()?
                .concat();
            let td = transformed_dims(t, dims);
            let x = image_tensor(&[&Volume4D::new(
                [padded.channels(), td[0], td[1], td[2]],
                padded.spacing(),
                data,
            )?])?;
            let y = predict(model, &x)?;
            for (c, acc) in sum.chunks_mut(n).enumerate() {
                let (back, _) = invert_tta_shaped(t, y.plane(0, c), td)?;
                for (a, b) in acc.iter_mut().zip(back) {
                    *a += b;
                }
            }
            passes += 1;
        }
    }
    let inv = 1.0 / passes as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s * inv).collect();
    let t = Tensor::new([1, 3, dims[0], dims[1], dims[2]], mean)?;
    let full = probs_from_tensor(&t, 0)?;
    let probs = RegionProbs::new(
        rec.original,
        rec.unpad_channel(&full.et),
        rec.unpad_channel(&full.tc),
        rec.unpad_channel(&full.wt),
    )?;
    Ok(RegionPrediction {
        probs,
        transforms,
        forward_passes: passes,
    })
}

/// `p >= threshold` per region.
pub fn binarize(p: &RegionProbs, threshold: f64) -> Result<RegionMasks> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} must lie in (0,1)"
        )));
    }
    let b = |v: &[f64]| v.iter().map(|&x| x >= threshold).collect();
    RegionMasks::new(p.dims, b(&p.et), b(&p.tc), b(&p.wt))
}

pub fn reconstruct(m: &RegionMasks, spacing_mm: [f32; 3]) -> Result<LabelMap> {
    regions_to_labelmap(m, spacing_mm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseInference {
    pub case: String,
    pub forward_passes: usize,
    pub transforms: usize,
    pub seconds: f64,
}

/// Raw case to labelmap: normalize, crop to the brain, predict, binarize,
/// reconstruct and paste back into the original grid.
pub fn infer_case(
    ens: &Ensemble,
    id: &str,
    v: &Volume4D,
    mode: NormMode,
) -> Result<(LabelMap, CaseInference)> {
    let start = Instant::now();
    let prep = prepare_case(v, None, mode)?;
    let pred = predict_regions(ens, &prep.image)?;
    let masks = binarize(&pred.probs, ens.threshold)?;
    let cropped = reconstruct(&masks, v.spacing())?;
    let labels = uncrop_labels(&cropped, &prep.bbox, prep.original_dims)?;
    log::info!("case {id}: {} predictions", pred.forward_passes);
    Ok((
        labels,
        CaseInference {
            case: id.to_string(),
            forward_passes: pred.forward_passes,
            transforms: pred.transforms.len(),
            seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_inclusive() {
        let p =
            RegionProbs::new([1, 1, 3], vec![0.5, 0.49, 1.0], vec![0.0; 3], vec![0.7; 3]).unwrap();
        let m = binarize(&p, 0.5).unwrap();
        assert_eq!(m.et, vec![true, false, true]);
        assert!(m.tc.iter().all(|&b| !b));
        assert!(binarize(&p, 1.0).is_err());
    }
}
