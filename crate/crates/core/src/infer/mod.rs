//! Inference: test-time augmentation, ensemble averaging, binarization,
//! labelmap reconstruction and the two-labelmap merge.

mod ensemble;
mod merge;
mod tta;

pub use ensemble::{
    binarize, infer_case, predict_regions, reconstruct, CaseInference, Ensemble, EnsembleSpec,
    RegionPrediction, DEFAULT_THRESHOLD,
};
pub use merge::{merge_labelmaps, merge_labelmaps_with, MergePolicy, MERGE_LABELS, MERGE_TABLE};
pub use tta::{
    apply_tta, apply_tta_shaped, enumerate_tta, invert_tta, invert_tta_shaped, transformed_dims,
    TtaTransform,
};
