//! Desk-scale brain tumor segmentation with self-ensembled, deeply-supervised
//! 3D U-Nets.
//!
//! The crate is organized bottom-up:
//!
//! - [`volio`]: volume and labelmap types, the SEGV container, region algebra
//!   and synthetic phantoms.
//! - [`preprocess`]: intensity standardization, brain bounding boxes, patch
//!   extraction and divisibility padding.
//! - [`augment`]: on-the-fly training augmentations.
//! - [`tensornet`]: a small reverse-mode autodiff engine over 5-axis tensors.
//! - [`unet3d`]: the encoder/decoder network with deep supervision and the
//!   soft Dice losses.
//! - [`train`]: Adam, learning-rate schedules, weight averaging and the two
//!   training pipelines.
//! - [`infer`]: test-time augmentation, ensembling, labelmap reconstruction and
//!   the two-ensemble merge.
//! - [`metrics`]: Dice, sensitivity, specificity and HD95.
//! - [`cli`]: JSON-configured commands behind the `voxelforge` binary.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod augment;
pub mod cli;
mod error;
pub mod infer;
pub mod metrics;
pub mod preprocess;
pub mod rng;
pub mod tensornet;
pub mod train;
pub mod unet3d;
pub mod volio;

pub use error::{Error, Result};
