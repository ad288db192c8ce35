//! Minimal reverse-mode autodiff over batched 5-axis tensors.
//!
//! Values live on a [`Tape`]; every op method records its output together
//! with a backward rule, and [`Tape::backward`] replays the record in reverse.
//! Only the operations the segmentation network needs are provided:
//! same-size 3D convolution (optionally dilated), group/instance
//! normalization, ReLU, sigmoid, 2x2x2 max pooling, trilinear upsampling and
//! channel concatenation.

mod checkpoint;
mod conv;
mod gradcheck;
mod norm;
mod ops;
mod resample;
mod tape;
mod tensor;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, NamedTensors,
};
pub use conv::{
    conv3d_backward_bias, conv3d_backward_input, conv3d_backward_weight, conv3d_forward, ConvSpec,
};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport, Mismatch};
pub use norm::{default_groups, group_norm_forward, NORM_EPS};
pub use ops::{concat_forward, sigmoid};
pub use resample::{
    interp_table, maxpool3d_backward, maxpool3d_forward, upsample_backward, upsample_forward,
};
pub use tape::{BackwardCtx, BackwardOp, Gradients, Tape, Var};
pub use tensor::{Dims5, Tensor};
