//! Deeply-supervised 3D U-Net with a dilated pseudo fifth stage.
//!
//! Encoder: four stages of two 3x3x3 conv blocks (widths w, 2w, 4w, 8w) with
//! 2x2x2 max pooling in between. After stage four, two dilation-2 conv blocks
//! run at the same resolution and are concatenated with the stage-four output.
//! The decoder mirrors the encoder with trilinear upsampling and skip
//! concatenation; its lowest stage is a single conv block. A 1x1x1 sigmoid
//! head produces the (ET, TC, WT) probabilities. Four auxiliary heads (after
//! the dilated block and after each decoder stage except the last) are
//! upsampled to full resolution for deep supervision.

mod loss;
mod model;

pub use loss::{dice_loss, dice_loss_value, dice_terms, total_loss, DiceLossSpec, DiceVariant};
pub use model::{
    build_model, forward, layer_plan, predict, ArchConfig, LayerSpec, ModelParams, NormKind,
    ParamVars, UNetOutputs, AUX_HEADS, SPATIAL_MULTIPLE, STAGES,
};
