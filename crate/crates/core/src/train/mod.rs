//! Optimization: Adam, learning-rate schedules, stochastic weight averaging,
//! fold splitting, training-set filtering and the two training pipelines.

mod adam;
mod data;
mod folds;
mod pipeline;
mod schedule;
mod swa;

pub use adam::{adam_step, AdamConfig, AdamState, Optimizer};
pub use data::{image_tensor, probs_from_tensor, target_tensor, TrainingCase};
pub use folds::{
    filter_training_set, five_fold_split, k_fold_split, select_best_epoch, FoldSplit, FOLDS,
};
pub use pipeline::{
    case_loss, train, train_pipeline_a, train_pipeline_b, EpochRecord, Phase, Pipeline,
    TrainConfig, TrainManifest, TrainOutcome,
};
pub use schedule::{
    cosine_decay, cosine_lr, swa_cycle_lr, IterationUnit, ScheduleA, ScheduleB, SwaConfig,
};
pub use swa::{swa_update, SwaState};
