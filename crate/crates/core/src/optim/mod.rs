//! Adam, the mini-batch training loop and fine-tuning on a seeded subset.

mod adam;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use train::{fine_tune, fine_tune_indices, train, Artifacts, EpochRecord, TrainHistory, TrainingConfig};
