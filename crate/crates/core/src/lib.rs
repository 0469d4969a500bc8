//! Deep-learning climate downscaling workbench.
//!
//! * [`grid`]: dense fields, pooling, bicubic resampling, FFT, GRD1 I/O.
//! * [`layers`]: differentiable building blocks with explicit backward passes.
//! * [`arch`]: the residual CNN, FNO and CNN-ViT super-resolution models.
//! * [`optim`]: Adam, the training and fine-tuning loops.
//! * [`data`]: manifests, region/patch extraction, statistics, synthetic data.
//! * [`eval`]: R²/MSE, the bicubic baseline and the transferability protocols.

pub mod arch;
pub mod data;
pub mod error;
pub mod eval;
pub mod grid;
pub mod layers;
pub mod optim;
mod par;

pub use error::{Error, Result};
pub use grid::{GridTensor, Real, Tensor};
pub use par::with_threads;
