//! R²/MSE metrics, model and bicubic evaluation, the transferability
//! protocols and their reports.

mod evaluate;
mod metrics;
mod protocol;
mod report;

pub use evaluate::{emit_error_grids, evaluate_model, evaluate_with_threads, grid_path, Metrics, Predictor};
pub use metrics::{mse, r2};
pub use protocol::{
    check_leakage, run_protocol, ArchOverrides, ArchPreset, HeldOut, Mode, ModelChoice, ProtocolKind, ProtocolSpec,
    RunOptions,
};
pub use report::{sha256_hex, MetricsReport, Provenance, ReportRow};
