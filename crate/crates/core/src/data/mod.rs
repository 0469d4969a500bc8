//! Dataset manifests, region and patch extraction, LR/HR pair synthesis,
//! normalization statistics and synthetic data.
//!
//! Fields are stored with latitude rows running north to south and
//! longitudes in −180..180.

mod manifest;
mod patches;
mod region;
mod set;
mod stats;
mod synth;

pub use manifest::{ingest, sidecar_path, write_sample, DatasetManifest, SampleMeta};
pub use patches::{make_patches, patch_samples, synthesize_pairs, SamplePair};
pub use region::{extract_region, region_window, Region};
pub use set::PairSet;
pub use stats::{compute_norm_stats, stats_from_fields, StatsTable, VariableStats};
pub use synth::{spectral_band, synth_dataset, synthetic_field, SynthKind, SynthOptions};
