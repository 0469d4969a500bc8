//! Transferability protocols: spatial, variable, product and
//! two-simulation (zero-shot vs fine-tuned), with leakage guards that run
//! before any data is touched.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::{sha256_hex, MetricsReport, Provenance, ReportRow};
use super::{evaluate_model, Predictor};
use crate::arch::{ArchitectureSpec, Checkpoint, Family, Model};
use crate::data::{
    patch_samples, stats_from_fields, synthesize_pairs, DatasetManifest, PairSet, Region, SampleMeta, StatsTable,
};
use crate::error::{Error, Result};
use crate::grid::{avg_pool, GridTensor};
use crate::optim::{fine_tune, train, Artifacts, TrainingConfig};
use crate::par::with_threads;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Spatial,
    Variable,
    Product,
    TwoSimulation,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Spatial => "spatial",
            ProtocolKind::Variable => "variable",
            ProtocolKind::Product => "product",
            ProtocolKind::TwoSimulation => "two-simulation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ZeroShot,
    FineTune,
}

impl Mode {
    pub fn short(self) -> &'static str {
        match self {
            Mode::ZeroShot => "ZS",
            Mode::FineTune => "FT",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    Cnn,
    Fno,
    CnnVit,
    Bicubic,
}

impl ModelChoice {
    pub const ALL: [ModelChoice; 4] = [
        ModelChoice::Cnn,
        ModelChoice::Fno,
        ModelChoice::CnnVit,
        ModelChoice::Bicubic,
    ];

    pub fn family(self) -> Option<Family> {
        match self {
            ModelChoice::Cnn => Some(Family::Cnn),
            ModelChoice::Fno => Some(Family::Fno),
            ModelChoice::CnnVit => Some(Family::CnnVit),
            ModelChoice::Bicubic => None,
        }
    }

    pub fn name(self) -> &'static str {
        self.family().map(Family::name).unwrap_or("bicubic")
    }
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What the evaluation holds out from training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeldOut {
    Region(Region),
    Variable(String),
    Product(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchPreset {
    #[default]
    Full,
    Reduced,
}

impl ArchPreset {
    /// Preset for `family`/`scale` sized for `hr_size` patches, with
    /// `overrides` applied and the result validated.
    pub fn build(self, family: Family, scale: usize, hr_size: usize, overrides: &ArchOverrides) -> Result<ArchitectureSpec> {
        let mut a = match self {
            ArchPreset::Full => ArchitectureSpec::full(family, scale),
            ArchPreset::Reduced => ArchitectureSpec::reduced(family, scale, hr_size),
        };
        a.hr_size = hr_size;
        overrides.apply(&mut a);
        a.validate()?;
        a.check_hr_size(hr_size, hr_size)?;
        Ok(a)
    }
}

/// Per-field overrides applied on top of the preset.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchOverrides {
    pub width: Option<usize>,
    pub depth: Option<usize>,
    pub modes: Option<usize>,
    pub heads: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub ff_dim: Option<usize>,
    pub patch_size: Option<usize>,
}

impl ArchOverrides {
    pub fn apply(&self, a: &mut ArchitectureSpec) {
        a.width = self.width.unwrap_or(a.width);
        a.depth = self.depth.unwrap_or(a.depth);
        a.modes = self.modes.unwrap_or(a.modes);
        a.heads = self.heads.unwrap_or(a.heads);
        a.hidden_dim = self.hidden_dim.unwrap_or(a.hidden_dim);
        a.ff_dim = self.ff_dim.unwrap_or(a.ff_dim);
        a.patch_size = self.patch_size.unwrap_or(a.patch_size);
    }
}

fn default_scales() -> Vec<usize> {
    vec![2, 8]
}
fn default_modes() -> Vec<Mode> {
    vec![Mode::ZeroShot]
}
fn default_fraction() -> f64 {
    0.30
}
fn default_models() -> Vec<ModelChoice> {
    ModelChoice::ALL.to_vec()
}
fn default_patch() -> usize {
    64
}
fn train_tag() -> String {
    "train".into()
}
fn test_tag() -> String {
    "test".into()
}

/// One experiment. Manifest and checkpoint paths are relative to the
/// directory of the spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub train_manifests: Vec<PathBuf>,
    pub eval_manifest: PathBuf,
    pub held_out: HeldOut,
    #[serde(default = "default_scales")]
    pub scales: Vec<usize>,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default = "default_fraction")]
    pub fine_tune_fraction: f64,
    #[serde(default = "default_models")]
    pub models: Vec<ModelChoice>,
    #[serde(default)]
    pub seed: u64,
    /// HR patch side cut from every field.
    #[serde(default = "default_patch")]
    pub patch_size: usize,
    #[serde(default)]
    pub architecture: ArchPreset,
    #[serde(default)]
    pub overrides: ArchOverrides,
    #[serde(default)]
    pub training: TrainingConfig,
    /// Settings for the fine-tune stage; defaults to `training`.
    #[serde(default)]
    pub fine_tuning: Option<TrainingConfig>,
    #[serde(default = "train_tag")]
    pub train_split: String,
    #[serde(default = "test_tag")]
    pub eval_split: String,
    /// Split of the evaluation manifest used for fine-tuning.
    #[serde(default = "train_tag")]
    pub fine_tune_split: String,
    /// Pre-trained weights keyed `<model>-x<scale>`; missing keys are trained.
    #[serde(default)]
    pub checkpoints: BTreeMap<String, PathBuf>,
}

impl ProtocolSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let spec: Self = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Structural checks that need no manifests.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        match (self.kind, &self.held_out) {
            (ProtocolKind::Spatial, HeldOut::Region(r)) => {
                if let Err(e) = r.validate() {
                    bad.push(e.to_string());
                }
            }
            (ProtocolKind::Variable, HeldOut::Variable(_)) => {}
            (ProtocolKind::Product | ProtocolKind::TwoSimulation, HeldOut::Product(_)) => {}
            (k, h) => bad.push(format!("{} protocol cannot hold out {h:?}", k.name())),
        }
        if self.train_manifests.is_empty() {
            bad.push("train_manifests is empty".into());
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| ![2, 8].contains(s)) {
            bad.push(format!("scales must be a non-empty subset of {{2, 8}}, got {:?}", self.scales));
        }
        for &s in &self.scales {
            if self.patch_size % s != 0 || self.patch_size / s < 4 {
                bad.push(format!(
                    "patch_size {} must be a multiple of {s} giving LR fields of at least 4 cells",
                    self.patch_size
                ));
            }
        }
        if self.models.is_empty() {
            bad.push("models is empty".into());
        }
        if self.modes.is_empty() {
            bad.push("modes is empty".into());
        }
        if !(self.fine_tune_fraction > 0.0 && self.fine_tune_fraction <= 1.0) {
            bad.push(format!("fine_tune_fraction must lie in (0, 1], got {}", self.fine_tune_fraction));
        }
        for cfg in std::iter::once(&self.training).chain(self.fine_tuning.as_ref()) {
            if let Err(e) = cfg.validate() {
                bad.push(e.to_string());
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::config(bad.join("; ")))
        }
    }

    pub fn architecture_spec(&self, family: Family, scale: usize) -> Result<ArchitectureSpec> {
        self.architecture.build(family, scale, self.patch_size, &self.overrides)
    }

    pub fn canonical_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }
}

/// Rejects any protocol whose held-out item intersects the training scope.
pub fn check_leakage(spec: &ProtocolSpec, train: &[DatasetManifest], eval: &DatasetManifest) -> Result<()> {
    let leak = |msg: String| Err(Error::Protocol(msg));
    match &spec.held_out {
        HeldOut::Region(r) => {
            for m in train {
                if m.region.overlaps(r) {
                    return leak(format!(
                        "held-out region {r:?} overlaps training manifest {} region {:?}",
                        m.name, m.region
                    ));
                }
            }
            if !r.contains(&eval.region) {
                return leak(format!(
                    "evaluation manifest {} region {:?} lies outside the held-out region",
                    eval.name, eval.region
                ));
            }
        }
        HeldOut::Variable(v) => {
            if let Some(m) = train.iter().find(|m| m.variables.contains(v)) {
                return leak(format!("held-out variable {v} appears in training manifest {}", m.name));
            }
            if !eval.variables.contains(v) {
                return leak(format!("evaluation manifest {} does not provide variable {v}", eval.name));
            }
            if eval.variables.iter().any(|x| x != v) {
                return leak(format!(
                    "evaluation manifest {} carries variables besides the held-out {v}",
                    eval.name
                ));
            }
        }
        HeldOut::Product(p) => {
            if let Some(m) = train.iter().find(|m| &m.name == p) {
                return leak(format!("held-out product {p} is also training manifest {}", m.name));
            }
            if &eval.name != p {
                return leak(format!("evaluation manifest is {} but the held-out product is {p}", eval.name));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Directory the spec's relative paths are resolved against.
    pub base_dir: PathBuf,
    /// Worker cap (0 = library default).
    pub threads: usize,
    /// Stats, checkpoints, training histories and the report go here.
    pub out_dir: Option<PathBuf>,
}

type Samples = Vec<(GridTensor, SampleMeta)>;

fn stats_with_unseen(base: &StatsTable, eval: &Samples, scale: usize) -> Result<StatsTable> {
    let mut table = base.clone();
    let unseen: Vec<&(GridTensor, SampleMeta)> = eval
        .iter()
        .filter(|(_, m)| base.get(&m.variable).is_none())
        .collect();
    if !unseen.is_empty() {
        // Only the LR inputs are visible at inference time.
        let lr: Vec<(GridTensor, &str)> = unseen
            .iter()
            .map(|(g, m)| Ok((avg_pool(g, scale)?, m.variable.as_str())))
            .collect::<Result<_>>()?;
        let extra = stats_from_fields(lr.iter().map(|(g, v)| (g, *v)))?;
        table.0.extend(extra.0);
    }
    Ok(table)
}

fn pair_set(samples: &Samples, scale: usize, stats: &StatsTable) -> Result<PairSet> {
    PairSet::from_pairs(&synthesize_pairs(samples, scale)?, stats)
}

fn load_split(m: &DatasetManifest, tag: &str, patch: usize) -> Result<Samples> {
    let s = m.load_samples(Some(tag))?;
    if s.is_empty() {
        return Err(Error::config(format!("manifest {} has no samples tagged {tag}", m.name)));
    }
    patch_samples(&s, patch)
}

/// Runs every requested model × scale (× mode) and assembles the report.
pub fn run_protocol(spec: &ProtocolSpec, opts: &RunOptions) -> Result<MetricsReport> {
    spec.validate()?;
    let resolve = |p: &Path| opts.base_dir.join(p);
    let train_m = spec
        .train_manifests
        .iter()
        .map(|p| DatasetManifest::load(&resolve(p)))
        .collect::<Result<Vec<_>>>()?;
    let eval_m = DatasetManifest::load(&resolve(&spec.eval_manifest))?;
    check_leakage(spec, &train_m, &eval_m)?;
    for m in &spec.models {
        if let Some(f) = m.family() {
            for &s in &spec.scales {
                spec.architecture_spec(f, s)?;
            }
        }
    }
    with_threads(opts.threads, || run_checked(spec, opts, &train_m, &eval_m))
}

fn run_checked(
    spec: &ProtocolSpec,
    opts: &RunOptions,
    train_m: &[DatasetManifest],
    eval_m: &DatasetManifest,
) -> Result<MetricsReport> {
    let mut train_samples = Vec::new();
    for m in train_m {
        train_samples.extend(load_split(m, &spec.train_split, spec.patch_size)?);
    }
    let eval_samples = load_split(eval_m, &spec.eval_split, spec.patch_size)?;
    let wants_ft = spec.modes.contains(&Mode::FineTune);
    let ft_samples = if wants_ft {
        load_split(eval_m, &spec.fine_tune_split, spec.patch_size)?
    } else {
        Vec::new()
    };
    let stats = stats_from_fields(train_samples.iter().map(|(g, m)| (g, m.variable.as_str())))?;
    let min_scale = *spec.scales.iter().min().expect("validated");
    let stats = stats_with_unseen(&stats, &eval_samples, min_scale)?;
    let stats_json = stats.to_json()?;
    if let Some(out) = &opts.out_dir {
        fs::create_dir_all(out)?;
        fs::write(out.join("stats.json"), &stats_json)?;
    }
    let mut provenance = Provenance {
        protocol_sha256: sha256_hex(&spec.canonical_bytes()?),
        stats_sha256: sha256_hex(stats_json.as_bytes()),
        checkpoints: BTreeMap::new(),
    };
    let ft_cfg = spec.fine_tuning.clone().unwrap_or_else(|| spec.training.clone());
    let mut rows = Vec::new();
    for &scale in &spec.scales {
        let full = pair_set(&train_samples, scale, &stats)?;
        let (train_set, val_set) = full.split(spec.training.val_fraction, spec.seed)?;
        let eval_set = pair_set(&eval_samples, scale, &stats)?;
        let ft_set = if wants_ft {
            Some(pair_set(&ft_samples, scale, &stats)?)
        } else {
            None
        };
        for &choice in &spec.models {
            let key = format!("{}-x{scale}", choice.name());
            let Some(family) = choice.family() else {
                let m = evaluate_model(Predictor::Bicubic { scale }, &eval_set)?;
                log::info!("{key}: R² {:.4} MSE {:.5}", m.r2, m.mse);
                for &mode in &spec.modes {
                    rows.push(row(choice, scale, mode, &m));
                }
                continue;
            };
            let model = match spec.checkpoints.get(&key) {
                Some(path) => {
                    let ck = Checkpoint::load(&opts.base_dir.join(path))?;
                    let want = spec.architecture_spec(family, scale)?;
                    if ck.model.spec() != &want {
                        return Err(Error::config(format!(
                            "checkpoint {} holds {:?}, protocol expects {:?}",
                            path.display(),
                            ck.model.spec(),
                            want
                        )));
                    }
                    ck.model
                }
                None => {
                    let arch = spec.architecture_spec(family, scale)?;
                    let mut model = Model::build(&arch, spec.seed)?;
                    log::info!("training {key} on {} samples", train_set.len());
                    let art = opts.out_dir.as_ref().map(|d| Artifacts::new(d.join("train").join(&key), 0));
                    let cfg = TrainingConfig {
                        seed: spec.seed,
                        ..spec.training.clone()
                    };
                    train(&mut model, &train_set, val_set.as_ref(), &cfg, art.as_ref())?;
                    model
                }
            };
            record_checkpoint(&mut provenance, opts, &key, &model)?;
            for &mode in &spec.modes {
                let m = match mode {
                    Mode::ZeroShot => evaluate_model(Predictor::Model(&model), &eval_set)?,
                    Mode::FineTune => {
                        let mut tuned = model.clone();
                        let cfg = TrainingConfig {
                            seed: spec.seed,
                            ..ft_cfg.clone()
                        };
                        let set = ft_set.as_ref().expect("fine-tune set loaded");
                        log::info!("fine-tuning {key}");
                        fine_tune(&mut tuned, set, spec.fine_tune_fraction, &cfg, None)?;
                        record_checkpoint(&mut provenance, opts, &format!("{key}-ft"), &tuned)?;
                        evaluate_model(Predictor::Model(&tuned), &eval_set)?
                    }
                };
                log::info!("{key} {}: R² {:.4} MSE {:.5}", mode.short(), m.r2, m.mse);
                rows.push(row(choice, scale, mode, &m));
            }
        }
    }
    let report = MetricsReport {
        protocol: spec.kind,
        rows,
        provenance,
    };
    if let Some(out) = &opts.out_dir {
        report.write(out)?;
    }
    Ok(report)
}

fn record_checkpoint(prov: &mut Provenance, opts: &RunOptions, key: &str, model: &Model) -> Result<()> {
    let bytes = Checkpoint::new(model.clone(), None).to_bytes()?;
    if let Some(out) = &opts.out_dir {
        let dir = out.join("checkpoints");
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(format!("{key}.ckpt")), &bytes)?;
    }
    prov.checkpoints.insert(key.to_string(), sha256_hex(&bytes));
    Ok(())
}

fn row(choice: ModelChoice, scale: usize, mode: Mode, m: &super::Metrics) -> ReportRow {
    ReportRow {
        model: choice.name().to_string(),
        scale,
        mode,
        r2: m.r2,
        mse: m.mse,
        n_samples: m.n_samples,
        n_cells: m.n_cells,
    }
}
