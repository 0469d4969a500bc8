use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};

use downscale_core::arch::{Family, Model, ModelProbe};
use downscale_core::data::{
    patch_samples, stats_from_fields, synth_dataset, synthesize_pairs, DatasetManifest, PairSet, Region, SynthKind,
    SynthOptions,
};
use downscale_core::eval::{run_protocol, ArchOverrides, ArchPreset, ProtocolSpec, RunOptions};
use downscale_core::layers::gradcheck::layer_probe;
use downscale_core::layers::{grad_check, GradCheckConfig, GradCheckReport, Init, LayerKind, Probe};
use downscale_core::optim::{train as run_training, Artifacts, TrainingConfig};
use downscale_core::with_threads;

use crate::config::{echo, resolve};
use crate::{CliError, Common};

/// Largest acceptable relative error of a gradient check.
const GRAD_TOLERANCE: f64 = 1e-3;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| usage(format!("{flag} is required (flag or config key)")))
}

/// The flags of one command together with the global ones.
#[derive(Serialize)]
struct Given<'a, A> {
    #[serde(flatten)]
    common: &'a Common,
    #[serde(flatten)]
    args: &'a A,
}

fn given<'a, A>(common: &'a Common, args: &'a A) -> Given<'a, A> {
    Given { common, args }
}

#[derive(Args, Serialize)]
pub struct SynthArgs {
    /// gaussian-bumps, anisotropic-bumps or banded-spectrum.
    #[arg(long)]
    kind: Option<String>,
    /// Number of fields.
    #[arg(long)]
    n: Option<usize>,
    /// Field side length (power of two).
    #[arg(long)]
    size: Option<usize>,
    /// Trailing fields tagged `test`.
    #[arg(long)]
    test_count: Option<usize>,
    #[arg(long)]
    variable: Option<String>,
    #[arg(long)]
    units: Option<String>,
    #[arg(long)]
    offset: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// Spectral exponent of banded-spectrum fields.
    #[arg(long)]
    beta: Option<f64>,
    /// Product name (default synthetic-<kind>).
    #[arg(long)]
    product: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthSettings {
    kind: Option<SynthKind>,
    n: Option<usize>,
    size: Option<usize>,
    seed: u64,
    threads: usize,
    out: Option<PathBuf>,
    test_count: usize,
    variable: String,
    units: String,
    offset: f64,
    amplitude: f64,
    beta: f64,
    product: Option<String>,
    region: Region,
}

impl Default for SynthSettings {
    fn default() -> Self {
        let o = SynthOptions::default();
        Self {
            kind: None,
            n: None,
            size: None,
            seed: 0,
            threads: 0,
            out: None,
            test_count: o.test_count,
            variable: o.variable,
            units: o.units,
            offset: o.offset,
            amplitude: o.amplitude,
            beta: o.beta,
            product: o.product,
            region: o.region,
        }
    }
}

pub fn synth(config: Option<&Path>, common: &Common, args: &SynthArgs) -> Result<ExitCode, CliError> {
    let s: SynthSettings = resolve(config, &given(common, args))?;
    let kind = required(s.kind, "--kind")?;
    let n = required(s.n, "--n")?;
    let size = required(s.size, "--size")?;
    let out = required(s.out.clone(), "--out")?;
    if size < 4 || !size.is_power_of_two() {
        return Err(usage(format!("--size must be a power of two >= 4, got {size}")));
    }
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    if s.test_count > n {
        return Err(usage(format!("--test-count {} exceeds --n {n}", s.test_count)));
    }
    s.region.validate().map_err(|e| usage(e.to_string()))?;
    let opts = SynthOptions {
        variable: s.variable.clone(),
        units: s.units.clone(),
        offset: s.offset,
        amplitude: s.amplitude,
        region: s.region,
        test_count: s.test_count,
        beta: s.beta,
        product: s.product.clone(),
    };
    echo(&out, &s)?;
    with_threads(s.threads, || synth_dataset(kind, n, size, s.seed, &out, &opts))?;
    println!("{}", out.join("manifest.json").display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    /// cnn, fno or cnn-vit.
    #[arg(long)]
    arch: Option<String>,
    /// Upsampling factor (2 or 8).
    #[arg(long)]
    scale: Option<usize>,
    /// Training manifest (repeatable).
    #[arg(long = "manifest")]
    manifests: Vec<PathBuf>,
    /// Split tag of the manifests to train on.
    #[arg(long)]
    split: Option<String>,
    /// HR patch side cut from every field.
    #[arg(long)]
    patch_size: Option<usize>,
    /// Architecture preset: full or reduced.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    ff_dim: Option<usize>,
    /// CNN-ViT token patch side.
    #[arg(long)]
    token_patch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, visible_alias = "lr")]
    learning_rate: Option<f64>,
    /// Fraction of pairs held out for validation.
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Keep a checkpoint every this many epochs (0 = latest only).
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainSettings {
    arch: Option<Family>,
    scale: usize,
    manifests: Vec<PathBuf>,
    split: String,
    patch_size: usize,
    preset: ArchPreset,
    width: Option<usize>,
    depth: Option<usize>,
    modes: Option<usize>,
    heads: Option<usize>,
    hidden_dim: Option<usize>,
    ff_dim: Option<usize>,
    token_patch: Option<usize>,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    val_fraction: f64,
    shuffle: bool,
    betas: (f64, f64),
    eps: f64,
    checkpoint_every: usize,
    seed: u64,
    threads: usize,
    out: Option<PathBuf>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            arch: None,
            scale: 2,
            manifests: Vec::new(),
            split: "train".into(),
            patch_size: 64,
            preset: ArchPreset::Full,
            width: None,
            depth: None,
            modes: None,
            heads: None,
            hidden_dim: None,
            ff_dim: None,
            token_patch: None,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            val_fraction: t.val_fraction,
            shuffle: t.shuffle,
            betas: t.betas,
            eps: t.eps,
            checkpoint_every: 0,
            seed: 0,
            threads: 0,
            out: None,
        }
    }
}

pub fn train(config: Option<&Path>, common: &Common, args: &TrainArgs) -> Result<ExitCode, CliError> {
    let s: TrainSettings = resolve(config, &given(common, args))?;
    let family = required(s.arch, "--arch")?;
    let out = required(s.out.clone(), "--out")?;
    if s.manifests.is_empty() {
        return Err(usage("at least one --manifest is required"));
    }
    if ![2, 8].contains(&s.scale) {
        return Err(usage(format!("--scale must be 2 or 8, got {}", s.scale)));
    }
    if s.patch_size % s.scale != 0 || s.patch_size / s.scale < 4 {
        return Err(usage(format!(
            "--patch-size {} must be a multiple of --scale {} giving LR fields of at least 4 cells",
            s.patch_size, s.scale
        )));
    }
    let overrides = ArchOverrides {
        width: s.width,
        depth: s.depth,
        modes: s.modes,
        heads: s.heads,
        hidden_dim: s.hidden_dim,
        ff_dim: s.ff_dim,
        patch_size: s.token_patch,
    };
    let arch = s.preset.build(family, s.scale, s.patch_size, &overrides)?;
    let cfg = TrainingConfig {
        learning_rate: s.learning_rate,
        batch_size: s.batch_size,
        epochs: s.epochs,
        seed: s.seed,
        shuffle: s.shuffle,
        betas: s.betas,
        eps: s.eps,
        val_fraction: s.val_fraction,
    };
    cfg.validate()?;
    for p in &s.manifests {
        if !p.is_file() {
            return Err(usage(format!("manifest {} does not exist", p.display())));
        }
    }
    echo(&out, &s)?;
    with_threads(s.threads, || -> Result<(), CliError> {
        let mut samples = Vec::new();
        for p in &s.manifests {
            let m = DatasetManifest::load(p)?;
            samples.extend(patch_samples(&m.load_samples(Some(&s.split))?, s.patch_size)?);
        }
        if samples.is_empty() {
            return Err(usage(format!("no samples tagged {:?} in the manifests", s.split)));
        }
        let stats = stats_from_fields(samples.iter().map(|(g, m)| (g, m.variable.as_str())))?;
        stats.save(&out.join("stats.json"))?;
        let set = PairSet::from_pairs(&synthesize_pairs(&samples, s.scale)?, &stats)?;
        let (train_set, val_set) = set.split(cfg.val_fraction, cfg.seed)?;
        let mut model = Model::build(&arch, s.seed)?;
        log::info!(
            "training {family} x{} ({} parameters) on {} pairs",
            s.scale,
            model.num_parameters(),
            train_set.len()
        );
        let art = Artifacts::new(&out, s.checkpoint_every);
        run_training(&mut model, &train_set, val_set.as_ref(), &cfg, Some(&art))?;
        println!("{}", art.latest_path().display());
        Ok(())
    })?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Args, Serialize)]
pub struct ProtocolArgs {
    /// Protocol spec (JSON). Its relative paths resolve against its directory.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ProtocolSettings {
    spec: Option<PathBuf>,
    /// Overrides the spec's seed when given.
    seed: Option<u64>,
    threads: usize,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ProtocolEcho<'a> {
    #[serde(flatten)]
    settings: &'a ProtocolSettings,
    protocol: &'a ProtocolSpec,
}

pub fn protocol(config: Option<&Path>, common: &Common, args: &ProtocolArgs) -> Result<ExitCode, CliError> {
    let mut s: ProtocolSettings = resolve(config, &given(common, args))?;
    let path = required(s.spec.clone(), "--spec")?;
    if !path.is_file() {
        return Err(usage(format!("protocol spec {} does not exist", path.display())));
    }
    let mut spec = ProtocolSpec::load(&path)?;
    if let Some(seed) = s.seed {
        spec.seed = seed;
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = s.out.get_or_insert_with(|| {
        let stem = path.file_stem().and_then(|x| x.to_str()).unwrap_or("protocol");
        base.join(format!("{stem}-out"))
    });
    let out = out.clone();
    echo(&out, &ProtocolEcho { settings: &s, protocol: &spec })?;
    let report = run_protocol(
        &spec,
        &RunOptions {
            base_dir: base,
            threads: s.threads,
            out_dir: Some(out.clone()),
        },
    )?;
    print!("{}", report.to_table());
    log::info!("report written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn is_false(b: &bool) -> bool {
    !b
}

#[derive(Args, Serialize)]
pub struct GradcheckArgs {
    /// Every layer and every reduced architecture end to end.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    all: bool,
    /// One layer: conv2d, relu, linear, layer-norm, mhsa, spectral-conv.
    #[arg(long)]
    layer: Option<String>,
    /// One reduced architecture end to end: cnn, fno, cnn-vit.
    #[arg(long)]
    model: Option<String>,
    /// Number of seeds per target.
    #[arg(long)]
    seeds: Option<u64>,
    /// Finite-difference step.
    #[arg(long)]
    eps: Option<f64>,
    /// Coordinates checked per probe.
    #[arg(long)]
    max_coords: Option<usize>,
    /// Perturbs every analytic gradient by 5% so the check must fail.
    #[arg(long, hide = true)]
    #[serde(skip_serializing_if = "is_false")]
    corrupt: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GradcheckSettings {
    all: bool,
    layer: Option<String>,
    model: Option<String>,
    seeds: u64,
    eps: f64,
    max_coords: usize,
    corrupt: bool,
    /// First seed; targets run seeds `seed..seed + seeds`.
    seed: u64,
    threads: usize,
    out: Option<PathBuf>,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        let g = GradCheckConfig::default();
        Self {
            all: false,
            layer: None,
            model: None,
            seeds: 5,
            eps: g.eps,
            max_coords: g.max_coords,
            corrupt: false,
            seed: 0,
            threads: 0,
            out: None,
        }
    }
}

#[derive(Serialize)]
struct CheckRow {
    target: String,
    seed: u64,
    passed: bool,
    #[serde(flatten)]
    report: GradCheckReport,
}

enum Target {
    Layer(LayerKind),
    Model(Family),
}

impl Target {
    fn name(&self) -> String {
        match self {
            Target::Layer(k) => k.to_string(),
            Target::Model(f) => format!("{f} (end to end)"),
        }
    }

    fn probe(&self, seed: u64) -> Result<Box<dyn Probe>, CliError> {
        Ok(match *self {
            Target::Layer(k) => Box::new(layer_probe(k, seed)),
            Target::Model(f) => {
                let spec = downscale_core::arch::ArchitectureSpec::reduced(f, 2, 16);
                let model = Model::<f64>::build(&spec, seed)?;
                let lr = Init::new(seed + 100).uniform(&[2, 1, 8, 8], -1.0, 1.0);
                let hr = Init::new(seed + 200).uniform(&[2, 1, 16, 16], -1.0, 1.0);
                Box::new(ModelProbe::new(model, lr, hr))
            }
        })
    }
}

pub fn gradcheck(config: Option<&Path>, common: &Common, args: &GradcheckArgs) -> Result<ExitCode, CliError> {
    let s: GradcheckSettings = resolve(config, &given(common, args))?;
    let mut targets = Vec::new();
    if s.all {
        targets.extend(LayerKind::ALL.map(Target::Layer));
        targets.extend(Family::ALL.map(Target::Model));
    }
    if let Some(l) = &s.layer {
        targets.push(Target::Layer(LayerKind::from_str(l).map_err(|e| usage(e.to_string()))?));
    }
    if let Some(m) = &s.model {
        targets.push(Target::Model(Family::from_str(m).map_err(|e| usage(e.to_string()))?));
    }
    if targets.is_empty() {
        return Err(usage("one of --all, --layer or --model is required"));
    }
    if s.seeds == 0 || s.max_coords == 0 || s.eps <= 0.0 {
        return Err(usage("--seeds and --max-coords must be positive and --eps > 0"));
    }
    if let Some(out) = &s.out {
        echo(out, &s)?;
    }
    let rows = with_threads(s.threads, || -> Result<Vec<CheckRow>, CliError> {
        let mut rows = Vec::new();
        for t in &targets {
            for seed in s.seed..s.seed + s.seeds {
                let cfg = GradCheckConfig {
                    eps: s.eps,
                    max_coords: s.max_coords,
                    seed,
                    corrupt: s.corrupt,
                };
                let report = grad_check(t.probe(seed)?.as_mut(), &cfg)?;
                let passed = report.max_rel_error <= GRAD_TOLERANCE && report.checked > 0;
                rows.push(CheckRow {
                    target: t.name(),
                    seed,
                    passed,
                    report,
                });
            }
        }
        Ok(rows)
    })?;
    println!(
        "{:<24} {:>4} {:>12} {:>8} {:>8}  status",
        "target", "seed", "max rel err", "checked", "kinks"
    );
    for r in &rows {
        println!(
            "{:<24} {:>4} {:>12.3e} {:>8} {:>8}  {}",
            r.target,
            r.seed,
            r.report.max_rel_error,
            r.report.checked,
            r.report.skipped_kinks,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    if let Some(out) = &s.out {
        let text = serde_json::to_string_pretty(&rows).expect("rows serialize");
        fs::write(out.join("gradcheck.json"), text + "\n").map_err(|e| CliError::Runtime(e.into()))?;
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        eprintln!("{failed} of {} checks exceed {GRAD_TOLERANCE:e}", rows.len());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
