use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, AdamConfig, AdamState};
use crate::arch::{Checkpoint, Model};
use crate::data::PairSet;
use crate::error::{Error, Result};

/// Stream separating the fine-tune subset draw from batch shuffling.
const SUBSET_STREAM: u64 = 0x00f1_7e57;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    pub betas: (f64, f64),
    pub eps: f64,
    /// Share of the training set held out for validation when no separate
    /// validation set is supplied.
    pub val_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 150,
            seed: 0,
            shuffle: true,
            betas: (0.9, 0.999),
            eps: 1e-8,
            val_fraction: 0.1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            bad.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            bad.push("batch_size must be at least 1".to_string());
        }
        if self.epochs == 0 {
            bad.push("epochs must be at least 1".to_string());
        }
        let (b1, b2) = self.betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            bad.push(format!("betas must lie in [0, 1), got ({b1}, {b2})"));
        }
        if !(self.eps > 0.0) {
            bad.push(format!("eps must be positive, got {}", self.eps));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            bad.push(format!("val_fraction must lie in [0, 1), got {}", self.val_fraction));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::config(bad.join("; ")))
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.betas.0,
            beta2: self.betas.1,
            eps: self.eps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }

    /// Loss trajectory without wall-clock times, for determinism checks.
    pub fn losses(&self) -> Vec<(f64, Option<f64>)> {
        self.epochs.iter().map(|e| (e.train_loss, e.val_loss)).collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for e in &self.epochs {
            s.push_str(&serde_json::to_string(e)?);
            s.push('\n');
        }
        Ok(s)
    }
}

/// Where training writes its history and checkpoints.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub dir: PathBuf,
    /// Write `epoch-NNNN.ckpt` every this many epochs (0 = never);
    /// `latest.ckpt` is refreshed after every epoch regardless.
    pub checkpoint_every: usize,
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>, checkpoint_every: usize) -> Self {
        Self {
            dir: dir.into(),
            checkpoint_every,
        }
    }

    pub fn history_path(&self) -> PathBuf {
        self.dir.join("history.jsonl")
    }

    pub fn latest_path(&self) -> PathBuf {
        self.dir.join("latest.ckpt")
    }
}

fn check_compatible(model: &Model, set: &PairSet, what: &str) -> Result<()> {
    let spec = model.spec();
    if set.is_empty() {
        return Err(Error::config(format!("{what} set is empty")));
    }
    if set.scale() != spec.scale_factor {
        return Err(Error::shape(format!(
            "{what} set has scale {} but the model was built for {}",
            set.scale(),
            spec.scale_factor
        )));
    }
    let (h, w) = set.hr_size();
    spec.check_hr_size(h, w)
}

fn optimizer_record(cfg: &TrainingConfig, state: &AdamState, epochs: usize) -> serde_json::Value {
    serde_json::json!({
        "optimizer": "adam",
        "learning_rate": cfg.learning_rate,
        "betas": [cfg.betas.0, cfg.betas.1],
        "eps": cfg.eps,
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
        "steps": state.t,
        "epochs_completed": epochs,
    })
}

/// Mean squared error per cell over a set, evaluated in batches.
fn set_loss(model: &Model, set: &PairSet, batch: usize) -> Result<f64> {
    let n = set.len();
    let mut total = 0.0;
    for chunk in (0..n).collect::<Vec<_>>().chunks(batch) {
        let b = set.select(chunk)?;
        let (loss, _) = model.loss_signature(b.lr(), b.hr())?;
        total += loss * chunk.len() as f64;
    }
    Ok(total / n as f64)
}

/// Mini-batch Adam on `train_set`. Batch order is a pure function of
/// `cfg.seed`; the last partial batch is kept and epoch losses are
/// per-sample means. When `val_set` is `None` no validation loss is
/// recorded (see [`PairSet::split`] for carving one).
pub fn train(
    model: &mut Model,
    train_set: &PairSet,
    val_set: Option<&PairSet>,
    cfg: &TrainingConfig,
    out: Option<&Artifacts>,
) -> Result<TrainHistory> {
    cfg.validate()?;
    check_compatible(model, train_set, "training")?;
    if let Some(v) = val_set {
        check_compatible(model, v, "validation")?;
    }
    let mut history_file = match out {
        Some(a) => {
            fs::create_dir_all(&a.dir)?;
            Some(BufWriter::new(File::create(a.history_path())?))
        }
        None => None,
    };
    let adam = cfg.adam();
    let mut state = AdamState::new(model.parameters());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory::default();
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.sort_unstable();
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train_set.select(chunk)?;
            let loss = model.forward_backward(batch.lr(), batch.hr())?;
            if !loss.is_finite() {
                return Err(Error::config(format!("training diverged at epoch {epoch} (loss {loss})")));
            }
            adam_step(model.parameters_mut(), &mut state, &adam);
            sum += loss * chunk.len() as f64;
        }
        let val_loss = match val_set {
            Some(v) => Some(set_loss(model, v, cfg.batch_size)?),
            None => None,
        };
        let record = EpochRecord {
            epoch,
            train_loss: sum / n as f64,
            val_loss,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}/{} train {:.6e}{} ({:.1}s)",
            cfg.epochs,
            record.train_loss,
            val_loss.map(|v| format!(" val {v:.6e}")).unwrap_or_default(),
            record.seconds
        );
        if let (Some(a), Some(f)) = (out, history_file.as_mut()) {
            writeln!(f, "{}", serde_json::to_string(&record)?)?;
            f.flush()?;
            let ck = Checkpoint::new(model.clone(), Some(optimizer_record(cfg, &state, epoch)));
            if a.checkpoint_every > 0 && epoch % a.checkpoint_every == 0 {
                ck.save(&a.dir.join(format!("epoch-{epoch:04}.ckpt")))?;
            }
            ck.save(&a.latest_path())?;
        }
        history.epochs.push(record);
    }
    Ok(history)
}

/// Sorted indices of the `⌊fraction·n⌋` samples a fine-tune run uses.
pub fn fine_tune_indices(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!("fine-tune fraction must lie in (0, 1], got {fraction}")));
    }
    let k = (fraction * n as f64).floor() as usize;
    if k == 0 {
        return Err(Error::config(format!(
            "fine-tune fraction {fraction} of {n} samples selects nothing"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ SUBSET_STREAM));
    let mut pick = perm[..k].to_vec();
    pick.sort_unstable();
    Ok(pick)
}

/// Continues training `model` on a seeded `fraction` of `target_set`.
pub fn fine_tune(
    model: &mut Model,
    target_set: &PairSet,
    fraction: f64,
    cfg: &TrainingConfig,
    out: Option<&Artifacts>,
) -> Result<TrainHistory> {
    let idx = fine_tune_indices(target_set.len(), fraction, cfg.seed)?;
    let subset = if idx.len() == target_set.len() {
        target_set.clone()
    } else {
        target_set.select(&idx)?
    };
    train(model, &subset, None, cfg, out)
}

