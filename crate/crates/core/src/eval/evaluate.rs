use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{mse, r2};
use crate::arch::Model;
use crate::data::PairSet;
use crate::error::{Error, Result};
use crate::grid::{bicubic_upsample, write_grd1, GridTensor, Tensor};
use crate::par::{map_indexed, with_threads};

/// Samples pushed through a model at once during evaluation.
const EVAL_BATCH: usize = 16;

/// Anything that maps an LR batch to an HR batch.
#[derive(Clone, Copy, Debug)]
pub enum Predictor<'a> {
    Model(&'a Model),
    Bicubic { scale: usize },
}

impl Predictor<'_> {
    pub fn scale(&self) -> usize {
        match self {
            Predictor::Model(m) => m.spec().scale_factor,
            Predictor::Bicubic { scale } => *scale,
        }
    }

    pub fn predict(&self, lr: &GridTensor) -> Result<GridTensor> {
        match self {
            Predictor::Model(m) => m.forward(lr),
            Predictor::Bicubic { scale } => {
                let [n, ..] = lr.dims4()?;
                let outs = map_indexed(n, |b| bicubic_upsample(&lr.batch_item(b)?, *scale));
                Tensor::stack(&outs.into_iter().collect::<Result<Vec<_>>>()?)
            }
        }
    }

    /// Predictions for every sample of `set`, stacked in order.
    pub fn predict_set(&self, set: &PairSet) -> Result<GridTensor> {
        if set.scale() != self.scale() {
            return Err(Error::shape(format!(
                "set has scale {} but the predictor upsamples by {}",
                set.scale(),
                self.scale()
            )));
        }
        let idx: Vec<usize> = (0..set.len()).collect();
        let mut parts = Vec::new();
        for chunk in idx.chunks(EVAL_BATCH) {
            parts.push(self.predict(set.select(chunk)?.lr())?);
        }
        Tensor::stack(&parts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r2: f64,
    pub mse: f64,
    pub n_samples: usize,
    pub n_cells: usize,
}

/// R² and MSE of `predictor` on a normalized pair set, pooled over all cells.
pub fn evaluate_model(predictor: Predictor<'_>, set: &PairSet) -> Result<Metrics> {
    let pred = predictor.predict_set(set)?;
    Ok(Metrics {
        r2: r2(&pred, set.hr())?,
        mse: mse(&pred, set.hr())?,
        n_samples: set.len(),
        n_cells: set.hr().len(),
    })
}

/// [`evaluate_model`] on a pool of at most `threads` workers (0 = default).
pub fn evaluate_with_threads(predictor: Predictor<'_>, set: &PairSet, threads: usize) -> Result<Metrics> {
    with_threads(threads, || evaluate_model(predictor, set))
}

/// Writes `pred_NNNNN.grd1` and `abserr_NNNNN.grd1` (|pred − target|) for
/// every sample and returns the per-sample MSE.
pub fn emit_error_grids(predictor: Predictor<'_>, set: &PairSet, out_dir: &Path) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::shape("evaluation set is empty"));
    }
    fs::create_dir_all(out_dir)?;
    let pred = predictor.predict_set(set)?;
    let (h, w) = set.hr_size();
    let mut per_sample = Vec::with_capacity(set.len());
    for i in 0..set.len() {
        let p = pred.batch_item(i)?.reshape(vec![h, w])?;
        let t = set.hr().batch_item(i)?.reshape(vec![h, w])?;
        let err = Tensor::new(
            vec![h, w],
            p.data().iter().zip(t.data()).map(|(a, b)| (a - b).abs()).collect(),
        )?;
        per_sample.push(mse(&p, &t)?);
        write_grd1(&grid_path(out_dir, "pred", i), &p)?;
        write_grd1(&grid_path(out_dir, "abserr", i), &err)?;
    }
    Ok(per_sample)
}

pub fn grid_path(dir: &Path, kind: &str, i: usize) -> PathBuf {
    dir.join(format!("{kind}_{i:05}.grd1"))
}
