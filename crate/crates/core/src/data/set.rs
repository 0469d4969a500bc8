use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SamplePair, StatsTable};
use crate::error::{Error, Result};
use crate::grid::{normalize, GridTensor, Tensor};

/// A stack of normalized LR/HR pairs ready for batching: `lr` is `N×1×h×w`,
/// `hr` is `N×1×(h·s)×(w·s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSet {
    lr: GridTensor,
    hr: GridTensor,
    scale: usize,
}

impl PairSet {
    pub fn new(lr: GridTensor, hr: GridTensor) -> Result<Self> {
        let [n, c, h, w] = lr.dims4()?;
        let [hn, hc, hh, hw] = hr.dims4()?;
        if n != hn || c != 1 || hc != 1 {
            return Err(Error::shape(format!(
                "pair set needs N×1×h×w tensors with equal N, got {:?} and {:?}",
                lr.shape(),
                hr.shape()
            )));
        }
        if hh % h != 0 || hh / h < 2 || hh / h != hw / w || hw % w != 0 {
            return Err(Error::shape(format!(
                "HR {hh}x{hw} is not an integer multiple of LR {h}x{w}"
            )));
        }
        Ok(Self {
            scale: hh / h,
            lr: lr.reshape(vec![n, 1, h, w])?,
            hr: hr.reshape(vec![n, 1, hh, hw])?,
        })
    }

    /// Normalizes every pair with its variable's statistics and stacks them.
    pub fn from_pairs(pairs: &[SamplePair], stats: &StatsTable) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::shape("pair set must not be empty"));
        }
        let mut lr = Vec::with_capacity(pairs.len());
        let mut hr = Vec::with_capacity(pairs.len());
        for p in pairs {
            let s = stats.require(&p.variable)?;
            lr.push(normalize(&p.lr, &s)?);
            hr.push(normalize(&p.hr, &s)?);
        }
        Self::new(Tensor::stack(&lr)?, Tensor::stack(&hr)?)
    }

    pub fn len(&self) -> usize {
        self.lr.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn lr(&self) -> &GridTensor {
        &self.lr
    }

    pub fn hr(&self) -> &GridTensor {
        &self.hr
    }

    pub fn hr_size(&self) -> (usize, usize) {
        self.hr.hw()
    }

    /// Stacks the pairs at `idx` (in that order).
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let pick = |t: &GridTensor| -> Result<GridTensor> {
            let items = idx.iter().map(|&i| t.batch_item(i)).collect::<Result<Vec<_>>>()?;
            Tensor::stack(&items)
        };
        Ok(Self {
            lr: pick(&self.lr)?,
            hr: pick(&self.hr)?,
            scale: self.scale,
        })
    }

    /// Seeded train/validation split: `⌊fraction·N⌋` samples (at least one
    /// when N > 1) go to validation, both parts keep manifest order.
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Self, Option<Self>)> {
        let n = self.len();
        let k = ((fraction * n as f64).floor() as usize).min(n.saturating_sub(1));
        let k = if fraction > 0.0 && n > 1 { k.max(1) } else { k };
        if k == 0 {
            return Ok((self.clone(), None));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut val: Vec<usize> = perm[..k].to_vec();
        let mut train: Vec<usize> = perm[k..].to_vec();
        val.sort_unstable();
        train.sort_unstable();
        Ok((self.select(&train)?, Some(self.select(&val)?)))
    }
}
