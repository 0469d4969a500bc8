use serde::{Deserialize, Serialize};

use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Per-variable standardization statistics, in the variable's physical units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        let s = Self { mean, std };
        s.validate()?;
        Ok(s)
    }

    pub fn identity() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std > 0.0) || !self.std.is_finite() {
            return Err(Error::InvalidStats(format!(
                "std must be finite and > 0, got {}",
                self.std
            )));
        }
        if !self.mean.is_finite() {
            return Err(Error::InvalidStats(format!("mean {} is not finite", self.mean)));
        }
        Ok(())
    }
}

/// `(x - mean) / std`, evaluated in 64 bits.
pub fn normalize<T: Real>(t: &Tensor<T>, s: &NormStats) -> Result<Tensor<T>> {
    s.validate()?;
    let inv = 1.0 / s.std;
    Ok(t.map(|v| T::of((v.f64() - s.mean) * inv)))
}

pub fn denormalize<T: Real>(t: &Tensor<T>, s: &NormStats) -> Result<Tensor<T>> {
    s.validate()?;
    Ok(t.map(|v| T::of(v.f64() * s.std + s.mean)))
}
