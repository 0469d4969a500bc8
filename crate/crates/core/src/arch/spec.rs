use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Cnn,
    Fno,
    CnnVit,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Cnn, Family::Fno, Family::CnnVit];

    pub fn name(self) -> &'static str {
        match self {
            Family::Cnn => "cnn",
            Family::Fno => "fno",
            Family::CnnVit => "cnn-vit",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::config(format!("unknown architecture {s:?} (cnn, fno, cnn-vit)")))
    }
}

/// Declarative description of one model. Fields that do not apply to a
/// family are carried but ignored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub family: Family,
    /// Feature channels of the convolutional / Fourier trunk.
    pub width: usize,
    /// Residual blocks (CNN), Fourier layers (FNO) or transformer layers (CNN-ViT).
    pub depth: usize,
    /// Retained Fourier modes per axis (FNO).
    pub modes: usize,
    /// Attention heads (CNN-ViT).
    pub heads: usize,
    /// Token dimension (CNN-ViT).
    pub hidden_dim: usize,
    /// Inner dimension of the transformer feed-forward block (CNN-ViT).
    pub ff_dim: usize,
    /// Side of the square token patches on the HR grid (CNN-ViT).
    pub patch_size: usize,
    /// HR field side the positional embeddings are sized for (CNN-ViT).
    pub hr_size: usize,
    pub scale_factor: usize,
}

impl ArchitectureSpec {
    /// Full-size hyperparameters: 64 filters, 16 residual blocks; 4 Fourier
    /// layers with 12 modes; 4 transformer layers, 4 heads, 256 hidden.
    pub fn full(family: Family, scale_factor: usize) -> Self {
        Self {
            family,
            width: 64,
            depth: match family {
                Family::Cnn => 16,
                Family::Fno | Family::CnnVit => 4,
            },
            modes: 12,
            heads: 4,
            hidden_dim: 256,
            ff_dim: 512,
            patch_size: 8,
            hr_size: 64,
            scale_factor,
        }
    }

    /// Desk-scale variant: width 8, depth 2, 4 modes, 4×4 patches.
    pub fn reduced(family: Family, scale_factor: usize, hr_size: usize) -> Self {
        Self {
            family,
            width: 8,
            depth: 2,
            modes: 4,
            heads: 2,
            hidden_dim: 16,
            ff_dim: 32,
            patch_size: 4,
            hr_size,
            scale_factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if ![2, 8].contains(&self.scale_factor) {
            bad.push(format!("scale_factor must be 2 or 8, got {}", self.scale_factor));
        }
        if self.width == 0 {
            bad.push("width must be positive".to_string());
        }
        if self.depth == 0 {
            bad.push("depth must be positive".to_string());
        }
        match self.family {
            Family::Cnn => {}
            Family::Fno => {
                if self.modes == 0 {
                    bad.push("modes must be positive".to_string());
                }
            }
            Family::CnnVit => {
                if self.heads == 0 || self.hidden_dim == 0 || self.ff_dim == 0 {
                    bad.push("heads, hidden_dim and ff_dim must be positive".to_string());
                } else if self.hidden_dim % self.heads != 0 {
                    bad.push(format!(
                        "hidden_dim {} is not divisible by heads {}",
                        self.hidden_dim, self.heads
                    ));
                }
                if self.patch_size == 0 || self.hr_size == 0 {
                    bad.push("patch_size and hr_size must be positive".to_string());
                } else if self.hr_size % self.patch_size != 0 {
                    bad.push(format!(
                        "hr_size {} is not divisible by patch_size {}",
                        self.hr_size, self.patch_size
                    ));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::config(bad.join("; ")))
        }
    }

    /// Checks that an HR field of `h × w` can pass through this network.
    pub fn check_hr_size(&self, h: usize, w: usize) -> Result<()> {
        match self.family {
            Family::Cnn => Ok(()),
            Family::Fno => {
                if !h.is_power_of_two() || !w.is_power_of_two() {
                    return Err(Error::shape(format!(
                        "FNO needs power-of-two HR size, got {h}x{w}"
                    )));
                }
                if h < 2 * self.modes || w < 2 * self.modes {
                    return Err(Error::shape(format!(
                        "FNO with {} modes needs HR size >= {} per axis, got {h}x{w}",
                        self.modes,
                        2 * self.modes
                    )));
                }
                Ok(())
            }
            Family::CnnVit => {
                if h != self.hr_size || w != self.hr_size {
                    return Err(Error::shape(format!(
                        "CNN-ViT built for {0}x{0} HR fields, got {h}x{w}",
                        self.hr_size
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn tokens(&self) -> usize {
        let side = self.hr_size / self.patch_size.max(1);
        side * side
    }
}
