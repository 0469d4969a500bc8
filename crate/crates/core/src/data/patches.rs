use super::SampleMeta;
use crate::error::{Error, Result};
use crate::grid::{avg_pool, GridTensor, Real, Tensor};

/// Non-overlapping (for `stride == patch`) square tiles in row-major order;
/// tiles that would run past the border are dropped.
pub fn make_patches<T: Real>(grid: &Tensor<T>, patch: usize, stride: usize) -> Result<Vec<Tensor<T>>> {
    let (h, w) = grid.hw();
    if patch == 0 || stride == 0 {
        return Err(Error::shape("patch and stride must be positive"));
    }
    if patch > h || patch > w {
        return Err(Error::shape(format!("patch {patch} larger than grid {h}x{w}")));
    }
    let planes = grid.planes();
    let mut out = Vec::new();
    for r0 in (0..=h - patch).step_by(stride) {
        for c0 in (0..=w - patch).step_by(stride) {
            let mut data = Vec::with_capacity(planes * patch * patch);
            for plane in grid.data().chunks_exact(h * w) {
                for r in r0..r0 + patch {
                    data.extend_from_slice(&plane[r * w + c0..r * w + c0 + patch]);
                }
            }
            out.push(Tensor::new(grid.with_hw(patch, patch), data)?);
        }
    }
    Ok(out)
}

/// Matched low/high resolution fields of one variable.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub lr: GridTensor,
    pub hr: GridTensor,
    pub variable: String,
    pub source: String,
}

/// LR fields by average pooling each HR patch by `scale`.
pub fn synthesize_pairs(hr_patches: &[(GridTensor, SampleMeta)], scale: usize) -> Result<Vec<SamplePair>> {
    hr_patches
        .iter()
        .map(|(hr, meta)| {
            Ok(SamplePair {
                lr: avg_pool(hr, scale)?,
                hr: hr.clone(),
                variable: meta.variable.clone(),
                source: meta.source.clone(),
            })
        })
        .collect()
}

/// HR training patches of `patch` side cut from every loaded field.
pub fn patch_samples(samples: &[(GridTensor, SampleMeta)], patch: usize) -> Result<Vec<(GridTensor, SampleMeta)>> {
    let mut out = Vec::new();
    for (g, meta) in samples {
        for p in make_patches(g, patch, patch)? {
            out.push((p, meta.clone()));
        }
    }
    Ok(out)
}
