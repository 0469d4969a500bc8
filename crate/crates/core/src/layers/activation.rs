use crate::error::{Error, Result};
use crate::grid::{Real, Tensor};

#[derive(Clone, Debug)]
pub struct ReluCtx {
    shape: Vec<usize>,
    active: Vec<bool>,
}

impl ReluCtx {
    /// Activation pattern, used to detect kinks crossed by finite differences.
    pub fn mask(&self) -> &[bool] {
        &self.active
    }
}

pub fn relu_forward<T: Real>(x: &Tensor<T>) -> (Tensor<T>, ReluCtx) {
    let active: Vec<bool> = x.data().iter().map(|&v| v > T::zero()).collect();
    let y = x.map(|v| if v > T::zero() { v } else { T::zero() });
    (
        y,
        ReluCtx {
            shape: x.shape().to_vec(),
            active,
        },
    )
}

/// Subgradient at exactly zero is zero.
pub fn relu_backward<T: Real>(ctx: &ReluCtx, dy: &Tensor<T>) -> Result<Tensor<T>> {
    if dy.len() != ctx.active.len() {
        return Err(Error::shape(format!(
            "relu upstream gradient {:?} does not match {:?}",
            dy.shape(),
            ctx.shape
        )));
    }
    let data = dy
        .data()
        .iter()
        .zip(&ctx.active)
        .map(|(&g, &a)| if a { g } else { T::zero() })
        .collect();
    Ok(Tensor::from_parts(ctx.shape.clone(), data))
}
