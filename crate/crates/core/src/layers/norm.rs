use crate::error::{Error, Result};
use crate::grid::{Real, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct LayerNormCtx<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
    gamma: Tensor<T>,
}

/// Normalizes each row over its last axis, then applies `gamma`/`beta`.
pub fn layer_norm_forward<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
) -> Result<(Tensor<T>, LayerNormCtx<T>)> {
    let d = *x.shape().last().unwrap();
    if gamma.len() != d || beta.len() != d {
        return Err(Error::shape(format!(
            "layer norm over {d} features got gamma {} / beta {}",
            gamma.len(),
            beta.len()
        )));
    }
    let eps = T::of(LAYER_NORM_EPS);
    let inv_d = T::of(1.0 / d as f64);
    let mut xhat = Vec::with_capacity(x.len());
    let mut y = Vec::with_capacity(x.len());
    let mut inv_std = Vec::with_capacity(x.len() / d);
    for row in x.data().chunks_exact(d) {
        let mean = row.iter().copied().sum::<T>() * inv_d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
        let is = T::one() / (var + eps).sqrt();
        inv_std.push(is);
        for ((&v, &g), &b) in row.iter().zip(gamma.data()).zip(beta.data()) {
            let h = (v - mean) * is;
            xhat.push(h);
            y.push(h * g + b);
        }
    }
    Ok((
        Tensor::from_parts(x.shape().to_vec(), y),
        LayerNormCtx {
            xhat: Tensor::from_parts(x.shape().to_vec(), xhat),
            inv_std,
            gamma: gamma.clone(),
        },
    ))
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn layer_norm_backward<T: Real>(
    ctx: &LayerNormCtx<T>,
    dy: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let d = ctx.gamma.len();
    if dy.len() != ctx.xhat.len() {
        return Err(Error::shape("layer norm upstream gradient shape mismatch"));
    }
    let inv_d = T::of(1.0 / d as f64);
    let mut dx = Vec::with_capacity(dy.len());
    let mut dg = vec![T::zero(); d];
    let mut db = vec![T::zero(); d];
    for ((grow, hrow), &is) in dy
        .data()
        .chunks_exact(d)
        .zip(ctx.xhat.data().chunks_exact(d))
        .zip(&ctx.inv_std)
    {
        let mut mean_dh = T::zero();
        let mut mean_dh_h = T::zero();
        for j in 0..d {
            let dh = grow[j] * ctx.gamma.data()[j];
            mean_dh = mean_dh + dh;
            mean_dh_h = mean_dh_h + dh * hrow[j];
            dg[j] = dg[j] + grow[j] * hrow[j];
            db[j] = db[j] + grow[j];
        }
        mean_dh = mean_dh * inv_d;
        mean_dh_h = mean_dh_h * inv_d;
        for j in 0..d {
            let dh = grow[j] * ctx.gamma.data()[j];
            dx.push(is * (dh - mean_dh - hrow[j] * mean_dh_h));
        }
    }
    Ok((
        Tensor::from_parts(dy.shape().to_vec(), dx),
        Tensor::from_parts(vec![d], dg),
        Tensor::from_parts(vec![d], db),
    ))
}
