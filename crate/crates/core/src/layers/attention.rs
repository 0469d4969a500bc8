use crate::error::{Error, Result};
use crate::grid::{Real, Tensor};

use super::linear::{linear_backward, linear_forward, LinearCtx};

/// Weights of one multi-head self-attention block: fused query/key/value
/// projection `d × 3d` and output projection `d × d`.
#[derive(Clone, Copy, Debug)]
pub struct MhsaWeights<'a, T> {
    pub wqkv: &'a Tensor<T>,
    pub bqkv: &'a Tensor<T>,
    pub wo: &'a Tensor<T>,
    pub bo: &'a Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct MhsaCtx<T> {
    tokens: usize,
    dim: usize,
    heads: usize,
    qkv: Tensor<T>,
    /// Softmax weights, `heads × tokens × tokens`.
    attn: Vec<T>,
    proj_in: LinearCtx<T>,
    proj_out: LinearCtx<T>,
}

impl<T: Real> MhsaCtx<T> {
    /// Row-stochastic attention matrix of `head`, `tokens × tokens`.
    pub fn attention(&self, head: usize) -> &[T] {
        let tt = self.tokens * self.tokens;
        &self.attn[head * tt..(head + 1) * tt]
    }
}

#[derive(Clone, Debug)]
pub struct MhsaGrads<T> {
    pub dx: Tensor<T>,
    pub dwqkv: Tensor<T>,
    pub dbqkv: Tensor<T>,
    pub dwo: Tensor<T>,
    pub dbo: Tensor<T>,
}

pub fn check_heads(dim: usize, heads: usize) -> Result<()> {
    if heads == 0 || dim % heads != 0 {
        return Err(Error::config(format!(
            "attention dimension {dim} is not divisible by {heads} heads"
        )));
    }
    Ok(())
}

/// Scaled dot-product self-attention over a `tokens × dim` matrix.
pub fn mhsa_forward<T: Real>(
    x: &Tensor<T>,
    p: MhsaWeights<'_, T>,
    heads: usize,
) -> Result<(Tensor<T>, MhsaCtx<T>)> {
    let &[tokens, dim] = x.shape() else {
        return Err(Error::shape(format!("attention expects tokens×dim, got {:?}", x.shape())));
    };
    check_heads(dim, heads)?;
    if p.wqkv.shape() != [dim, 3 * dim] || p.wo.shape() != [dim, dim] {
        return Err(Error::shape(format!(
            "attention weights {:?}/{:?} do not match dim {dim}",
            p.wqkv.shape(),
            p.wo.shape()
        )));
    }
    let dh = dim / heads;
    let scale = T::of(1.0 / (dh as f64).sqrt());
    let (qkv, proj_in) = linear_forward(x, p.wqkv, p.bqkv)?;
    let q = |t: usize, c: usize| qkv.data()[t * 3 * dim + c];
    let k = |t: usize, c: usize| qkv.data()[t * 3 * dim + dim + c];
    let v = |t: usize, c: usize| qkv.data()[t * 3 * dim + 2 * dim + c];
    let mut attn = vec![T::zero(); heads * tokens * tokens];
    let mut out = vec![T::zero(); tokens * dim];
    for h in 0..heads {
        let a = &mut attn[h * tokens * tokens..(h + 1) * tokens * tokens];
        for t in 0..tokens {
            let row = &mut a[t * tokens..(t + 1) * tokens];
            for (u, s) in row.iter_mut().enumerate() {
                let mut acc = T::zero();
                for d in 0..dh {
                    acc = acc + q(t, h * dh + d) * k(u, h * dh + d);
                }
                *s = acc * scale;
            }
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for s in row.iter_mut() {
                *s = (*s - max).exp();
                sum = sum + *s;
            }
            for s in row.iter_mut() {
                *s = *s / sum;
            }
            for (u, &pw) in row.iter().enumerate() {
                for d in 0..dh {
                    let o = &mut out[t * dim + h * dh + d];
                    *o = *o + pw * v(u, h * dh + d);
                }
            }
        }
    }
    let o = Tensor::from_parts(vec![tokens, dim], out);
    let (y, proj_out) = linear_forward(&o, p.wo, p.bo)?;
    Ok((
        y,
        MhsaCtx {
            tokens,
            dim,
            heads,
            qkv,
            attn,
            proj_in,
            proj_out,
        },
    ))
}

pub fn mhsa_backward<T: Real>(ctx: &MhsaCtx<T>, dy: &Tensor<T>) -> Result<MhsaGrads<T>> {
    let (tokens, dim, heads) = (ctx.tokens, ctx.dim, ctx.heads);
    if dy.shape() != [tokens, dim] {
        return Err(Error::shape("attention upstream gradient shape mismatch"));
    }
    let dh = dim / heads;
    let scale = T::of(1.0 / (dh as f64).sqrt());
    let (d_o, dwo, dbo) = linear_backward(&ctx.proj_out, dy)?;
    let qkv = ctx.qkv.data();
    let stride = 3 * dim;
    let mut dqkv = vec![T::zero(); tokens * stride];
    let mut dp = vec![T::zero(); tokens];
    for h in 0..heads {
        let a = ctx.attention(h);
        for t in 0..tokens {
            let prow = &a[t * tokens..(t + 1) * tokens];
            let mut dot = T::zero();
            for u in 0..tokens {
                let mut acc = T::zero();
                for d in 0..dh {
                    let c = h * dh + d;
                    let g = d_o.data()[t * dim + c];
                    acc = acc + g * qkv[u * stride + 2 * dim + c];
                    dqkv[u * stride + 2 * dim + c] = dqkv[u * stride + 2 * dim + c] + prow[u] * g;
                }
                dp[u] = acc;
                dot = dot + acc * prow[u];
            }
            for u in 0..tokens {
                let ds = prow[u] * (dp[u] - dot) * scale;
                if ds == T::zero() {
                    continue;
                }
                for d in 0..dh {
                    let c = h * dh + d;
                    dqkv[t * stride + c] = dqkv[t * stride + c] + ds * qkv[u * stride + dim + c];
                    dqkv[u * stride + dim + c] = dqkv[u * stride + dim + c] + ds * qkv[t * stride + c];
                }
            }
        }
    }
    let dqkv = Tensor::from_parts(vec![tokens, stride], dqkv);
    let (dx, dwqkv, dbqkv) = linear_backward(&ctx.proj_in, &dqkv)?;
    Ok(MhsaGrads {
        dx,
        dwqkv,
        dbqkv,
        dwo,
        dbo,
    })
}
