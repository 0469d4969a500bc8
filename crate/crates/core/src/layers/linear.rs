use crate::error::{Error, Result};
use crate::grid::{Real, Tensor};

/// `a (m×k) · b (k×n)`.
pub(crate) fn matmul<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

/// `a (m×k) · bᵀ` where `b` is `n×k`.
pub(crate) fn matmul_bt<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let br = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for (&x, &y) in ar.iter().zip(br) {
                acc = acc + x * y;
            }
            out[i * n + j] = acc;
        }
    }
    out
}

/// `aᵀ · b` where `a` is `m×k` and `b` is `m×n`; result `k×n`.
pub(crate) fn matmul_at<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); k * n];
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            for (o, &bv) in out[p * n..(p + 1) * n].iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct LinearCtx<T> {
    x: Tensor<T>,
    w: Tensor<T>,
}

fn rows_cols<T: Real>(x: &Tensor<T>) -> (usize, usize) {
    let d = *x.shape().last().unwrap();
    (x.len() / d, d)
}

/// Row-wise affine map `y = x·w + b` on a token matrix. `x` is `… × in`
/// (leading axes flattened into rows), `w` is `in × out`, `b` is `out`.
pub fn linear_forward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(Tensor<T>, LinearCtx<T>)> {
    let (rows, din) = rows_cols(x);
    let &[win, dout] = w.shape() else {
        return Err(Error::shape(format!("linear weight must be in×out, got {:?}", w.shape())));
    };
    if win != din {
        return Err(Error::shape(format!(
            "linear expects inner dimension {win}, got {din}"
        )));
    }
    if b.len() != dout {
        return Err(Error::shape(format!("linear bias has {} entries for {dout} outputs", b.len())));
    }
    let mut y = matmul(x.data(), w.data(), rows, din, dout);
    for row in y.chunks_exact_mut(dout) {
        for (v, &bv) in row.iter_mut().zip(b.data()) {
            *v = *v + bv;
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = dout;
    Ok((
        Tensor::from_parts(shape, y),
        LinearCtx {
            x: x.clone(),
            w: w.clone(),
        },
    ))
}

/// Returns `(dx, dw, db)`.
pub fn linear_backward<T: Real>(
    ctx: &LinearCtx<T>,
    dy: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (rows, din) = rows_cols(&ctx.x);
    let dout = ctx.w.shape()[1];
    if dy.len() != rows * dout {
        return Err(Error::shape(format!(
            "linear upstream gradient {:?} does not match {rows}×{dout}",
            dy.shape()
        )));
    }
    let dx = matmul_bt(dy.data(), ctx.w.data(), rows, dout, din);
    let dw = matmul_at(ctx.x.data(), dy.data(), rows, din, dout);
    let mut db = vec![T::zero(); dout];
    for row in dy.data().chunks_exact(dout) {
        for (d, &g) in db.iter_mut().zip(row) {
            *d = *d + g;
        }
    }
    Ok((
        Tensor::from_parts(ctx.x.shape().to_vec(), dx),
        Tensor::from_parts(vec![din, dout], dw),
        Tensor::from_parts(vec![dout], db),
    ))
}
