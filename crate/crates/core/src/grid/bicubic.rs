use super::{Real, Tensor};
use crate::error::{Error, Result};

const KEYS_A: f64 = -0.5;

fn keys(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((KEYS_A + 2.0) * x - (KEYS_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((KEYS_A * x - 5.0 * KEYS_A) * x + 8.0 * KEYS_A) * x - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Sparse resampling row: output sample = Σ weight · input[index].
type Stencil = Vec<(usize, f64)>;

/// Stencils for upsampling an axis of length `n` by `factor`, with cell
/// centres aligned (align-corners = false). Taps beyond the border are
/// linearly extrapolated from the two outermost samples, so affine data is
/// reproduced up to the edge.
fn stencils(n: usize, factor: usize) -> Vec<Stencil> {
    let f = factor as f64;
    (0..n * factor)
        .map(|j| {
            let src = (j as f64 + 0.5) / f - 0.5;
            let base = src.floor();
            let t = src - base;
            let base = base as i64;
            let mut st: Stencil = Vec::with_capacity(4);
            let mut push = |idx: usize, w: f64| match st.iter_mut().find(|(i, _)| *i == idx) {
                Some(e) => e.1 += w,
                None => st.push((idx, w)),
            };
            for (tap, dist) in [(-1i64, t + 1.0), (0, t), (1, 1.0 - t), (2, 2.0 - t)] {
                let w = keys(dist);
                if w == 0.0 {
                    continue;
                }
                let i = base + tap;
                let last = n as i64 - 1;
                if i < 0 {
                    // v0 + i (v1 - v0)
                    let i = i as f64;
                    push(0, w * (1.0 - i));
                    push(1, w * i);
                } else if i > last {
                    let d = (i - last) as f64;
                    push(n - 1, w * (1.0 + d));
                    push(n - 2, -w * d);
                } else {
                    push(i as usize, w);
                }
            }
            st
        })
        .collect()
}

/// Separable Keys (a = -0.5) cubic convolution upsampling of the trailing two
/// axes by an integer factor.
pub fn bicubic_upsample<T: Real>(t: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    if factor < 2 {
        return Err(Error::shape(format!(
            "bicubic factor must be >= 2, got {factor}"
        )));
    }
    let (h, w) = t.hw();
    if h < 4 || w < 4 {
        return Err(Error::shape(format!(
            "bicubic input must be at least 4x4, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h * factor, w * factor);
    let sx = stencils(w, factor);
    let sy = stencils(h, factor);
    let mut out = Vec::with_capacity(t.planes() * oh * ow);
    let mut rows = vec![0.0f64; h * ow];
    for plane in t.data().chunks_exact(h * w) {
        for (r, row) in plane.chunks_exact(w).enumerate() {
            for (c, st) in sx.iter().enumerate() {
                rows[r * ow + c] = st.iter().map(|&(i, wt)| wt * row[i].f64()).sum();
            }
        }
        let mut line = vec![0.0f64; ow];
        for st in &sy {
            line.iter_mut().for_each(|v| *v = 0.0);
            for &(i, wt) in st {
                for (acc, &v) in line.iter_mut().zip(&rows[i * ow..(i + 1) * ow]) {
                    *acc += wt * v;
                }
            }
            out.extend(line.iter().map(|&v| T::of(v)));
        }
    }
    Ok(Tensor::from_parts(t.with_hw(oh, ow), out))
}

/// Pixel replication; reference point for the interpolation-quality tests
/// and the browser demo.
pub fn nearest_upsample<T: Real>(t: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    if factor == 0 {
        return Err(Error::shape("upsampling factor must be >= 1"));
    }
    let (h, w) = t.hw();
    let (oh, ow) = (h * factor, w * factor);
    let mut out = Vec::with_capacity(t.planes() * oh * ow);
    for plane in t.data().chunks_exact(h * w) {
        for r in 0..oh {
            let row = &plane[(r / factor) * w..(r / factor + 1) * w];
            out.extend((0..ow).map(|c| row[c / factor]));
        }
    }
    Ok(Tensor::from_parts(t.with_hw(oh, ow), out))
}
