use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Non-overlapping `k × k` mean pooling over the trailing two axes.
pub fn avg_pool<T: Real>(t: &Tensor<T>, k: usize) -> Result<Tensor<T>> {
    if k == 0 {
        return Err(Error::shape("pooling factor must be >= 1"));
    }
    let (h, w) = t.hw();
    if h % k != 0 {
        return Err(Error::shape(format!(
            "height {h} is not divisible by pooling factor {k}"
        )));
    }
    if w % k != 0 {
        return Err(Error::shape(format!(
            "width {w} is not divisible by pooling factor {k}"
        )));
    }
    let (oh, ow) = (h / k, w / k);
    let inv = 1.0 / (k * k) as f64;
    let mut out = Vec::with_capacity(t.planes() * oh * ow);
    let mut acc = vec![0.0f64; ow];
    for plane in t.data().chunks_exact(h * w) {
        for orow in 0..oh {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for row in plane[orow * k * w..(orow + 1) * k * w].chunks_exact(w) {
                for (oc, cell) in row.chunks_exact(k).enumerate() {
                    acc[oc] += cell.iter().map(|v| v.f64()).sum::<f64>();
                }
            }
            out.extend(acc.iter().map(|&a| T::of(a * inv)));
        }
    }
    Ok(Tensor::from_parts(t.with_hw(oh, ow), out))
}
