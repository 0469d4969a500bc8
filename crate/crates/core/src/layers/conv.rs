use crate::error::{Error, Result};
use crate::grid::{Real, Tensor};

/// Cached operands for [`conv2d_backward`].
#[derive(Clone, Debug)]
pub struct Conv2dCtx<T> {
    x: Tensor<T>,
    w: Tensor<T>,
}

fn conv_dims<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<([usize; 4], usize, usize)> {
    let [n, cin, h, wd] = x.dims4()?;
    let &[cout, wcin, k, k2] = w.shape() else {
        return Err(Error::shape(format!(
            "conv weight must be cout×cin×k×k, got {:?}",
            w.shape()
        )));
    };
    if k != k2 || k % 2 == 0 {
        return Err(Error::shape(format!("conv kernel must be square and odd, got {k}x{k2}")));
    }
    if wcin != cin {
        return Err(Error::shape(format!(
            "conv expects {wcin} input channels, got {cin}"
        )));
    }
    if b.len() != cout {
        return Err(Error::shape(format!(
            "conv bias has {} entries for {cout} filters",
            b.len()
        )));
    }
    Ok(([n, cin, h, wd], cout, k))
}

/// Valid column range `c` for which `c + off` lies in `0..w`.
#[inline]
fn span(w: usize, off: isize) -> (usize, usize) {
    let lo = (-off).max(0) as usize;
    let hi = (w as isize - off).min(w as isize).max(0) as usize;
    (lo, hi.max(lo))
}

/// Same-padded 2-D cross-correlation plus bias. `w` is `cout×cin×k×k` with
/// odd `k`; zero padding of `k/2` keeps the spatial size.
pub fn conv2d_forward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(Tensor<T>, Conv2dCtx<T>)> {
    let ([n, cin, h, wd], cout, k) = conv_dims(x, w, b)?;
    let p = (k / 2) as isize;
    let plane = h * wd;
    let xs = x.data();
    let ws = w.data();
    let mut out = vec![T::zero(); n * cout * plane];
    for s in 0..n {
        for o in 0..cout {
            let dst = &mut out[(s * cout + o) * plane..(s * cout + o + 1) * plane];
            dst.iter_mut().for_each(|v| *v = b.data()[o]);
            for i in 0..cin {
                let src = &xs[(s * cin + i) * plane..(s * cin + i + 1) * plane];
                for ky in 0..k {
                    let dy = ky as isize - p;
                    for kx in 0..k {
                        let dx = kx as isize - p;
                        let wv = ws[((o * cin + i) * k + ky) * k + kx];
                        let (c0, c1) = span(wd, dx);
                        let (r0, r1) = span(h, dy);
                        for r in r0..r1 {
                            let srow = (r as isize + dy) as usize * wd;
                            let drow = &mut dst[r * wd + c0..r * wd + c1];
                            let srow = &src[(srow as isize + c0 as isize + dx) as usize..][..c1 - c0];
                            for (d, &sv) in drow.iter_mut().zip(srow) {
                                *d = *d + wv * sv;
                            }
                        }
                    }
                }
            }
        }
    }
    let y = Tensor::from_parts(vec![n, cout, h, wd], out);
    Ok((
        y,
        Conv2dCtx {
            x: x.clone().reshape(vec![n, cin, h, wd])?,
            w: w.clone(),
        },
    ))
}

/// Returns `(dx, dw, db)` for the forward call that produced `ctx`.
pub fn conv2d_backward<T: Real>(
    ctx: &Conv2dCtx<T>,
    dy: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let [n, cin, h, wd] = ctx.x.dims4()?;
    let &[cout, _, k, _] = ctx.w.shape() else { unreachable!() };
    if dy.dims4()? != [n, cout, h, wd] {
        return Err(Error::shape(format!(
            "conv upstream gradient {:?} does not match output {:?}",
            dy.shape(),
            [n, cout, h, wd]
        )));
    }
    let p = (k / 2) as isize;
    let plane = h * wd;
    let xs = ctx.x.data();
    let ws = ctx.w.data();
    let gs = dy.data();
    let mut dx = vec![T::zero(); n * cin * plane];
    let mut dw = vec![T::zero(); cout * cin * k * k];
    let mut db = vec![T::zero(); cout];
    for s in 0..n {
        for o in 0..cout {
            let g = &gs[(s * cout + o) * plane..(s * cout + o + 1) * plane];
            db[o] = db[o] + g.iter().copied().sum::<T>();
            for i in 0..cin {
                let src = &xs[(s * cin + i) * plane..(s * cin + i + 1) * plane];
                let dst = &mut dx[(s * cin + i) * plane..(s * cin + i + 1) * plane];
                for ky in 0..k {
                    let oy = ky as isize - p;
                    for kx in 0..k {
                        let ox = kx as isize - p;
                        let widx = ((o * cin + i) * k + ky) * k + kx;
                        let wv = ws[widx];
                        let (c0, c1) = span(wd, ox);
                        let (r0, r1) = span(h, oy);
                        let mut acc = T::zero();
                        for r in r0..r1 {
                            let grow = &g[r * wd + c0..r * wd + c1];
                            let base = ((r as isize + oy) as usize * wd) as isize + c0 as isize + ox;
                            let base = base as usize;
                            let srow = &src[base..base + (c1 - c0)];
                            let mut part = T::zero();
                            for (&gv, &sv) in grow.iter().zip(srow) {
                                part = part + gv * sv;
                            }
                            acc = acc + part;
                            let drow = &mut dst[base..base + (c1 - c0)];
                            for (d, &gv) in drow.iter_mut().zip(grow) {
                                *d = *d + wv * gv;
                            }
                        }
                        dw[widx] = dw[widx] + acc;
                    }
                }
            }
        }
    }
    Ok((
        Tensor::from_parts(vec![n, cin, h, wd], dx),
        Tensor::from_parts(ctx.w.shape().to_vec(), dw),
        Tensor::from_parts(vec![cout], db),
    ))
}
