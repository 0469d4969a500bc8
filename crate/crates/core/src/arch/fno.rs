//! Fourier neural operator: pointwise lift → Fourier blocks (spectral conv
//! plus 1×1 skip, ReLU except after the last block) → pointwise projection.

use super::spec::ArchitectureSpec;
use crate::error::Result;
use crate::grid::{Real, Tensor};
use crate::layers::gradcheck::mask_signature;
use crate::layers::{
    conv2d_backward, conv2d_forward, relu_backward, relu_forward, spectral_conv_backward,
    spectral_conv_forward, spectral_weight_shape, Conv2dCtx, Init, Parameter, ReluCtx, SpectralCtx,
};

pub(super) fn parameters<T: Real>(spec: &ArchitectureSpec, init: &mut Init) -> Vec<Parameter<T>> {
    let c = spec.width;
    let mut p = Vec::with_capacity(4 + 3 * spec.depth);
    p.push(Parameter::new("lift.weight", init.fan_in(&[c, 1, 1, 1], 1)));
    p.push(Parameter::new("lift.bias", init.fan_in(&[c], 1)));
    let scale = 1.0 / (c * c) as f64;
    for l in 0..spec.depth {
        p.push(Parameter::new(
            format!("block{l}.spectral.weight"),
            init.uniform(&spectral_weight_shape(spec.modes, c, c), 0.0, scale),
        ));
        p.push(Parameter::new(format!("block{l}.skip.weight"), init.fan_in(&[c, c, 1, 1], c)));
        p.push(Parameter::new(format!("block{l}.skip.bias"), init.fan_in(&[c], c)));
    }
    p.push(Parameter::new("proj.weight", init.fan_in(&[1, c, 1, 1], c)));
    p.push(Parameter::new("proj.bias", init.fan_in(&[1], c)));
    p
}

pub(super) struct Tape<T> {
    lift: Conv2dCtx<T>,
    blocks: Vec<(SpectralCtx<T>, Conv2dCtx<T>, Option<ReluCtx>)>,
    proj: Conv2dCtx<T>,
}

impl<T> Tape<T> {
    pub(super) fn signature(&self) -> u64 {
        mask_signature(self.blocks.iter().filter_map(|b| b.2.as_ref().map(|r| r.mask())))
    }
}

pub(super) fn forward<T: Real>(
    spec: &ArchitectureSpec,
    p: &[Parameter<T>],
    x: &Tensor<T>,
) -> Result<(Tensor<T>, Tape<T>)> {
    let (mut h, lift) = conv2d_forward(x, &p[0].value, &p[1].value)?;
    let mut blocks = Vec::with_capacity(spec.depth);
    for l in 0..spec.depth {
        let k = 2 + 3 * l;
        let (mut s, sctx) = spectral_conv_forward(&h, &p[k].value)?;
        let (skip, cctx) = conv2d_forward(&h, &p[k + 1].value, &p[k + 2].value)?;
        s.data_mut().iter_mut().zip(skip.data()).for_each(|(v, &d)| *v = *v + d);
        let relu = if l + 1 < spec.depth {
            let (a, r) = relu_forward(&s);
            s = a;
            Some(r)
        } else {
            None
        };
        h = s;
        blocks.push((sctx, cctx, relu));
    }
    let k = 2 + 3 * spec.depth;
    let (y, proj) = conv2d_forward(&h, &p[k].value, &p[k + 1].value)?;
    Ok((y, Tape { lift, blocks, proj }))
}

pub(super) fn backward<T: Real>(spec: &ArchitectureSpec, tape: &Tape<T>, dy: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
    let n = 4 + 3 * spec.depth;
    let mut g: Vec<Option<Tensor<T>>> = vec![None; n];
    let (mut dh, dw, db) = conv2d_backward(&tape.proj, dy)?;
    g[n - 2] = Some(dw);
    g[n - 1] = Some(db);
    for (l, (sctx, cctx, relu)) in tape.blocks.iter().enumerate().rev() {
        let k = 2 + 3 * l;
        let da = match relu {
            Some(r) => relu_backward(r, &dh)?,
            None => dh,
        };
        let (mut dx, dws) = spectral_conv_backward(sctx, &da)?;
        let (dskip, dwc, dbc) = conv2d_backward(cctx, &da)?;
        dx.data_mut().iter_mut().zip(dskip.data()).for_each(|(v, &d)| *v = *v + d);
        g[k] = Some(dws);
        g[k + 1] = Some(dwc);
        g[k + 2] = Some(dbc);
        dh = dx;
    }
    let (_, dw, db) = conv2d_backward(&tape.lift, &dh)?;
    g[0] = Some(dw);
    g[1] = Some(db);
    Ok(g.into_iter().map(Option::unwrap).collect())
}
