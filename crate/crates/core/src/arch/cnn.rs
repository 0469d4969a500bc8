//! Residual CNN: input conv → residual blocks (conv–ReLU–conv + identity
//! skip) → output conv.

use super::spec::ArchitectureSpec;
use crate::error::Result;
use crate::grid::{Real, Tensor};
use crate::layers::gradcheck::mask_signature;
use crate::layers::{
    conv2d_backward, conv2d_forward, relu_backward, relu_forward, Conv2dCtx, Init, Parameter, ReluCtx,
};

pub(super) fn parameters<T: Real>(spec: &ArchitectureSpec, init: &mut Init) -> Vec<Parameter<T>> {
    let c = spec.width;
    let mut p = Vec::with_capacity(4 + 4 * spec.depth);
    p.push(Parameter::new("input.weight", init.fan_in(&[c, 1, 3, 3], 9)));
    p.push(Parameter::new("input.bias", init.fan_in(&[c], 9)));
    for i in 0..spec.depth {
        for conv in ["conv1", "conv2"] {
            p.push(Parameter::new(
                format!("block{i}.{conv}.weight"),
                init.fan_in(&[c, c, 3, 3], c * 9),
            ));
            p.push(Parameter::new(format!("block{i}.{conv}.bias"), init.fan_in(&[c], c * 9)));
        }
    }
    p.push(Parameter::new("output.weight", init.fan_in(&[1, c, 3, 3], c * 9)));
    p.push(Parameter::new("output.bias", init.fan_in(&[1], c * 9)));
    p
}

pub(super) struct Tape<T> {
    input: Conv2dCtx<T>,
    blocks: Vec<(Conv2dCtx<T>, ReluCtx, Conv2dCtx<T>)>,
    output: Conv2dCtx<T>,
}

impl<T> Tape<T> {
    pub(super) fn signature(&self) -> u64 {
        mask_signature(self.blocks.iter().map(|b| b.1.mask()))
    }
}

pub(super) fn forward<T: Real>(
    spec: &ArchitectureSpec,
    p: &[Parameter<T>],
    x: &Tensor<T>,
) -> Result<(Tensor<T>, Tape<T>)> {
    let (mut h, input) = conv2d_forward(x, &p[0].value, &p[1].value)?;
    let mut blocks = Vec::with_capacity(spec.depth);
    for i in 0..spec.depth {
        let k = 2 + 4 * i;
        let (a, c1) = conv2d_forward(&h, &p[k].value, &p[k + 1].value)?;
        let (r, relu) = relu_forward(&a);
        let (b, c2) = conv2d_forward(&r, &p[k + 2].value, &p[k + 3].value)?;
        h.data_mut().iter_mut().zip(b.data()).for_each(|(v, &d)| *v = *v + d);
        blocks.push((c1, relu, c2));
    }
    let k = 2 + 4 * spec.depth;
    let (y, output) = conv2d_forward(&h, &p[k].value, &p[k + 1].value)?;
    Ok((y, Tape { input, blocks, output }))
}

pub(super) fn backward<T: Real>(spec: &ArchitectureSpec, tape: &Tape<T>, dy: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
    let n = 4 + 4 * spec.depth;
    let mut g: Vec<Option<Tensor<T>>> = vec![None; n];
    let (mut dh, dw, db) = conv2d_backward(&tape.output, dy)?;
    g[n - 2] = Some(dw);
    g[n - 1] = Some(db);
    for (i, (c1, relu, c2)) in tape.blocks.iter().enumerate().rev() {
        let k = 2 + 4 * i;
        let (dr, dw2, db2) = conv2d_backward(c2, &dh)?;
        let da = relu_backward(relu, &dr)?;
        let (dskip, dw1, db1) = conv2d_backward(c1, &da)?;
        dh.data_mut().iter_mut().zip(dskip.data()).for_each(|(v, &d)| *v = *v + d);
        g[k] = Some(dw1);
        g[k + 1] = Some(db1);
        g[k + 2] = Some(dw2);
        g[k + 3] = Some(db2);
    }
    let (_, dw, db) = conv2d_backward(&tape.input, &dh)?;
    g[0] = Some(dw);
    g[1] = Some(db);
    Ok(g.into_iter().map(Option::unwrap).collect())
}
