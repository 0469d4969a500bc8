//! Hybrid CNN-ViT: a convolutional stem, patch tokens with learned
//! positional embeddings, pre-norm transformer layers, then tokens are folded
//! back onto the grid, added to the stem features and mapped to one channel
//! by a 3×3 head.

use super::spec::ArchitectureSpec;
use crate::error::Result;
use crate::grid::{Real, Tensor};
use crate::layers::gradcheck::mask_signature;
use crate::layers::{
    conv2d_backward, conv2d_forward, layer_norm_backward, layer_norm_forward, linear_backward,
    linear_forward, mhsa_backward, mhsa_forward, relu_backward, relu_forward, Conv2dCtx, Init,
    LayerNormCtx, LinearCtx, MhsaCtx, MhsaWeights, Parameter, ReluCtx,
};

const POS_INIT: f64 = 0.02;
const PER_BLOCK: usize = 12;
const FIRST_BLOCK: usize = 7;

pub(super) fn parameters<T: Real>(spec: &ArchitectureSpec, init: &mut Init) -> Vec<Parameter<T>> {
    let c = spec.width;
    let d = spec.hidden_dim;
    let f = spec.ff_dim;
    let feat = c * spec.patch_size * spec.patch_size;
    let mut p = Vec::with_capacity(FIRST_BLOCK + 4 + PER_BLOCK * spec.depth);
    p.push(Parameter::new("stem.conv1.weight", init.fan_in(&[c, 1, 3, 3], 9)));
    p.push(Parameter::new("stem.conv1.bias", init.fan_in(&[c], 9)));
    p.push(Parameter::new("stem.conv2.weight", init.fan_in(&[c, c, 3, 3], c * 9)));
    p.push(Parameter::new("stem.conv2.bias", init.fan_in(&[c], c * 9)));
    p.push(Parameter::new("embed.weight", init.fan_in(&[feat, d], feat)));
    p.push(Parameter::new("embed.bias", init.fan_in(&[d], feat)));
    p.push(Parameter::new("embed.position", init.uniform(&[spec.tokens(), d], -POS_INIT, POS_INIT)));
    for i in 0..spec.depth {
        let n = |s: &str| format!("block{i}.{s}");
        p.push(Parameter::new(n("norm1.gamma"), init.constant(&[d], 1.0)));
        p.push(Parameter::new(n("norm1.beta"), init.constant(&[d], 0.0)));
        p.push(Parameter::new(n("attn.qkv.weight"), init.fan_in(&[d, 3 * d], d)));
        p.push(Parameter::new(n("attn.qkv.bias"), init.fan_in(&[3 * d], d)));
        p.push(Parameter::new(n("attn.out.weight"), init.fan_in(&[d, d], d)));
        p.push(Parameter::new(n("attn.out.bias"), init.fan_in(&[d], d)));
        p.push(Parameter::new(n("norm2.gamma"), init.constant(&[d], 1.0)));
        p.push(Parameter::new(n("norm2.beta"), init.constant(&[d], 0.0)));
        p.push(Parameter::new(n("ff1.weight"), init.fan_in(&[d, f], d)));
        p.push(Parameter::new(n("ff1.bias"), init.fan_in(&[f], d)));
        p.push(Parameter::new(n("ff2.weight"), init.fan_in(&[f, d], f)));
        p.push(Parameter::new(n("ff2.bias"), init.fan_in(&[d], f)));
    }
    p.push(Parameter::new("unembed.weight", init.fan_in(&[d, feat], d)));
    p.push(Parameter::new("unembed.bias", init.fan_in(&[feat], d)));
    p.push(Parameter::new("head.weight", init.fan_in(&[1, c, 3, 3], c * 9)));
    p.push(Parameter::new("head.bias", init.fan_in(&[1], c * 9)));
    p
}

/// `1×c×H×W` → `tokens × (c·p·p)`, token order row-major over patches,
/// feature order `(channel·p + py)·p + px`.
fn patchify<T: Real>(x: &Tensor<T>, p: usize) -> Result<Tensor<T>> {
    let [_, c, h, w] = x.dims4()?;
    let (th, tw) = (h / p, w / p);
    let feat = c * p * p;
    let mut out = vec![T::zero(); th * tw * feat];
    let xs = x.data();
    for ty in 0..th {
        for tx in 0..tw {
            let row = &mut out[(ty * tw + tx) * feat..(ty * tw + tx + 1) * feat];
            for ch in 0..c {
                for py in 0..p {
                    let src = (ch * h + ty * p + py) * w + tx * p;
                    row[(ch * p + py) * p..(ch * p + py + 1) * p].copy_from_slice(&xs[src..src + p]);
                }
            }
        }
    }
    Tensor::new(vec![th * tw, feat], out)
}

/// Inverse of [`patchify`].
fn unpatchify<T: Real>(t: &Tensor<T>, c: usize, h: usize, w: usize, p: usize) -> Tensor<T> {
    let (th, tw) = (h / p, w / p);
    let feat = c * p * p;
    let ts = t.data();
    let mut out = vec![T::zero(); c * h * w];
    for ty in 0..th {
        for tx in 0..tw {
            let row = &ts[(ty * tw + tx) * feat..(ty * tw + tx + 1) * feat];
            for ch in 0..c {
                for py in 0..p {
                    let dst = (ch * h + ty * p + py) * w + tx * p;
                    out[dst..dst + p].copy_from_slice(&row[(ch * p + py) * p..(ch * p + py + 1) * p]);
                }
            }
        }
    }
    Tensor::new(vec![1, c, h, w], out).expect("unpatchify shape")
}

fn add_into<T: Real>(dst: &mut Tensor<T>, src: &Tensor<T>) {
    dst.data_mut().iter_mut().zip(src.data()).for_each(|(v, &d)| *v = *v + d);
}

struct BlockTape<T> {
    ln1: LayerNormCtx<T>,
    attn: MhsaCtx<T>,
    ln2: LayerNormCtx<T>,
    ff1: LinearCtx<T>,
    relu: ReluCtx,
    ff2: LinearCtx<T>,
}

pub(super) struct Tape<T> {
    conv1: Conv2dCtx<T>,
    relu1: ReluCtx,
    conv2: Conv2dCtx<T>,
    relu2: ReluCtx,
    embed: LinearCtx<T>,
    blocks: Vec<BlockTape<T>>,
    unembed: LinearCtx<T>,
    head: Conv2dCtx<T>,
    dims: [usize; 3],
}

impl<T> Tape<T> {
    pub(super) fn signature(&self) -> u64 {
        let stem = [self.relu1.mask(), self.relu2.mask()];
        mask_signature(stem.into_iter().chain(self.blocks.iter().map(|b| b.relu.mask())))
    }
}

pub(super) fn forward<T: Real>(
    spec: &ArchitectureSpec,
    p: &[Parameter<T>],
    x: &Tensor<T>,
) -> Result<(Tensor<T>, Tape<T>)> {
    let [_, _, h, w] = x.dims4()?;
    let c = spec.width;
    let (a, conv1) = conv2d_forward(x, &p[0].value, &p[1].value)?;
    let (a, relu1) = relu_forward(&a);
    let (a, conv2) = conv2d_forward(&a, &p[2].value, &p[3].value)?;
    let (stem, relu2) = relu_forward(&a);

    let tokens = patchify(&stem, spec.patch_size)?;
    let (mut z, embed) = linear_forward(&tokens, &p[4].value, &p[5].value)?;
    add_into(&mut z, &p[6].value);

    let mut blocks = Vec::with_capacity(spec.depth);
    for i in 0..spec.depth {
        let k = FIRST_BLOCK + PER_BLOCK * i;
        let (n1, ln1) = layer_norm_forward(&z, &p[k].value, &p[k + 1].value)?;
        let weights = MhsaWeights {
            wqkv: &p[k + 2].value,
            bqkv: &p[k + 3].value,
            wo: &p[k + 4].value,
            bo: &p[k + 5].value,
        };
        let (att, attn) = mhsa_forward(&n1, weights, spec.heads)?;
        add_into(&mut z, &att);
        let (n2, ln2) = layer_norm_forward(&z, &p[k + 6].value, &p[k + 7].value)?;
        let (f1, ff1) = linear_forward(&n2, &p[k + 8].value, &p[k + 9].value)?;
        let (r, relu) = relu_forward(&f1);
        let (f2, ff2) = linear_forward(&r, &p[k + 10].value, &p[k + 11].value)?;
        add_into(&mut z, &f2);
        blocks.push(BlockTape { ln1, attn, ln2, ff1, relu, ff2 });
    }

    let u = FIRST_BLOCK + PER_BLOCK * spec.depth;
    let (back, unembed) = linear_forward(&z, &p[u].value, &p[u + 1].value)?;
    let mut g = unpatchify(&back, c, h, w, spec.patch_size);
    add_into(&mut g, &stem);
    let (y, head) = conv2d_forward(&g, &p[u + 2].value, &p[u + 3].value)?;
    Ok((
        y,
        Tape {
            conv1,
            relu1,
            conv2,
            relu2,
            embed,
            blocks,
            unembed,
            head,
            dims: [c, h, w],
        },
    ))
}

pub(super) fn backward<T: Real>(spec: &ArchitectureSpec, tape: &Tape<T>, dy: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
    let [c, h, w] = tape.dims;
    let u = FIRST_BLOCK + PER_BLOCK * spec.depth;
    let n = u + 4;
    let mut g: Vec<Option<Tensor<T>>> = vec![None; n];

    let (dgrid, dw, db) = conv2d_backward(&tape.head, dy)?;
    g[u + 2] = Some(dw);
    g[u + 3] = Some(db);
    let dback = patchify(&dgrid, spec.patch_size)?;
    let (mut dz, dw, db) = linear_backward(&tape.unembed, &dback)?;
    g[u] = Some(dw);
    g[u + 1] = Some(db);

    for (i, b) in tape.blocks.iter().enumerate().rev() {
        let k = FIRST_BLOCK + PER_BLOCK * i;
        let (dr, dw2, db2) = linear_backward(&b.ff2, &dz)?;
        let df1 = relu_backward(&b.relu, &dr)?;
        let (dn2, dw1, db1) = linear_backward(&b.ff1, &df1)?;
        let (dres, dg2, dbeta2) = layer_norm_backward(&b.ln2, &dn2)?;
        add_into(&mut dz, &dres);
        let ag = mhsa_backward(&b.attn, &dz)?;
        let (dres, dg1, dbeta1) = layer_norm_backward(&b.ln1, &ag.dx)?;
        add_into(&mut dz, &dres);
        for (j, t) in [dg1, dbeta1, ag.dwqkv, ag.dbqkv, ag.dwo, ag.dbo, dg2, dbeta2, dw1, db1, dw2, db2]
            .into_iter()
            .enumerate()
        {
            g[k + j] = Some(t);
        }
    }

    g[6] = Some(dz.clone());
    let (dtok, dw, db) = linear_backward(&tape.embed, &dz)?;
    g[4] = Some(dw);
    g[5] = Some(db);
    let mut dstem = unpatchify(&dtok, c, h, w, spec.patch_size);
    add_into(&mut dstem, &dgrid);
    let da = relu_backward(&tape.relu2, &dstem)?;
    let (da, dw, db) = conv2d_backward(&tape.conv2, &da)?;
    g[2] = Some(dw);
    g[3] = Some(db);
    let da = relu_backward(&tape.relu1, &da)?;
    let (_, dw, db) = conv2d_backward(&tape.conv1, &da)?;
    g[0] = Some(dw);
    g[1] = Some(db);
    Ok(g.into_iter().map(Option::unwrap).collect())
}
