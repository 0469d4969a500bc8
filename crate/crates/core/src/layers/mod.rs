//! Differentiable building blocks. Each operation is a pair of free
//! functions: a forward pass returning the output and an opaque context, and
//! a backward pass mapping the upstream gradient to input and parameter
//! gradients.

mod activation;
mod attention;
mod conv;
pub mod gradcheck;
mod linear;
mod norm;
mod param;
mod spectral;

pub use activation::{relu_backward, relu_forward, ReluCtx};
pub use attention::{check_heads, mhsa_backward, mhsa_forward, MhsaCtx, MhsaGrads, MhsaWeights};
pub use conv::{conv2d_backward, conv2d_forward, Conv2dCtx};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport, LayerKind, Probe};
pub use linear::{linear_backward, linear_forward, LinearCtx};
pub use norm::{layer_norm_backward, layer_norm_forward, LayerNormCtx, LAYER_NORM_EPS};
pub use param::{Init, Parameter};
pub use spectral::{
    spectral_conv_backward, spectral_conv_forward, spectral_imag_residue, spectral_weight_shape,
    SpectralCtx,
};
