//! Primitive operations used by the network: a generalized 2-D convolution
//! (standard, point-wise, depth-wise, asymmetric and dilated are all
//! parameterizations of [`ConvSpec`]), inference batch norm, PReLU, pooling
//! and bilinear upsampling.
//!
//! Convolution is cross-correlation (no kernel flip) with zero padding.

mod conv;
mod gemm;
mod norm;
mod pool;
mod resize;

pub use conv::{conv2d, ConvSpec};
pub use norm::{batch_norm_infer, prelu, BnParams, PreluParams};
pub(crate) use norm::{batch_norm_in_place, prelu_in_place};
pub use pool::{avg_pool_downsample, max_pool_2x2_s2};
pub use resize::bilinear_upsample;
