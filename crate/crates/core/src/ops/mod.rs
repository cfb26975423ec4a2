//! Differentiable primitives. Each forward returns its output together with
//! a `*Vjp` value holding the context its `backward` needs to map an output
//! cotangent to input (and parameter) cotangents.

pub mod activation;
pub mod conv;
pub mod gradcheck;
pub mod norm;
pub mod resize;
pub mod softmax;

pub use activation::{relu, sigmoid, sigmoid_scalar, ReluVjp, SigmoidVjp};
pub use conv::{conv2d, ConvGeom, ConvGrads, ConvVjp};
pub use gradcheck::{grad_check, grad_check_entries, GradCheckConfig, GradCheckReport};
pub use norm::{default_groups, group_norm, GroupNormGrads, GroupNormVjp, GROUP_NORM_EPS};
pub use resize::{bilinear_resize, ResizeVjp};
pub use softmax::{softmax_channels, SoftmaxVjp};
