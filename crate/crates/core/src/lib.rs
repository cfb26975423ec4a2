//! Spatial attenuation context (SAC) for salient object detection.
//!
//! The crate provides a small differentiable tensor toolkit ([`ops`]), the
//! attenuating directional scans and the SAC module built on them ([`sac`]),
//! a toy feature-pyramid saliency network ([`net`]), optimizers and the
//! training loop ([`train`]), saliency metrics ([`metrics`]) and PPM/PGM
//! dataset handling ([`data`]).

pub mod checks;
pub mod data;
pub mod error;
pub mod metrics;
pub mod net;
pub mod nn;
pub mod ops;
pub mod params;
pub mod sac;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use params::{Initializer, ParamId, ParamKind, ParamStore};
pub use tensor::{Real, Shape, Tensor};
