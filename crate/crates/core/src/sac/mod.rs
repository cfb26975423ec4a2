//! Spatial attenuation context: directional scans, attention-weighted
//! fusion and the multi-round module.

pub mod attention;
pub mod fuse;
pub mod module;
pub mod scan;

pub use attention::{Attention, AttentionVjp};
pub use fuse::{fuse_round, FuseGrads, FuseVjp};
pub use module::{AttentionMode, DirectionSet, SacConfig, SacModule, SacRound, SacVjp};
pub use scan::{attenuated_scan, attenuation, Direction, ScanGrads, ScanVjp};
