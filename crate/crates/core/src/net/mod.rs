//! The toy saliency network, its loss and its weight container.

pub mod config;
pub mod io;
pub mod loss;
pub mod model;

pub use config::{LevelKeyword, LevelSelection, NetConfig};
pub use io::{load_weights, read_container, save_weights, write_container, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub use loss::{check_binary, total_loss, LossVjp, PROB_EPS};
pub use model::{NetVjp, Prediction, SaliencyNet};
