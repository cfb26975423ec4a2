//! Optimizers, the accumulating training loop and train/evaluate runs.

pub mod ablation;
mod experiment;
mod optim;
mod trainer;

pub use experiment::{evaluate, fit, loss_ends, predict, RunResult};
pub use optim::{AdamConfig, Optimizer, OptimizerConfig, Preset, SgdConfig};
pub use trainer::{
    augment_flip, trace_csv, train_loop, write_trace_csv, TrainConfig, TrainObserver, TrainOutcome, UpdateRecord,
    TRACE_HEADER,
};
