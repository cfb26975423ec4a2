//! Batch-one training with gradient accumulation.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{Optimizer, OptimizerConfig};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::net::{total_loss, SaliencyNet};
use crate::params::ParamStore;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    /// Samples whose gradients are summed into one update.
    pub accumulate: usize,
    /// Random horizontal flips with probability one half.
    pub flip: bool,
    /// Updates between checkpoints; 0 disables them.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerConfig::default(),
            accumulate: 10,
            flip: true,
            checkpoint_every: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.accumulate == 0 {
            return Err(Error::Config("accumulate must be positive".into()));
        }
        self.optimizer.validate()
    }

    /// Number of optimizer updates in a full run.
    pub fn updates(&self) -> usize {
        self.optimizer.max_iterations().div_ceil(self.accumulate)
    }
}

/// One row of the loss trace.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateRecord {
    /// 1-based.
    pub update: usize,
    /// Mean per-sample loss over the samples of this update.
    pub loss: f64,
    pub lr: f64,
    pub wall_ms: f64,
}

pub const TRACE_HEADER: &str = "update_index,loss,lr,wall_ms";

pub fn trace_csv(trace: &[UpdateRecord]) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for r in trace {
        writeln!(out, "{},{},{},{:.3}", r.update, r.loss, r.lr, r.wall_ms).expect("string write");
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &[UpdateRecord]) -> Result<()> {
    std::fs::write(path, trace_csv(trace)).map_err(|e| Error::io(path, e))
}

/// Hooks invoked by [`train_loop`].
pub trait TrainObserver {
    fn on_update(&mut self, _record: &UpdateRecord, _params: &ParamStore<f32>) -> Result<()> {
        Ok(())
    }

    fn on_checkpoint(&mut self, _update: usize, _params: &ParamStore<f32>) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

/// Flips image and mask left-right together with probability one half.
pub fn augment_flip(image: &Tensor<f32>, mask: &Tensor<f32>, rng: &mut impl Rng) -> (Tensor<f32>, Tensor<f32>, bool) {
    if rng.gen_bool(0.5) {
        (image.flip_horizontal(), mask.flip_horizontal(), true)
    } else {
        (image.clone(), mask.clone(), false)
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub trace: Vec<UpdateRecord>,
    pub iterations: usize,
    pub optimizer: Optimizer,
}

/// Visits samples in a fresh seeded permutation every epoch.
struct Schedule {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Schedule {
    fn new(len: usize, rng: ChaCha8Rng) -> Self {
        Schedule {
            order: (0..len).collect(),
            pos: len,
            rng,
        }
    }

    fn next(&mut self) -> usize {
        if self.pos == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

/// Trains `params` in place for the optimizer's iteration budget.
///
/// The gradients of `accumulate` consecutive samples are summed before
/// each update; a trailing partial window also produces an update. All
/// randomness derives from `seed`.
pub fn train_loop(
    net: &SaliencyNet,
    params: &mut ParamStore<f32>,
    data: &[Sample],
    cfg: &TrainConfig,
    seed: u64,
    observer: &mut impl TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut order_rng = ChaCha8Rng::seed_from_u64(seed);
    order_rng.set_stream(1);
    let mut flip_rng = ChaCha8Rng::seed_from_u64(seed);
    flip_rng.set_stream(2);
    let mut schedule = Schedule::new(data.len(), order_rng);

    let mut optimizer = Optimizer::new(cfg.optimizer.clone(), params)?;
    let mut grads = params.zeros_like();
    let total = cfg.optimizer.max_iterations();
    let mut trace = Vec::with_capacity(cfg.updates());
    let start = Instant::now();
    let mut window_loss = 0.0;
    let mut window_len = 0;
    let mut window_start = 0;

    for it in 0..total {
        let sample = &data[schedule.next()];
        let (image, mask) = if cfg.flip {
            let (i, m, _) = augment_flip(&sample.image, &sample.mask, &mut flip_rng);
            (i, m)
        } else {
            (sample.image.clone(), sample.mask.clone())
        };
        let (pred, vjp) = net.forward(params, &image)?;
        let (loss, loss_vjp) = total_loss(&pred.logits, &mask)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(it + 1));
        }
        net.backward(&vjp, &loss_vjp.backward(), &mut grads);
        window_loss += loss;
        window_len += 1;

        if window_len == cfg.accumulate || it + 1 == total {
            let lr = cfg.optimizer.lr_at(window_start);
            optimizer.step(params, &grads, lr)?;
            grads.fill_zero();
            let record = UpdateRecord {
                update: trace.len() + 1,
                loss: window_loss / window_len as f64,
                lr,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            };
            observer.on_update(&record, params)?;
            if cfg.checkpoint_every > 0 && record.update % cfg.checkpoint_every == 0 {
                observer.on_checkpoint(record.update, params)?;
            }
            trace.push(record);
            window_loss = 0.0;
            window_len = 0;
            window_start = it + 1;
        }
    }
    Ok(TrainOutcome {
        trace,
        iterations: total,
        optimizer,
    })
}
