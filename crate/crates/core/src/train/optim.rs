//! SGD with momentum and Adam with decoupled weight decay.
//!
//! Weight decay touches only parameters whose kind decays (conv kernels
//! and learnable scan slopes); frozen parameters are never modified.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamStore;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Iteration from which the learning rate is divided by ten.
    pub lr_drop_at: Option<usize>,
    pub max_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
    pub max_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Sgd(SgdConfig),
    Adam(AdamConfig),
}

/// Named optimizer settings selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Sgd,
    Adam,
    PaperSgd,
    PaperAdam,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Sgd, Preset::Adam, Preset::PaperSgd, Preset::PaperAdam];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Sgd => "sgd",
            Preset::Adam => "adam",
            Preset::PaperSgd => "paper-sgd",
            Preset::PaperAdam => "paper-adam",
        }
    }

    pub fn config(self) -> OptimizerConfig {
        let sgd = |lr, max_iterations| {
            OptimizerConfig::Sgd(SgdConfig {
                lr,
                momentum: 0.9,
                weight_decay: 5e-4,
                lr_drop_at: Some(13_000),
                max_iterations,
            })
        };
        let adam = |lr, max_iterations| {
            OptimizerConfig::Adam(AdamConfig {
                lr,
                beta1: 0.9,
                beta2: 0.999,
                weight_decay: 5e-4,
                eps: 1e-8,
                max_iterations,
            })
        };
        match self {
            Preset::Sgd => sgd(1e-3, 20_000),
            Preset::Adam => adam(1e-4, 20_000),
            Preset::PaperSgd => sgd(1e-8, 20_000),
            Preset::PaperAdam => adam(1e-5, 50_000),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown optimizer preset `{s}`")))
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Preset::Adam.config()
    }
}

impl OptimizerConfig {
    pub fn max_iterations(&self) -> usize {
        match self {
            OptimizerConfig::Sgd(c) => c.max_iterations,
            OptimizerConfig::Adam(c) => c.max_iterations,
        }
    }

    pub fn set_max_iterations(&mut self, n: usize) {
        match self {
            OptimizerConfig::Sgd(c) => c.max_iterations = n,
            OptimizerConfig::Adam(c) => c.max_iterations = n,
        }
    }

    pub fn base_lr(&self) -> f64 {
        match self {
            OptimizerConfig::Sgd(c) => c.lr,
            OptimizerConfig::Adam(c) => c.lr,
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        match self {
            OptimizerConfig::Sgd(c) => c.lr = lr,
            OptimizerConfig::Adam(c) => c.lr = lr,
        }
    }

    /// Learning rate for an update taken after `iteration` completed samples.
    pub fn lr_at(&self, iteration: usize) -> f64 {
        match self {
            OptimizerConfig::Sgd(c) => match c.lr_drop_at {
                Some(at) if iteration >= at => c.lr * 0.1,
                _ => c.lr,
            },
            OptimizerConfig::Adam(c) => c.lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        match self {
            OptimizerConfig::Sgd(c) => {
                if !(c.lr >= 0.0 && c.lr.is_finite()) {
                    return fail(format!("sgd lr must be finite and >= 0, got {}", c.lr));
                }
                if !(0.0..1.0).contains(&c.momentum) {
                    return fail(format!("sgd momentum must lie in [0, 1), got {}", c.momentum));
                }
                if !(c.weight_decay >= 0.0) {
                    return fail("sgd weight_decay must be >= 0".into());
                }
            }
            OptimizerConfig::Adam(c) => {
                if !(c.lr >= 0.0 && c.lr.is_finite()) {
                    return fail(format!("adam lr must be finite and >= 0, got {}", c.lr));
                }
                if !(0.0..1.0).contains(&c.beta1) || !(0.0..1.0).contains(&c.beta2) {
                    return fail("adam betas must lie in [0, 1)".into());
                }
                if !(c.eps > 0.0) || !(c.weight_decay >= 0.0) {
                    return fail("adam eps must be > 0 and weight_decay >= 0".into());
                }
            }
        }
        Ok(())
    }
}

/// Optimizer state: SGD velocity, or Adam first and second moments.
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: ParamStore<f32>,
    second: ParamStore<f32>,
    steps: usize,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, params: &ParamStore<f32>) -> Result<Self> {
        config.validate()?;
        Ok(Optimizer {
            config,
            first: params.zeros_like(),
            second: params.zeros_like(),
            steps: 0,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// SGD velocity or Adam first moment.
    pub fn first_moment(&self) -> &ParamStore<f32> {
        &self.first
    }

    /// Adam second moment; zero under SGD.
    pub fn second_moment(&self) -> &ParamStore<f32> {
        &self.second
    }

    /// Applies one update. Nothing is modified if any trainable gradient is
    /// non-finite.
    pub fn step(&mut self, params: &mut ParamStore<f32>, grads: &ParamStore<f32>, lr: f64) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::invalid("optimizer step", "gradient store does not match parameters"));
        }
        for id in params.ids() {
            let p = params.param(id);
            if p.kind.trainable() && !grads.get(id).is_finite() {
                return Err(Error::NonFiniteGradient(p.name.clone()));
            }
        }
        self.steps += 1;
        let t = self.steps as i32;
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let kind = params.param(id).kind;
            if !kind.trainable() {
                continue;
            }
            let g = grads.get(id).data();
            let w = params.get_mut(id).data_mut();
            let m = self.first.get_mut(id).data_mut();
            let v = self.second.get_mut(id).data_mut();
            match &self.config {
                OptimizerConfig::Sgd(c) => {
                    let wd = if kind.decays() { c.weight_decay } else { 0.0 };
                    for i in 0..w.len() {
                        let vel = c.momentum * f64::from(m[i]) + f64::from(g[i]) + wd * f64::from(w[i]);
                        m[i] = vel as f32;
                        w[i] = (f64::from(w[i]) - lr * vel) as f32;
                    }
                }
                OptimizerConfig::Adam(c) => {
                    let wd = if kind.decays() { c.weight_decay } else { 0.0 };
                    let bc1 = 1.0 - c.beta1.powi(t);
                    let bc2 = 1.0 - c.beta2.powi(t);
                    for i in 0..w.len() {
                        let gi = f64::from(g[i]);
                        let mi = c.beta1 * f64::from(m[i]) + (1.0 - c.beta1) * gi;
                        let vi = c.beta2 * f64::from(v[i]) + (1.0 - c.beta2) * gi * gi;
                        m[i] = mi as f32;
                        v[i] = vi as f32;
                        let wi = f64::from(w[i]);
                        let update = (mi / bc1) / ((vi / bc2).sqrt() + c.eps) + wd * wi;
                        w[i] = (wi - lr * update) as f32;
                    }
                }
            }
        }
        Ok(())
    }
}
