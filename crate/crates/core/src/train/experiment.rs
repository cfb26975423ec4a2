//! Train-then-evaluate runs shared by the ablation tables and the toy
//! experiments.

use rayon::prelude::*;

use super::trainer::{train_loop, TrainConfig, TrainObserver, UpdateRecord};
use crate::data::Sample;
use crate::error::Result;
use crate::metrics::EvalReport;
use crate::net::{NetConfig, SaliencyNet};
use crate::params::ParamStore;
use crate::tensor::Tensor;

/// Saliency map `(1, 1, h, w)` of a single `(1, c, h, w)` image.
pub fn predict(net: &SaliencyNet, params: &ParamStore<f32>, image: &Tensor<f32>) -> Result<Tensor<f32>> {
    let (pred, _) = net.forward(params, image)?;
    Ok(pred.saliency())
}

pub fn evaluate(net: &SaliencyNet, params: &ParamStore<f32>, samples: &[Sample]) -> Result<EvalReport> {
    let pairs = samples
        .par_iter()
        .map(|s| Ok((s.id.clone(), predict(net, params, &s.image)?, s.mask.clone())))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::evaluate(&pairs)
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub net: SaliencyNet,
    pub params: ParamStore<f32>,
    pub trace: Vec<UpdateRecord>,
    pub report: EvalReport,
}

impl RunResult {
    pub fn max_f(&self) -> f64 {
        self.report.summary.fbeta_max.unwrap_or(0.0)
    }
}

/// Mean loss over the first and last `window` updates.
pub fn loss_ends(trace: &[UpdateRecord], window: usize) -> (f64, f64) {
    let w = window.clamp(1, trace.len().max(1));
    let mean = |rs: &[UpdateRecord]| rs.iter().map(|r| r.loss).sum::<f64>() / rs.len().max(1) as f64;
    (mean(&trace[..w.min(trace.len())]), mean(&trace[trace.len().saturating_sub(w)..]))
}

/// Initializes from `seed`, trains on `train` and evaluates on `eval`.
pub fn fit(
    net_cfg: &NetConfig,
    train_cfg: &TrainConfig,
    train: &[Sample],
    eval: &[Sample],
    seed: u64,
    observer: &mut impl TrainObserver,
) -> Result<RunResult> {
    let (net, mut params) = SaliencyNet::init::<f32>(net_cfg, seed)?;
    let outcome = train_loop(&net, &mut params, train, train_cfg, seed, observer)?;
    let report = evaluate(&net, &params, eval)?;
    Ok(RunResult {
        net,
        params,
        trace: outcome.trace,
        report,
    })
}
