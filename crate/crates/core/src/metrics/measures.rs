//! F-measure, MAE and balanced error rate.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Weight of precision relative to recall.
pub const BETA2: f64 = 0.3;

/// Number of uniformly spaced thresholds of the precision/recall curve.
pub const THRESHOLDS: usize = 256;

/// Validates a `(1, 1, h, w)` prediction in `[0, 1]` against a binary mask.
pub fn check_pair(pred: &Tensor<f32>, gt: &Tensor<f32>) -> Result<()> {
    let (sp, sg) = (pred.shape(), gt.shape());
    if sp != sg || sp.b != 1 || sp.c != 1 {
        return Err(Error::ShapeMismatch {
            op: "metrics",
            lhs: sp,
            rhs: sg,
        });
    }
    if pred.data().iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::invalid("metrics", "prediction values must lie in [0, 1]"));
    }
    crate::net::check_binary(gt)
}

pub fn fbeta(precision: f64, recall: f64) -> f64 {
    let den = BETA2 * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + BETA2) * precision * recall / den
    }
}

/// Precision and recall from confusion counts; an empty prediction has
/// precision 0.
pub fn precision_recall(tp: usize, fp: usize, fn_: usize) -> (f64, f64) {
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    (p, r)
}

/// 8-bit level of a prediction; threshold `i / 255` of the curve accepts
/// levels `> i`.
pub fn level(p: f32) -> usize {
    (f64::from(p) * 255.0).round() as usize
}

#[derive(Clone, Debug, PartialEq)]
pub struct FMeasure {
    /// Indexed by threshold `i / 255`, `i = 0..=255`. The last threshold
    /// accepts nothing.
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub curve: Vec<f64>,
    pub max: f64,
    pub adaptive: f64,
    pub adaptive_threshold: f64,
}

/// `None` when the mask has no foreground, where recall is undefined.
pub fn f_measure(pred: &Tensor<f32>, gt: &Tensor<f32>) -> Result<Option<FMeasure>> {
    check_pair(pred, gt)?;
    let positives = gt.data().iter().filter(|&&g| g == 1.0).count();
    if positives == 0 {
        return Ok(None);
    }
    let mut fg_hist = [0usize; THRESHOLDS];
    let mut bg_hist = [0usize; THRESHOLDS];
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        if g == 1.0 {
            fg_hist[level(p)] += 1;
        } else {
            bg_hist[level(p)] += 1;
        }
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut precision = vec![0.0; THRESHOLDS];
    let mut recall = vec![0.0; THRESHOLDS];
    for i in (0..THRESHOLDS).rev() {
        (precision[i], recall[i]) = precision_recall(tp, fp, positives - tp);
        tp += fg_hist[i];
        fp += bg_hist[i];
    }
    let curve: Vec<f64> = precision.iter().zip(&recall).map(|(&p, &r)| fbeta(p, r)).collect();
    let max = curve.iter().copied().fold(0.0, f64::max);

    let mean = pred.data().iter().map(|&p| f64::from(p)).sum::<f64>() / pred.len() as f64;
    let t = (2.0 * mean).min(1.0);
    let (mut tp, mut fp) = (0, 0);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        if f64::from(p) >= t {
            if g == 1.0 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let (pa, ra) = precision_recall(tp, fp, positives - tp);
    Ok(Some(FMeasure {
        precision,
        recall,
        curve,
        max,
        adaptive: fbeta(pa, ra),
        adaptive_threshold: t,
    }))
}

pub fn mae(pred: &Tensor<f32>, gt: &Tensor<f32>) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return Err(Error::ShapeMismatch {
            op: "mae",
            lhs: pred.shape(),
            rhs: gt.shape(),
        });
    }
    if pred.data().iter().chain(gt.data()).any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::invalid("mae", "values must lie in [0, 1]"));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(&p, &g)| (f64::from(p) - f64::from(g)).abs())
        .sum();
    Ok(sum / pred.len().max(1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ber {
    /// Percentage in `[0, 100]`.
    pub value: f64,
    /// A class is absent from the mask; its rate was taken as 1.
    pub flagged: bool,
}

/// `100 (1 - (TPR + TNR) / 2)`, predicting foreground where `pred >= threshold`.
pub fn ber(pred: &Tensor<f32>, gt: &Tensor<f32>, threshold: f64) -> Result<Ber> {
    check_pair(pred, gt)?;
    let (mut tp, mut tn, mut pos, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let hit = f64::from(p) >= threshold;
        if g == 1.0 {
            pos += 1;
            tp += usize::from(hit);
        } else {
            neg += 1;
            tn += usize::from(!hit);
        }
    }
    let rate = |k: usize, n: usize| if n == 0 { 1.0 } else { k as f64 / n as f64 };
    Ok(Ber {
        value: 100.0 * (1.0 - 0.5 * (rate(tp, pos) + rate(tn, neg))),
        flagged: pos == 0 || neg == 0,
    })
}
