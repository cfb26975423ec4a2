//! Summed per-level binary cross-entropy.

use crate::error::{Error, Result};
use crate::ops::{bilinear_resize, sigmoid, ResizeVjp, SigmoidVjp};
use crate::tensor::{Real, Tensor};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before the logarithm.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Clone, Debug)]
struct LevelLoss<T> {
    sigmoid: SigmoidVjp<T>,
    resize: ResizeVjp,
    /// Resized probabilities before clamping.
    prob: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct LossVjp<T> {
    levels: Vec<LevelLoss<T>>,
    gt: Tensor<T>,
}

pub fn check_binary<T: Real>(gt: &Tensor<T>) -> Result<()> {
    if gt.shape().c != 1 {
        return Err(Error::invalid("total_loss", format!("mask {} must have one channel", gt.shape())));
    }
    if let Some(v) = gt.data().iter().find(|&&v| v != T::zero() && v != T::one()) {
        return Err(Error::invalid("total_loss", format!("mask value {v} is not binary")));
    }
    Ok(())
}

/// `-sum_l sum_ij [g log p + (1 - g) log(1 - p)]`, where `p` is each level's
/// sigmoid map resized to the mask resolution.
pub fn total_loss<T: Real>(logits: &[Tensor<T>], gt: &Tensor<T>) -> Result<(f64, LossVjp<T>)> {
    check_binary(gt)?;
    let gs = gt.shape();
    let (lo, hi) = (T::lit(PROB_EPS), T::lit(1.0 - PROB_EPS));
    let mut total = 0.0f64;
    let mut levels = Vec::with_capacity(logits.len());
    for z in logits {
        if z.shape().b != gs.b || z.shape().c != 1 {
            return Err(Error::ShapeMismatch {
                op: "total_loss",
                lhs: z.shape(),
                rhs: gs,
            });
        }
        let (p, sigmoid) = sigmoid(z);
        let (prob, resize) = bilinear_resize(&p, gs.h, gs.w)?;
        for (&q, &g) in prob.data().iter().zip(gt.data()) {
            // `max`/`min` would silently replace NaN by a bound.
            let q = if q.is_nan() { q } else { q.max(lo).min(hi) }.to_f64_lossless();
            total -= if g == T::one() { q.ln() } else { (1.0 - q).ln() };
        }
        levels.push(LevelLoss { sigmoid, resize, prob });
    }
    Ok((
        total,
        LossVjp {
            levels,
            gt: gt.clone(),
        },
    ))
}

impl<T: Real> LossVjp<T> {
    /// Cotangents of each level's logits for a unit loss cotangent.
    pub fn backward(&self) -> Vec<Tensor<T>> {
        let (lo, hi) = (T::lit(PROB_EPS), T::lit(1.0 - PROB_EPS));
        self.levels
            .iter()
            .map(|lv| {
                let mut dq = Tensor::zeros(lv.prob.shape());
                for ((d, &q), &g) in dq.data_mut().iter_mut().zip(lv.prob.data()).zip(self.gt.data()) {
                    if q < lo || q > hi {
                        continue;
                    }
                    *d = if g == T::one() { -T::one() / q } else { T::one() / (T::one() - q) };
                }
                let dp = lv.resize.backward(&dq);
                lv.sigmoid.backward(&dp)
            })
            .collect()
    }
}
