//! Group normalization.

use crate::error::{Error, Result};
use crate::tensor::{Real, Shape, Tensor};

pub const GROUP_NORM_EPS: f64 = 1e-5;

/// Largest divisor of `channels` not exceeding 32.
pub fn default_groups(channels: usize) -> usize {
    (1..=channels.min(32))
        .rev()
        .find(|g| channels % g == 0)
        .unwrap_or(1)
}

#[derive(Clone, Debug)]
pub struct GroupNormVjp<T> {
    normalized: Tensor<T>,
    inv_std: Vec<T>,
    gamma: Vec<T>,
    groups: usize,
}

#[derive(Clone, Debug)]
pub struct GroupNormGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

/// Normalizes each (sample, group) to zero mean and unit variance, then
/// applies the per-channel affine `gamma * x + beta`.
pub fn group_norm<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    groups: usize,
    eps: f64,
) -> Result<(Tensor<T>, GroupNormVjp<T>)> {
    let s = x.shape();
    if groups == 0 || s.c % groups != 0 {
        return Err(Error::invalid(
            "group_norm",
            format!("{groups} groups do not divide {} channels", s.c),
        ));
    }
    if gamma.len() != s.c || beta.len() != s.c {
        return Err(Error::invalid(
            "group_norm",
            format!("affine params sized {}/{} for {} channels", gamma.len(), beta.len(), s.c),
        ));
    }
    if eps <= 0.0 {
        return Err(Error::invalid("group_norm", "epsilon must be positive"));
    }
    let eps = T::lit(eps);
    let cpg = s.c / groups;
    let span = cpg * s.plane();
    let mut normalized = Tensor::zeros(s);
    let mut inv_std = Vec::with_capacity(s.b * groups);
    let n = T::from_usize(span).expect("count fits");
    // Groups are contiguous: sample-major, then channel blocks of `cpg`.
    for gi in 0..s.b * groups {
        let range = gi * span..(gi + 1) * span;
        let src = &x.data()[range.clone()];
        let mean = src.iter().copied().sum::<T>() / n;
        let var = src.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let istd = T::one() / (var + eps).sqrt();
        for (d, &v) in normalized.data_mut()[range].iter_mut().zip(src) {
            *d = (v - mean) * istd;
        }
        inv_std.push(istd);
    }
    let mut y = normalized.clone();
    for b in 0..s.b {
        for c in 0..s.c {
            let (g, bt) = (gamma.data()[c], beta.data()[c]);
            for v in y.plane_mut(b, c) {
                *v = g * *v + bt;
            }
        }
    }
    Ok((
        y,
        GroupNormVjp {
            normalized,
            inv_std,
            gamma: gamma.data().to_vec(),
            groups,
        },
    ))
}

impl<T: Real> GroupNormVjp<T> {
    pub fn backward(&self, dy: &Tensor<T>) -> GroupNormGrads<T> {
        let s: Shape = self.normalized.shape();
        let cpg = s.c / self.groups;
        let plane = s.plane();
        let mut dgamma = Tensor::zeros((1, s.c, 1, 1));
        let mut dbeta = Tensor::zeros((1, s.c, 1, 1));
        let mut dx = Tensor::zeros(s);
        for b in 0..s.b {
            for c in 0..s.c {
                let (g, xh) = (dy.plane(b, c), self.normalized.plane(b, c));
                dgamma.data_mut()[c] += g.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>();
                dbeta.data_mut()[c] += g.iter().copied().sum::<T>();
            }
            for grp in 0..self.groups {
                let istd = self.inv_std[b * self.groups + grp];
                let n = T::from_usize(cpg * plane).expect("count fits");
                // dxhat = dy * gamma; dx = istd/n * (n*dxhat - sum dxhat - xhat * sum(dxhat*xhat))
                let mut sum_d = T::zero();
                let mut sum_dx = T::zero();
                for c in grp * cpg..(grp + 1) * cpg {
                    let gm = self.gamma[c];
                    for (&g, &xh) in dy.plane(b, c).iter().zip(self.normalized.plane(b, c)) {
                        let d = g * gm;
                        sum_d += d;
                        sum_dx += d * xh;
                    }
                }
                for c in grp * cpg..(grp + 1) * cpg {
                    let gm = self.gamma[c];
                    let xh = self.normalized.plane(b, c);
                    let g = dy.plane(b, c);
                    let out = dx.plane_mut(b, c);
                    for i in 0..plane {
                        out[i] = istd / n * (n * g[i] * gm - sum_d - xh[i] * sum_dx);
                    }
                }
            }
        }
        GroupNormGrads {
            input: dx,
            gamma: dgamma,
            beta: dbeta,
        }
    }
}
