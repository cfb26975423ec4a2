use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug)]
pub struct SoftmaxVjp<T> {
    output: Tensor<T>,
}

/// Per-pixel softmax across the channel axis.
pub fn softmax_channels<T: Real>(logits: &Tensor<T>) -> Result<(Tensor<T>, SoftmaxVjp<T>)> {
    let s = logits.shape();
    if s.c == 0 {
        return Err(Error::invalid("softmax_channels", "zero channels"));
    }
    let plane = s.plane();
    let mut out = Tensor::zeros(s);
    let mut scratch = vec![T::zero(); s.c];
    for b in 0..s.b {
        for p in 0..plane {
            let at = |c: usize| (b * s.c + c) * plane + p;
            let max = (0..s.c)
                .map(|c| logits.data()[at(c)])
                .fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for (c, e) in scratch.iter_mut().enumerate() {
                *e = (logits.data()[at(c)] - max).exp();
                total += *e;
            }
            for (c, &e) in scratch.iter().enumerate() {
                out.data_mut()[at(c)] = e / total;
            }
        }
    }
    Ok((out.clone(), SoftmaxVjp { output: out }))
}

impl<T: Real> SoftmaxVjp<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }

    pub fn backward(&self, dy: &Tensor<T>) -> Tensor<T> {
        let s = self.output.shape();
        let plane = s.plane();
        let y = self.output.data();
        let mut dx = Tensor::zeros(s);
        for b in 0..s.b {
            for p in 0..plane {
                let at = |c: usize| (b * s.c + c) * plane + p;
                let dot: T = (0..s.c).map(|c| y[at(c)] * dy.data()[at(c)]).sum();
                for c in 0..s.c {
                    dx.data_mut()[at(c)] = y[at(c)] * (dy.data()[at(c)] - dot);
                }
            }
        }
        dx
    }
}
