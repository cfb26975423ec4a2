//! The attention branch: two 3x3 conv + group norm + ReLU blocks, a 1x1
//! conv to one logit per attenuation factor, and a per-pixel softmax.

use crate::error::Result;
use crate::nn::{Conv2d, GroupNorm};
use crate::ops::{relu, softmax_channels, ConvVjp, GroupNormVjp, ReluVjp, SoftmaxVjp};
use crate::params::{Initializer, ParamStore};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug)]
pub struct Attention {
    pub conv1: Conv2d,
    pub norm1: GroupNorm,
    pub conv2: Conv2d,
    pub norm2: GroupNorm,
    pub logits: Conv2d,
}

#[derive(Clone, Debug)]
pub struct AttentionVjp<T> {
    conv1: ConvVjp<T>,
    norm1: GroupNormVjp<T>,
    relu1: ReluVjp<T>,
    conv2: ConvVjp<T>,
    norm2: GroupNormVjp<T>,
    relu2: ReluVjp<T>,
    logits: ConvVjp<T>,
    softmax: SoftmaxVjp<T>,
}

impl Attention {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        init: &Initializer,
        name: &str,
        in_c: usize,
        hidden: usize,
        factors: usize,
        groups: usize,
    ) -> Result<Self> {
        Ok(Attention {
            conv1: Conv2d::new(store, init, &format!("{name}.conv1"), in_c, hidden, 3, 1)?,
            norm1: GroupNorm::new(store, &format!("{name}.norm1"), hidden, groups)?,
            conv2: Conv2d::new(store, init, &format!("{name}.conv2"), hidden, hidden, 3, 1)?,
            norm2: GroupNorm::new(store, &format!("{name}.norm2"), hidden, groups)?,
            logits: Conv2d::new(store, init, &format!("{name}.logits"), hidden, factors, 1, 1)?,
        })
    }

    /// Per-pixel weights over the attenuation factors; they sum to one.
    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<(Tensor<T>, AttentionVjp<T>)> {
        let (h, conv1) = self.conv1.forward(store, x)?;
        let (h, norm1) = self.norm1.forward(store, &h)?;
        let (h, relu1) = relu(&h);
        let (h, conv2) = self.conv2.forward(store, &h)?;
        let (h, norm2) = self.norm2.forward(store, &h)?;
        let (h, relu2) = relu(&h);
        let (a, logits) = self.logits.forward(store, &h)?;
        let (w, softmax) = softmax_channels(&a)?;
        Ok((
            w,
            AttentionVjp {
                conv1,
                norm1,
                relu1,
                conv2,
                norm2,
                relu2,
                logits,
                softmax,
            },
        ))
    }

    pub fn backward<T: Real>(&self, vjp: &AttentionVjp<T>, dw: &Tensor<T>, grads: &mut ParamStore<T>) -> Tensor<T> {
        let d = vjp.softmax.backward(dw);
        let d = self.logits.backward(&vjp.logits, &d, grads);
        let d = vjp.relu2.backward(&d);
        let d = self.norm2.backward(&vjp.norm2, &d, grads);
        let d = self.conv2.backward(&vjp.conv2, &d, grads);
        let d = vjp.relu1.backward(&d);
        let d = self.norm1.backward(&vjp.norm1, &d, grads);
        self.conv1.backward(&vjp.conv1, &d, grads)
    }
}
