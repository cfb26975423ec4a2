//! Parameterized layers: thin wrappers binding [`ops`](crate::ops) kernels
//! to entries of a [`ParamStore`].

use crate::error::Result;
use crate::ops::{conv2d, group_norm, ConvGeom, ConvVjp, GroupNormVjp, GROUP_NORM_EPS};
use crate::params::{Initializer, ParamId, ParamKind, ParamStore};
use crate::tensor::{Real, Shape, Tensor};

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub kernel: ParamId,
    pub bias: ParamId,
    pub geom: ConvGeom,
}

impl Conv2d {
    /// `size x size` convolution; padding keeps "same" output at stride 1.
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        init: &Initializer,
        name: &str,
        in_c: usize,
        out_c: usize,
        size: usize,
        stride: usize,
    ) -> Result<Self> {
        let kname = format!("{name}.kernel");
        let kernel = init.kernel(&kname, Shape::new(out_c, in_c, size, size));
        let kernel = store.add(kname, ParamKind::Kernel, kernel)?;
        let bias = store.add(format!("{name}.bias"), ParamKind::Bias, Tensor::zeros((1, out_c, 1, 1)))?;
        Ok(Conv2d {
            kernel,
            bias,
            geom: ConvGeom {
                stride,
                pad: size / 2,
            },
        })
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<(Tensor<T>, ConvVjp<T>)> {
        conv2d(x, store.get(self.kernel), store.get(self.bias), self.geom)
    }

    /// Accumulates parameter gradients into `grads` and returns the input cotangent.
    pub fn backward<T: Real>(&self, vjp: &ConvVjp<T>, dy: &Tensor<T>, grads: &mut ParamStore<T>) -> Tensor<T> {
        let g = vjp.backward(dy);
        grads.add_into(self.kernel, &g.kernel);
        grads.add_into(self.bias, &g.bias);
        g.input
    }
}

#[derive(Clone, Debug)]
pub struct GroupNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub groups: usize,
}

impl GroupNorm {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, channels: usize, groups: usize) -> Result<Self> {
        let gamma = store.add(
            format!("{name}.gamma"),
            ParamKind::NormAffine,
            Tensor::full((1, channels, 1, 1), T::one()),
        )?;
        let beta = store.add(format!("{name}.beta"), ParamKind::NormAffine, Tensor::zeros((1, channels, 1, 1)))?;
        Ok(GroupNorm { gamma, beta, groups })
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<(Tensor<T>, GroupNormVjp<T>)> {
        group_norm(x, store.get(self.gamma), store.get(self.beta), self.groups, GROUP_NORM_EPS)
    }

    pub fn backward<T: Real>(&self, vjp: &GroupNormVjp<T>, dy: &Tensor<T>, grads: &mut ParamStore<T>) -> Tensor<T> {
        let g = vjp.backward(dy);
        grads.add_into(self.gamma, &g.gamma);
        grads.add_into(self.beta, &g.beta);
        g.input
    }
}
