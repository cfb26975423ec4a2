//! Named parameter storage shared by every trainable layer.
//!
//! Layers keep [`ParamId`] handles into a [`ParamStore`]; the same layer
//! graph therefore runs against `f32` training weights, a cast `f64` copy for
//! finite-difference checks, or a zeroed store used as a gradient
//! accumulator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{Real, Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Kernel,
    Bias,
    NormAffine,
    ScanBeta,
    /// Scan slope held at its initial value (the fixed-β ablation).
    FixedScanBeta,
}

impl ParamKind {
    /// Weight decay touches convolution kernels and scan slopes only.
    pub fn decays(self) -> bool {
        matches!(self, ParamKind::Kernel | ParamKind::ScanBeta)
    }

    pub fn trainable(self) -> bool {
        self != ParamKind::FixedScanBeta
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub kind: ParamKind,
    pub value: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamStore<T = f32> {
    params: Vec<Param<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, kind: ParamKind, value: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::invalid("ParamStore::add", format!("duplicate parameter `{name}`")));
        }
        self.params.push(Param { name, kind, value });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn param(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    kind: p.kind,
                    value: Tensor::zeros(p.value.shape()),
                })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for p in &mut self.params {
            p.value.data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    kind: p.kind,
                    value: p.value.cast(),
                })
                .collect(),
        }
    }

    /// Adds `other` entry by entry. Both stores must share a layout.
    pub fn accumulate(&mut self, other: &Self) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::invalid("ParamStore::accumulate", "stores differ in length"));
        }
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            a.value.add_assign(&b.value)?;
        }
        Ok(())
    }

    /// Adds `delta` into the tensor behind `id`.
    pub(crate) fn add_into(&mut self, id: ParamId, delta: &Tensor<T>) {
        self.params[id.0]
            .value
            .add_assign(delta)
            .expect("gradient shaped like its parameter");
    }

    /// Flattens every parameter into one vector, in store order.
    pub fn flatten(&self) -> Vec<T> {
        self.params
            .iter()
            .flat_map(|p| p.value.data().iter().copied())
            .collect()
    }

    pub fn unflatten(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.numel() {
            return Err(Error::invalid(
                "ParamStore::unflatten",
                format!("{} values for {} parameters", flat.len(), self.numel()),
            ));
        }
        let mut off = 0;
        for p in &mut self.params {
            let n = p.value.len();
            p.value.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }
}

/// Deterministic per-parameter initializer.
///
/// Each tensor draws from its own stream seeded by `(seed, name)`, so two
/// model variants that share a parameter name start from identical values
/// regardless of which other parameters exist.
#[derive(Clone, Copy, Debug)]
pub struct Initializer {
    pub seed: u64,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Initializer { seed }
    }

    fn rng(&self, name: &str) -> ChaCha8Rng {
        // FNV-1a over the name, mixed with the run seed.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in name.bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        ChaCha8Rng::seed_from_u64(h ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    /// He-normal kernel for an `(out, in, kh, kw)` convolution.
    pub fn kernel<T: Real>(&self, name: &str, shape: Shape) -> Tensor<T> {
        let fan_in = (shape.c * shape.h * shape.w).max(1) as f64;
        self.normal(name, shape, (2.0 / fan_in).sqrt())
    }

    pub fn normal<T: Real>(&self, name: &str, shape: Shape, std: f64) -> Tensor<T> {
        let mut rng = self.rng(name);
        let dist = Normal::new(0.0, std).expect("finite std");
        let data = (0..shape.numel()).map(|_| T::lit(dist.sample(&mut rng))).collect();
        Tensor::from_vec(shape, data).expect("sized by shape")
    }
}
