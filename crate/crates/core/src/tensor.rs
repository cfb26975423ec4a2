//! Dense NCHW tensors.
//!
//! A [`Tensor`] owns a contiguous row-major buffer laid out as
//! `(batch, channels, height, width)`. Every numeric kernel in the crate is
//! generic over [`Real`] so the same code runs at `f32` for training and at
//! `f64` for finite-difference oracles.

use std::fmt;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, NumCast};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floating point element type.
pub trait Real:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Send
    + Sync
    + fmt::Debug
    + fmt::Display
    + 'static
{
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("literal fits the float type")
    }

    fn to_f64_lossless(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub b: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(b: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { b, c, h, w }
    }

    pub const fn numel(&self) -> usize {
        self.b * self.c * self.h * self.w
    }

    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    pub const fn with_channels(self, c: usize) -> Self {
        Shape { c, ..self }
    }

    pub const fn dims(&self) -> [usize; 4] {
        [self.b, self.c, self.h, self.w]
    }

    /// True when `weight` is a single-channel map broadcastable over `self`.
    pub fn accepts_channel_broadcast(&self, weight: &Shape) -> bool {
        weight.c == 1 && weight.b == self.b && weight.h == self.h && weight.w == self.w
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.b, self.c, self.h, self.w)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl From<(usize, usize, usize, usize)> for Shape {
    fn from((b, c, h, w): (usize, usize, usize, usize)) -> Self {
        Shape { b, c, h, w }
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: impl Into<Shape>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: impl Into<Shape>, value: T) -> Self {
        let shape = shape.into();
        Tensor {
            shape,
            data: vec![value; shape.numel()],
        }
    }

    pub fn from_vec(shape: impl Into<Shape>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        if data.len() != shape.numel() {
            return Err(Error::invalid(
                "from_vec",
                format!("buffer of {} values for shape {shape}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn from_fn(shape: impl Into<Shape>, mut f: impl FnMut([usize; 4]) -> T) -> Self {
        let shape = shape.into();
        let mut data = Vec::with_capacity(shape.numel());
        for b in 0..shape.b {
            for c in 0..shape.c {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        data.push(f([b, c, h, w]));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn offset(&self, b: usize, c: usize, h: usize, w: usize) -> usize {
        ((b * self.shape.c + c) * self.shape.h + h) * self.shape.w + w
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.offset(b, c, h, w)]
    }

    #[inline]
    pub fn at_mut(&mut self, b: usize, c: usize, h: usize, w: usize) -> &mut T {
        let i = self.offset(b, c, h, w);
        &mut self.data[i]
    }

    /// The `h * w` plane of one (sample, channel) pair.
    pub fn plane(&self, b: usize, c: usize) -> &[T] {
        let p = self.shape.plane();
        let start = (b * self.shape.c + c) * p;
        &self.data[start..start + p]
    }

    pub fn plane_mut(&mut self, b: usize, c: usize) -> &mut [T] {
        let p = self.shape.plane();
        let start = (b * self.shape.c + c) * p;
        &mut self.data[start..start + p]
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .map(|&v| U::from(v).expect("float cast"))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    fn check_same(&self, op: &'static str, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape,
                rhs: other.shape,
            });
        }
        Ok(())
    }

    fn zip_broadcast(&self, op: &'static str, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape == other.shape {
            let data = self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect();
            return Ok(Tensor {
                shape: self.shape,
                data,
            });
        }
        if !self.shape.accepts_channel_broadcast(&other.shape) {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape,
                rhs: other.shape,
            });
        }
        let mut out = self.clone();
        for b in 0..self.shape.b {
            let weight = other.plane(b, 0);
            for c in 0..self.shape.c {
                for (o, &wv) in out.plane_mut(b, c).iter_mut().zip(weight) {
                    *o = f(*o, wv);
                }
            }
        }
        Ok(out)
    }

    /// Elementwise sum; `other` may be a `(b, 1, h, w)` map broadcast over channels.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_broadcast("add", other, |a, b| a + b)
    }

    /// Elementwise product; `other` may be a `(b, 1, h, w)` map broadcast over channels.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_broadcast("mul", other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same("add_assign", other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Concatenates along the channel axis, preserving part order.
    pub fn concat_channels(parts: &[&Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat_channels", "no parts"))?
            .shape;
        let mut channels = 0;
        for p in parts {
            let s = p.shape;
            if (s.b, s.h, s.w) != (first.b, first.h, first.w) {
                return Err(Error::ShapeMismatch {
                    op: "concat_channels",
                    lhs: first,
                    rhs: s,
                });
            }
            channels += s.c;
        }
        let shape = first.with_channels(channels);
        let mut data = Vec::with_capacity(shape.numel());
        for b in 0..shape.b {
            for p in parts {
                let per_sample = p.shape.c * p.shape.plane();
                data.extend_from_slice(&p.data[b * per_sample..(b + 1) * per_sample]);
            }
        }
        Ok(Tensor { shape, data })
    }

    /// Channels `start..start + count` as a new tensor.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<Self> {
        if start + count > self.shape.c {
            return Err(Error::invalid(
                "slice_channels",
                format!("{start}..{} out of {} channels", start + count, self.shape.c),
            ));
        }
        let shape = self.shape.with_channels(count);
        let p = self.shape.plane();
        let mut data = Vec::with_capacity(shape.numel());
        for b in 0..shape.b {
            let base = (b * self.shape.c + start) * p;
            data.extend_from_slice(&self.data[base..base + count * p]);
        }
        Ok(Tensor { shape, data })
    }

    /// Splits into consecutive channel groups of the given sizes.
    pub fn split_channels(&self, sizes: &[usize]) -> Result<Vec<Self>> {
        if sizes.iter().sum::<usize>() != self.shape.c {
            return Err(Error::invalid(
                "split_channels",
                format!("sizes {sizes:?} do not cover {} channels", self.shape.c),
            ));
        }
        let mut start = 0;
        sizes
            .iter()
            .map(|&n| {
                let part = self.slice_channels(start, n);
                start += n;
                part
            })
            .collect()
    }

    /// Sample `b` as a batch-1 tensor.
    pub fn sample(&self, b: usize) -> Self {
        let per = self.shape.c * self.shape.plane();
        Tensor {
            shape: Shape::new(1, self.shape.c, self.shape.h, self.shape.w),
            data: self.data[b * per..(b + 1) * per].to_vec(),
        }
    }

    pub fn stack_batch(samples: &[Self]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::invalid("stack_batch", "no samples"))?
            .shape;
        let mut data = Vec::with_capacity(first.numel() * samples.len());
        for s in samples {
            if s.shape != first {
                return Err(Error::ShapeMismatch {
                    op: "stack_batch",
                    lhs: first,
                    rhs: s.shape,
                });
            }
            data.extend_from_slice(&s.data);
        }
        Ok(Tensor {
            shape: Shape::new(first.b * samples.len(), first.c, first.h, first.w),
            data,
        })
    }

    /// Mirrors every plane left-right.
    pub fn flip_horizontal(&self) -> Self {
        let mut out = self.clone();
        let w = self.shape.w;
        if w > 0 {
            for row in out.data.chunks_exact_mut(w) {
                row.reverse();
            }
        }
        out
    }

    /// Mirrors every plane top-bottom.
    pub fn flip_vertical(&self) -> Self {
        let mut out = self.clone();
        let (h, w) = (self.shape.h, self.shape.w);
        if h == 0 || w == 0 {
            return out;
        }
        for (dst, src) in out
            .data
            .chunks_exact_mut(h * w)
            .zip(self.data.chunks_exact(h * w))
        {
            for i in 0..h {
                dst[i * w..(i + 1) * w].copy_from_slice(&src[(h - 1 - i) * w..(h - i) * w]);
            }
        }
        out
    }
}
