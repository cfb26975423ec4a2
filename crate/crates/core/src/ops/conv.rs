//! Direct 2-D convolution with zero padding.
//!
//! Kernels are `(out_c, in_c, kh, kw)`, biases `(1, out_c, 1, 1)`. Each
//! output plane is accumulated as a sequence of shifted row updates
//! (`oc -> ic -> ky -> kx -> oy -> ox`), which keeps the inner loop
//! contiguous for stride 1. Work is split across (sample, output channel)
//! lanes; every lane is written by exactly one task in a fixed order, so the
//! result does not depend on the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Real, Shape, Tensor};

/// Below this many multiply-adds a call stays on the current thread.
const PAR_THRESHOLD: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    /// Stride-1 geometry that preserves spatial size for an odd kernel.
    pub fn same(kernel: usize) -> Self {
        ConvGeom {
            stride: 1,
            pad: kernel / 2,
        }
    }

    pub fn out_len(&self, input: usize, kernel: usize) -> usize {
        (input + 2 * self.pad).saturating_sub(kernel) / self.stride + 1
    }
}

/// Captured forward context of [`conv2d`].
#[derive(Clone, Debug)]
pub struct ConvVjp<T> {
    input: Tensor<T>,
    kernel: Tensor<T>,
    geom: ConvGeom,
}

#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Range of output indices whose tap `k` lands inside `[0, input)`.
#[inline]
fn valid_range(out_len: usize, input: usize, k: usize, geom: ConvGeom) -> (usize, usize) {
    // i = o * stride + k - pad must satisfy 0 <= i < input
    let lo = if k >= geom.pad {
        0
    } else {
        (geom.pad - k).div_ceil(geom.stride)
    };
    let hi = if input + geom.pad > k {
        ((input + geom.pad - k - 1) / geom.stride + 1).min(out_len)
    } else {
        0
    };
    (lo, hi.max(lo))
}

fn lanes_parallel(work: usize) -> bool {
    work >= PAR_THRESHOLD && rayon::current_num_threads() > 1
}

pub fn conv2d<T: Real>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    geom: ConvGeom,
) -> Result<(Tensor<T>, ConvVjp<T>)> {
    let xs = x.shape();
    let ks = kernel.shape();
    if ks.c != xs.c {
        return Err(Error::invalid(
            "conv2d",
            format!("kernel {ks} expects {} input channels, input is {xs}", ks.c),
        ));
    }
    if bias.len() != ks.b {
        return Err(Error::invalid(
            "conv2d",
            format!("bias has {} entries for {} output channels", bias.len(), ks.b),
        ));
    }
    if geom.stride == 0 {
        return Err(Error::invalid("conv2d", "stride must be positive"));
    }
    let oh = geom.out_len(xs.h, ks.h);
    let ow = geom.out_len(xs.w, ks.w);
    let out_shape = Shape::new(xs.b, ks.b, oh, ow);
    let mut out = Tensor::zeros(out_shape);
    let plane = oh * ow;
    if plane > 0 {
        let lane = |(lane_idx, dst): (usize, &mut [T])| {
            let (b, oc) = (lane_idx / ks.b, lane_idx % ks.b);
            dst.fill(bias.data()[oc]);
            for ic in 0..xs.c {
                let src = x.plane(b, ic);
                for ky in 0..ks.h {
                    let (y0, y1) = valid_range(oh, xs.h, ky, geom);
                    for kx in 0..ks.w {
                        let wv = kernel.at(oc, ic, ky, kx);
                        let (x0, x1) = valid_range(ow, xs.w, kx, geom);
                        for oy in y0..y1 {
                            let iy = oy * geom.stride + ky - geom.pad;
                            let row = &src[iy * xs.w..(iy + 1) * xs.w];
                            let out_row = &mut dst[oy * ow..(oy + 1) * ow];
                            if geom.stride == 1 {
                                let ix0 = x0 + kx - geom.pad;
                                for (o, &v) in out_row[x0..x1].iter_mut().zip(&row[ix0..ix0 + (x1 - x0)]) {
                                    *o += wv * v;
                                }
                            } else {
                                for ox in x0..x1 {
                                    out_row[ox] += wv * row[ox * geom.stride + kx - geom.pad];
                                }
                            }
                        }
                    }
                }
            }
        };
        let work = out_shape.numel() * xs.c * ks.h * ks.w;
        if lanes_parallel(work) {
            out.data_mut().par_chunks_mut(plane).enumerate().for_each(lane);
        } else {
            out.data_mut().chunks_mut(plane).enumerate().for_each(lane);
        }
    }
    Ok((
        out,
        ConvVjp {
            input: x.clone(),
            kernel: kernel.clone(),
            geom,
        },
    ))
}

impl<T: Real> ConvVjp<T> {
    pub fn backward(&self, dy: &Tensor<T>) -> ConvGrads<T> {
        let xs = self.input.shape();
        let ks = self.kernel.shape();
        let ys = dy.shape();
        let geom = self.geom;
        let (oh, ow) = (ys.h, ys.w);
        let work = ys.numel() * xs.c * ks.h * ks.w;
        let par = lanes_parallel(work);

        let mut bias = Tensor::zeros((1, ks.b, 1, 1));
        for oc in 0..ks.b {
            let mut s = T::zero();
            for b in 0..ys.b {
                s += dy.plane(b, oc).iter().copied().sum::<T>();
            }
            bias.data_mut()[oc] = s;
        }

        // Kernel gradient: one lane per output channel.
        let mut dk = Tensor::zeros(ks);
        let kplane = ks.c * ks.h * ks.w;
        let klane = |(oc, dst): (usize, &mut [T])| {
            for ic in 0..ks.c {
                for ky in 0..ks.h {
                    let (y0, y1) = valid_range(oh, xs.h, ky, geom);
                    for kx in 0..ks.w {
                        let (x0, x1) = valid_range(ow, xs.w, kx, geom);
                        let mut acc = T::zero();
                        for b in 0..xs.b {
                            let src = self.input.plane(b, ic);
                            let g = dy.plane(b, oc);
                            for oy in y0..y1 {
                                let iy = oy * geom.stride + ky - geom.pad;
                                let grow = &g[oy * ow..(oy + 1) * ow];
                                let row = &src[iy * xs.w..(iy + 1) * xs.w];
                                for ox in x0..x1 {
                                    acc += grow[ox] * row[ox * geom.stride + kx - geom.pad];
                                }
                            }
                        }
                        dst[(ic * ks.h + ky) * ks.w + kx] = acc;
                    }
                }
            }
        };
        if kplane > 0 {
            if par {
                dk.data_mut().par_chunks_mut(kplane).enumerate().for_each(klane);
            } else {
                dk.data_mut().chunks_mut(kplane).enumerate().for_each(klane);
            }
        }

        // Input gradient: one lane per (sample, input channel).
        let mut dx = Tensor::zeros(xs);
        let iplane = xs.plane();
        let ilane = |(lane_idx, dst): (usize, &mut [T])| {
            let (b, ic) = (lane_idx / xs.c, lane_idx % xs.c);
            for oc in 0..ks.b {
                let g = dy.plane(b, oc);
                for ky in 0..ks.h {
                    let (y0, y1) = valid_range(oh, xs.h, ky, geom);
                    for kx in 0..ks.w {
                        let wv = self.kernel.at(oc, ic, ky, kx);
                        let (x0, x1) = valid_range(ow, xs.w, kx, geom);
                        for oy in y0..y1 {
                            let iy = oy * geom.stride + ky - geom.pad;
                            let grow = &g[oy * ow..(oy + 1) * ow];
                            let drow = &mut dst[iy * xs.w..(iy + 1) * xs.w];
                            if geom.stride == 1 {
                                let ix0 = x0 + kx - geom.pad;
                                for (d, &gv) in drow[ix0..ix0 + (x1 - x0)].iter_mut().zip(&grow[x0..x1]) {
                                    *d += wv * gv;
                                }
                            } else {
                                for ox in x0..x1 {
                                    drow[ox * geom.stride + kx - geom.pad] += wv * grow[ox];
                                }
                            }
                        }
                    }
                }
            }
        };
        if iplane > 0 {
            if par {
                dx.data_mut().par_chunks_mut(iplane).enumerate().for_each(ilane);
            } else {
                dx.data_mut().chunks_mut(iplane).enumerate().for_each(ilane);
            }
        }

        ConvGrads {
            input: dx,
            kernel: dk,
            bias,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::gradcheck::{grad_check, GradCheckConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: impl Into<Shape>, rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let shape = shape.into();
        Tensor::from_vec(shape, (0..shape.numel()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Naive six-deep loop used as the reference.
    fn reference(x: &Tensor<f64>, k: &Tensor<f64>, bias: &Tensor<f64>, geom: ConvGeom) -> Tensor<f64> {
        let (xs, ks) = (x.shape(), k.shape());
        let oh = geom.out_len(xs.h, ks.h);
        let ow = geom.out_len(xs.w, ks.w);
        Tensor::from_fn((xs.b, ks.b, oh, ow), |[b, oc, oy, ox]| {
            let mut s = bias.data()[oc];
            for ic in 0..xs.c {
                for ky in 0..ks.h {
                    for kx in 0..ks.w {
                        let iy = (oy * geom.stride + ky) as isize - geom.pad as isize;
                        let ix = (ox * geom.stride + kx) as isize - geom.pad as isize;
                        if iy >= 0 && ix >= 0 && (iy as usize) < xs.h && (ix as usize) < xs.w {
                            s += k.at(oc, ic, ky, kx) * x.at(b, ic, iy as usize, ix as usize);
                        }
                    }
                }
            }
            s
        })
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random((2, 3, 4, 5), &mut rng).cast::<f32>();
        let k = Tensor::from_fn((3, 3, 1, 1), |[o, i, _, _]| if o == i { 1.0f32 } else { 0.0 });
        let (y, _) = conv2d(&x, &k, &Tensor::zeros((1, 3, 1, 1)), ConvGeom::same(1)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn box_sum_interior() {
        let x = Tensor::full((1, 1, 5, 5), 1.0f32);
        let k = Tensor::full((1, 1, 3, 3), 1.0f32);
        let (y, _) = conv2d(&x, &k, &Tensor::zeros((1, 1, 1, 1)), ConvGeom::same(3)).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert_eq!(y.at(0, 0, 2, 2), 9.0);
        assert_eq!(y.at(0, 0, 0, 0), 4.0);
        assert_eq!(y.at(0, 0, 0, 2), 6.0);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let x = Tensor::<f32>::zeros((1, 2, 3, 3));
        let k = Tensor::<f32>::zeros((1, 3, 3, 3));
        assert!(conv2d(&x, &k, &Tensor::zeros((1, 1, 1, 1)), ConvGeom::same(3)).is_err());
    }

    #[test]
    fn matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for geom in [
            ConvGeom::same(3),
            ConvGeom { stride: 2, pad: 1 },
            ConvGeom::same(1),
            ConvGeom { stride: 2, pad: 0 },
        ] {
            for ksz in [1, 3] {
                let x = random((2, 3, 7, 6), &mut rng);
                let k = random((4, 3, ksz, ksz), &mut rng);
                let b = random((1, 4, 1, 1), &mut rng);
                let (y, _) = conv2d(&x, &k, &b, geom).unwrap();
                let r = reference(&x, &k, &b, geom);
                assert_eq!(y.shape(), r.shape());
                assert!(y.max_abs_diff(&r) < 1e-12, "{geom:?} k{ksz}");
            }
        }
        let x = random((1, 1, 6, 6), &mut rng);
        let k = random((1, 1, 3, 3), &mut rng);
        let (y, _) = conv2d(&x, &k, &Tensor::zeros((1, 1, 1, 1)), ConvGeom { stride: 2, pad: 1 }).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 3, 3));
    }

    #[test]
    fn vjp_matches_finite_differences() {
        for (seed, geom) in [(0u64, ConvGeom::same(3)), (1, ConvGeom { stride: 2, pad: 1 })] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random((2, 3, 5, 5), &mut rng);
            let k = random((2, 3, 3, 3), &mut rng);
            let b = random((1, 2, 1, 1), &mut rng);
            let (y, vjp) = conv2d(&x, &k, &b, geom).unwrap();
            let c = random(y.shape(), &mut rng);
            let g = vjp.backward(&c);
            let loss = |x: &Tensor<f64>, k: &Tensor<f64>, b: &Tensor<f64>| {
                let (y, _) = conv2d(x, k, b, geom).unwrap();
                y.data().iter().zip(c.data()).map(|(a, b)| a * b).sum::<f64>()
            };
            let cfg = GradCheckConfig::f64_default();
            let rx = grad_check(
                |v| loss(&Tensor::from_vec(x.shape(), v.to_vec()).unwrap(), &k, &b),
                x.data(),
                g.input.data(),
                &cfg,
            );
            assert!(rx.passed(), "input {rx:?}");
            let rk = grad_check(
                |v| loss(&x, &Tensor::from_vec(k.shape(), v.to_vec()).unwrap(), &b),
                k.data(),
                g.kernel.data(),
                &cfg,
            );
            assert!(rk.passed(), "kernel {rk:?}");
            let rb = grad_check(
                |v| loss(&x, &k, &Tensor::from_vec(b.shape(), v.to_vec()).unwrap()),
                b.data(),
                g.bias.data(),
                &cfg,
            );
            assert!(rb.passed(), "bias {rb:?}");
        }
    }
}
