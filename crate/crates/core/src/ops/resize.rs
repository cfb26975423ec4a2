//! Bilinear resampling, half-pixel (align-corners = false) convention.
//!
//! Output pixel `d` samples source coordinate `(d + 0.5) * in / out - 0.5`,
//! clamped below at 0; the upper neighbour is clamped to the last index.

use crate::error::{Error, Result};
use crate::tensor::{Real, Shape, Tensor};

#[derive(Clone, Copy, Debug)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn taps(input: usize, output: usize) -> Vec<Tap> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|d| {
            let src = ((d as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(input - 1);
            let hi = (lo + 1).min(input - 1);
            Tap {
                lo,
                hi,
                frac: src - lo as f64,
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ResizeVjp {
    input: Shape,
    rows: Vec<Tap>,
    cols: Vec<Tap>,
    identity: bool,
}

pub fn bilinear_resize<T: Real>(x: &Tensor<T>, out_h: usize, out_w: usize) -> Result<(Tensor<T>, ResizeVjp)> {
    let s = x.shape();
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("bilinear_resize", format!("output size {out_h}x{out_w}")));
    }
    if s.h == 0 || s.w == 0 {
        return Err(Error::invalid("bilinear_resize", format!("empty input {s}")));
    }
    let identity = (s.h, s.w) == (out_h, out_w);
    let vjp = ResizeVjp {
        input: s,
        rows: taps(s.h, out_h),
        cols: taps(s.w, out_w),
        identity,
    };
    if identity {
        return Ok((x.clone(), vjp));
    }
    let mut out = Tensor::zeros(Shape::new(s.b, s.c, out_h, out_w));
    for b in 0..s.b {
        for c in 0..s.c {
            let src = x.plane(b, c);
            let dst = out.plane_mut(b, c);
            for (oy, ry) in vjp.rows.iter().enumerate() {
                let fy = T::lit(ry.frac);
                let top = &src[ry.lo * s.w..(ry.lo + 1) * s.w];
                let bot = &src[ry.hi * s.w..(ry.hi + 1) * s.w];
                for (ox, rx) in vjp.cols.iter().enumerate() {
                    let fx = T::lit(rx.frac);
                    let t = top[rx.lo] + (top[rx.hi] - top[rx.lo]) * fx;
                    let u = bot[rx.lo] + (bot[rx.hi] - bot[rx.lo]) * fx;
                    dst[oy * out_w + ox] = t + (u - t) * fy;
                }
            }
        }
    }
    Ok((out, vjp))
}

impl ResizeVjp {
    pub fn backward<T: Real>(&self, dy: &Tensor<T>) -> Tensor<T> {
        if self.identity {
            return dy.clone();
        }
        let s = self.input;
        let out_w = self.cols.len();
        let mut dx = Tensor::zeros(s);
        for b in 0..s.b {
            for c in 0..s.c {
                let g = dy.plane(b, c);
                let dst = dx.plane_mut(b, c);
                for (oy, ry) in self.rows.iter().enumerate() {
                    let fy = T::lit(ry.frac);
                    for (ox, rx) in self.cols.iter().enumerate() {
                        let fx = T::lit(rx.frac);
                        let v = g[oy * out_w + ox];
                        let top = v * (T::one() - fy);
                        let bot = v * fy;
                        dst[ry.lo * s.w + rx.lo] += top * (T::one() - fx);
                        dst[ry.lo * s.w + rx.hi] += top * fx;
                        dst[ry.hi * s.w + rx.lo] += bot * (T::one() - fx);
                        dst[ry.hi * s.w + rx.hi] += bot * fx;
                    }
                }
            }
        }
        dx
    }
}
