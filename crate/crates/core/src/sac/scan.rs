//! Recurrently attenuating directional scans.
//!
//! Along each lane the state is updated as
//!
//! ```text
//! r[i] = (1 - alpha) * f[i - 1] + x[i]
//! f[i] = max(r[i], 0) + beta[c] * min(r[i], 0)
//! ```
//!
//! with `f[-1] = 0`. `Up` carries from the row above (row 0 is scanned
//! first), `Down` from the row below, `Left` from the column to the left and
//! `Right` from the column to the right. Lanes (columns for vertical scans,
//! rows for horizontal ones) are independent; the recurrence within a lane is
//! sequential.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn is_vertical(self) -> bool {
        matches!(self, Direction::Up | Direction::Down)
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }
}

/// Attenuation of the `k`-th factor out of `n` (`k` is 1-based): `(n - k) / n`.
pub fn attenuation(n: usize, k: usize) -> f64 {
    assert!(n >= 1 && (1..=n).contains(&k), "factor {k} of {n}");
    (n - k) as f64 / n as f64
}

#[derive(Clone, Debug)]
pub struct ScanVjp<T> {
    pre: Tensor<T>,
    beta: Vec<T>,
    carry: T,
    direction: Direction,
}

#[derive(Clone, Debug)]
pub struct ScanGrads<T> {
    pub input: Tensor<T>,
    pub beta: Vec<T>,
}

#[inline]
fn rectify<T: Real>(r: T, beta: T) -> T {
    if r < T::zero() {
        beta * r
    } else {
        r
    }
}

/// Visits plane offsets lane by lane in scan order: `(lane, step) -> offset`.
#[inline]
fn offset(direction: Direction, h: usize, w: usize, lane: usize, step: usize) -> usize {
    match direction {
        Direction::Up => step * w + lane,
        Direction::Down => (h - 1 - step) * w + lane,
        Direction::Left => lane * w + step,
        Direction::Right => lane * w + (w - 1 - step),
    }
}

pub fn attenuated_scan<T: Real>(
    x: &Tensor<T>,
    direction: Direction,
    alpha: T,
    beta: &[T],
) -> Result<(Tensor<T>, ScanVjp<T>)> {
    let s = x.shape();
    if beta.len() != s.c {
        return Err(Error::invalid(
            "attenuated_scan",
            format!("beta has {} entries for {} channels", beta.len(), s.c),
        ));
    }
    let carry = T::one() - alpha;
    let mut out = Tensor::zeros(s);
    let mut pre = Tensor::zeros(s);
    let (h, w) = (s.h, s.w);
    for b in 0..s.b {
        for (c, &bc) in beta.iter().enumerate() {
            let src = x.plane(b, c);
            let base = (b * s.c + c) * s.plane();
            let f = &mut out.data_mut()[base..base + s.plane()];
            let r_out = &mut pre.data_mut()[base..base + s.plane()];
            if direction.is_vertical() {
                // Whole rows at a time; `prev` is the previously scanned row.
                let mut prev = vec![T::zero(); w];
                for step in 0..h {
                    let row = offset(direction, h, w, 0, step);
                    for j in 0..w {
                        let r = carry * prev[j] + src[row + j];
                        let v = rectify(r, bc);
                        r_out[row + j] = r;
                        f[row + j] = v;
                        prev[j] = v;
                    }
                }
            } else {
                for lane in 0..h {
                    let mut prev = T::zero();
                    for step in 0..w {
                        let i = offset(direction, h, w, lane, step);
                        let r = carry * prev + src[i];
                        prev = rectify(r, bc);
                        r_out[i] = r;
                        f[i] = prev;
                    }
                }
            }
        }
    }
    Ok((
        out,
        ScanVjp {
            pre,
            beta: beta.to_vec(),
            carry,
            direction,
        },
    ))
}

impl<T: Real> ScanVjp<T> {
    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Runs the recurrence backwards, carrying `(1 - alpha)` times the
    /// pre-activation cotangent to each step's predecessor.
    pub fn backward(&self, dy: &Tensor<T>) -> ScanGrads<T> {
        let s = self.pre.shape();
        let (h, w) = (s.h, s.w);
        let mut dx = Tensor::zeros(s);
        let mut dbeta = vec![T::zero(); s.c];
        let dir = self.direction;
        let lanes = if dir.is_vertical() { w } else { h };
        let steps = if dir.is_vertical() { h } else { w };
        for b in 0..s.b {
            for (c, &bc) in self.beta.iter().enumerate() {
                let pre = self.pre.plane(b, c);
                let g_out = dy.plane(b, c);
                let base = (b * s.c + c) * s.plane();
                let d_in = &mut dx.data_mut()[base..base + s.plane()];
                let mut db = T::zero();
                for lane in 0..lanes {
                    let mut next = T::zero();
                    for step in (0..steps).rev() {
                        let i = offset(dir, h, w, lane, step);
                        let g = g_out[i] + self.carry * next;
                        let r = pre[i];
                        let dr = if r < T::zero() {
                            db += g * r;
                            g * bc
                        } else {
                            g
                        };
                        d_in[i] = dr;
                        next = dr;
                    }
                }
                dbeta[c] += db;
            }
        }
        ScanGrads {
            input: dx,
            beta: dbeta,
        }
    }
}
