//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod metrics;

use sacnet::sac::Direction;
use sacnet::Tensor;

/// Per-pixel unrolled recurrence with explicit predecessor lookup.
pub fn oracle_scan(x: &Tensor<f32>, dir: Direction, alpha: f32, beta: &[f32]) -> Tensor<f32> {
    let s = x.shape();
    let carry = 1.0f32 - alpha;
    let mut f = Tensor::zeros(s);
    for b in 0..s.b {
        for c in 0..s.c {
            let rows: Vec<usize> = match dir {
                Direction::Down => (0..s.h).rev().collect(),
                _ => (0..s.h).collect(),
            };
            let cols: Vec<usize> = match dir {
                Direction::Right => (0..s.w).rev().collect(),
                _ => (0..s.w).collect(),
            };
            for &i in &rows {
                for &j in &cols {
                    let prev = match dir {
                        Direction::Up if i > 0 => f.at(b, c, i - 1, j),
                        Direction::Down if i + 1 < s.h => f.at(b, c, i + 1, j),
                        Direction::Left if j > 0 => f.at(b, c, i, j - 1),
                        Direction::Right if j + 1 < s.w => f.at(b, c, i, j + 1),
                        _ => 0.0,
                    };
                    let r = carry * prev + x.at(b, c, i, j);
                    *f.at_mut(b, c, i, j) = if r >= 0.0 { r } else { beta[c] * r };
                }
            }
        }
    }
    f
}

