//! Structure measure: `0.5 * object + 0.5 * region`, following the
//! reference definition and its constants.

use super::measures::check_pair;
use crate::error::Result;
use crate::tensor::Tensor;

/// Balance between the object-aware and region-aware terms.
pub const LAMBDA_S: f64 = 0.5;

/// Double-precision machine epsilon used by the reference.
const EPS: f64 = f64::EPSILON;

struct Map<'a> {
    data: &'a [f32],
    w: usize,
}

impl Map<'_> {
    fn at(&self, y: usize, x: usize) -> f64 {
        f64::from(self.data[y * self.w + x])
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn object_score(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let (x, sigma) = mean_std(values);
    2.0 * x / (x * x + 1.0 + sigma + EPS)
}

fn object_term(pred: &Map, gt: &Map, h: usize, fg_mean: f64) -> f64 {
    let (mut fg, mut bg) = (Vec::new(), Vec::new());
    for y in 0..h {
        for x in 0..pred.w {
            if gt.at(y, x) == 1.0 {
                fg.push(pred.at(y, x));
            } else {
                bg.push(1.0 - pred.at(y, x));
            }
        }
    }
    fg_mean * object_score(&fg) + (1.0 - fg_mean) * object_score(&bg)
}

/// SSIM-like similarity of one block, rows `r0..r1` and columns `c0..c1`.
fn block_ssim(pred: &Map, gt: &Map, (r0, r1): (usize, usize), (c0, c1): (usize, usize)) -> f64 {
    let n = (r1 - r0) * (c1 - c0);
    if n == 0 {
        return 0.0;
    }
    let cells = || (r0..r1).flat_map(move |y| (c0..c1).map(move |x| (y, x)));
    let mx = cells().map(|(y, x)| pred.at(y, x)).sum::<f64>() / n as f64;
    let my = cells().map(|(y, x)| gt.at(y, x)).sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (y, x) in cells() {
        let (dx, dy) = (pred.at(y, x) - mx, gt.at(y, x) - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let norm = n as f64 - 1.0 + EPS;
    let (sxx, syy, sxy) = (sxx / norm, syy / norm, sxy / norm);
    let alpha = 4.0 * mx * my * sxy;
    let beta = (mx * mx + my * my) * (sxx + syy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn region_term(pred: &Map, gt: &Map, h: usize) -> f64 {
    let w = pred.w;
    let (mut total, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let g = gt.at(y, x);
            total += g;
            sx += g * (x + 1) as f64;
            sy += g * (y + 1) as f64;
        }
    }
    // 1-based centroid, rounded half away from zero; it is the number of
    // columns (rows) in the left (top) blocks.
    let cx = (sx / total).round() as usize;
    let cy = (sy / total).round() as usize;
    let area = (w * h) as f64;
    let w1 = (cx * cy) as f64 / area;
    let w2 = ((w - cx) * cy) as f64 / area;
    let w3 = (cx * (h - cy)) as f64 / area;
    let w4 = 1.0 - w1 - w2 - w3;
    w1 * block_ssim(pred, gt, (0, cy), (0, cx))
        + w2 * block_ssim(pred, gt, (0, cy), (cx, w))
        + w3 * block_ssim(pred, gt, (cy, h), (0, cx))
        + w4 * block_ssim(pred, gt, (cy, h), (cx, w))
}

/// Value in `[0, 1]`. Single-class masks score the mean prediction
/// (foreground) or its complement (background).
pub fn s_measure(pred: &Tensor<f32>, gt: &Tensor<f32>) -> Result<f64> {
    check_pair(pred, gt)?;
    let s = pred.shape();
    let p = Map { data: pred.data(), w: s.w };
    let g = Map { data: gt.data(), w: s.w };
    let n = pred.len() as f64;
    let fg_mean = gt.data().iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let pred_mean = pred.data().iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    if fg_mean == 0.0 {
        return Ok(1.0 - pred_mean);
    }
    if fg_mean == 1.0 {
        return Ok(pred_mean);
    }
    let q = LAMBDA_S * object_term(&p, &g, s.h, fg_mean) + (1.0 - LAMBDA_S) * region_term(&p, &g, s.h);
    Ok(q.max(0.0))
}
