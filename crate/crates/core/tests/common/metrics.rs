//! Naive loop versions of the saliency metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sacnet::Tensor;

pub type Grid = Vec<Vec<f64>>;

pub fn grid(t: &Tensor<f32>) -> Grid {
    let s = t.shape();
    (0..s.h).map(|y| (0..s.w).map(|x| f64::from(t.at(0, 0, y, x))).collect()).collect()
}

pub fn tensor(g: &Grid) -> Tensor<f32> {
    Tensor::from_fn((1, 1, g.len(), g[0].len()), |[_, _, y, x]| g[y][x] as f32)
}

pub fn random_pair(seed: u64, h: usize, w: usize) -> (Tensor<f32>, Tensor<f32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fg = rng.gen_range(0.1..0.9);
    let gt = Tensor::from_fn((1, 1, h, w), |_| if rng.gen_bool(fg) { 1.0 } else { 0.0 });
    let pred = Tensor::from_fn((1, 1, h, w), |_| rng.gen_range(0.0f32..=1.0));
    (pred, gt)
}

pub fn fb(p: f64, r: f64) -> f64 {
    if 0.3 * p + r == 0.0 {
        0.0
    } else {
        1.3 * p * r / (0.3 * p + r)
    }
}

/// Precision and recall with the positive set chosen by `hit`.
pub fn naive_pr(pred: &Grid, gt: &Grid, hit: impl Fn(f64) -> bool) -> (f64, f64) {
    let (mut tp, mut fp, mut fg) = (0.0, 0.0, 0.0);
    for y in 0..gt.len() {
        for x in 0..gt[0].len() {
            let h = hit(pred[y][x]);
            if gt[y][x] == 1.0 {
                fg += 1.0;
                if h {
                    tp += 1.0;
                }
            } else if h {
                fp += 1.0;
            }
        }
    }
    let p = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
    (p, tp / fg)
}

pub fn naive_mae(a: &Grid, b: &Grid) -> f64 {
    let mut s = 0.0;
    let mut n = 0.0;
    for y in 0..a.len() {
        for x in 0..a[0].len() {
            s += (a[y][x] - b[y][x]).abs();
            n += 1.0;
        }
    }
    s / n
}

pub fn naive_ber(pred: &Grid, gt: &Grid) -> f64 {
    let (mut tp, mut tn, mut pos, mut neg) = (0.0, 0.0, 0.0, 0.0);
    for y in 0..gt.len() {
        for x in 0..gt[0].len() {
            if gt[y][x] == 1.0 {
                pos += 1.0;
                if pred[y][x] >= 0.5 {
                    tp += 1.0;
                }
            } else {
                neg += 1.0;
                if pred[y][x] < 0.5 {
                    tn += 1.0;
                }
            }
        }
    }
    100.0 * (1.0 - (tp / pos + tn / neg) / 2.0)
}

pub const EPS: f64 = f64::EPSILON;

pub fn obj(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mut m = 0.0;
    for a in v {
        m += a;
    }
    m /= n;
    let mut var = 0.0;
    for a in v {
        var += (a - m) * (a - m);
    }
    let sd = (var / (n - 1.0)).sqrt();
    2.0 * m / (m * m + 1.0 + sd + EPS)
}

pub fn ssim(p: &Grid, g: &Grid) -> f64 {
    let cells: Vec<(f64, f64)> = p.iter().zip(g).flat_map(|(a, b)| a.iter().copied().zip(b.iter().copied())).collect();
    let n = cells.len() as f64;
    if cells.is_empty() {
        return 0.0;
    }
    let mut mx = 0.0;
    let mut my = 0.0;
    for &(a, b) in &cells {
        mx += a;
        my += b;
    }
    mx /= n;
    my /= n;
    let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
    for &(a, b) in &cells {
        sx += (a - mx) * (a - mx);
        sy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    sx /= n - 1.0 + EPS;
    sy /= n - 1.0 + EPS;
    sxy /= n - 1.0 + EPS;
    let alpha = 4.0 * mx * my * sxy;
    let beta = (mx * mx + my * my) * (sx + sy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn block(m: &Grid, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Grid {
    m[rows].iter().map(|r| r[cols.clone()].to_vec()).collect()
}

pub fn naive_s(pred: &Grid, gt: &Grid) -> f64 {
    let (h, w) = (gt.len(), gt[0].len());
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    let (mut total, mut xs, mut ys, mut psum) = (0.0, 0.0, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            psum += pred[y][x];
            if gt[y][x] == 1.0 {
                fg.push(pred[y][x]);
                total += 1.0;
                xs += (x + 1) as f64;
                ys += (y + 1) as f64;
            } else {
                bg.push(1.0 - pred[y][x]);
            }
        }
    }
    let area = (h * w) as f64;
    let u = total / area;
    if total == 0.0 {
        return 1.0 - psum / area;
    }
    if total == area {
        return psum / area;
    }
    let so = u * obj(&fg) + (1.0 - u) * obj(&bg);
    let cx = (xs / total).round() as usize;
    let cy = (ys / total).round() as usize;
    let wts = [
        (cx * cy) as f64 / area,
        ((w - cx) * cy) as f64 / area,
        (cx * (h - cy)) as f64 / area,
    ];
    let w4 = 1.0 - wts[0] - wts[1] - wts[2];
    let sr = wts[0] * ssim(&block(pred, 0..cy, 0..cx), &block(gt, 0..cy, 0..cx))
        + wts[1] * ssim(&block(pred, 0..cy, cx..w), &block(gt, 0..cy, cx..w))
        + wts[2] * ssim(&block(pred, cy..h, 0..cx), &block(gt, cy..h, 0..cx))
        + w4 * ssim(&block(pred, cy..h, cx..w), &block(gt, cy..h, cx..w));
    (0.5 * so + 0.5 * sr).max(0.0)
}


/// 16x16 map with foreground in the top-left and bottom-right quadrants.
pub fn checkerboard() -> Grid {
    (0..16).map(|r| (0..16).map(|c| if (r < 8) == (c < 8) { 1.0 } else { 0.0 }).collect()).collect()
}

/// `(name, prediction, mask, S-measure)` values computed by
/// `tests/oracles/s_measure.py`.
pub fn golden_fixtures() -> Vec<(&'static str, Grid, Grid, f64)> {
    let g = checkerboard();
    let over = |f: &dyn Fn(f64) -> f64| -> Grid { g.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect() };
    let ramp: Grid = (0..16).map(|r| (0..16).map(|c| (r + c) as f64 / 30.0).collect()).collect();
    let blob_gt: Grid = (0..16)
        .map(|r| (0..16).map(|c| if (2..=6).contains(&r) && (3..=12).contains(&c) { 1.0 } else { 0.0 }).collect())
        .collect();
    let blob_pred: Grid = (0..16).map(|r| (0..16).map(|c| ((7 * r + 3 * c) % 11) as f64 / 10.0).collect()).collect();
    vec![
        ("complement", over(&|v| 1.0 - v), g.clone(), 0.0),
        ("soft", over(&|v| 0.75 * v + 0.125), g.clone(), 0.9386063183889575),
        ("ramp", ramp, g.clone(), 0.34763914974714183),
        ("blob", blob_pred, blob_gt, 0.31521548955300327),
    ]
}
