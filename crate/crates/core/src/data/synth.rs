//! Procedural saliency scenes: one to a few filled shapes over a textured
//! background, with the shapes' colour offset from the background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Sample;
use super::pnm::quantize;
use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Ellipse,
    Rectangle,
    Polygon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub size: usize,
    pub count: usize,
    pub seed: u64,
    pub shapes: Vec<ShapeKind>,
    /// Upper bound on shapes per image; at least one is always drawn.
    pub max_shapes: usize,
    /// Value-noise octaves of the background and foreground texture.
    pub octaves: usize,
    /// Texture amplitude.
    pub texture: f32,
    /// Range of the foreground/background colour offset, largest channel.
    pub contrast: [f32; 2],
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            size: 64,
            count: 250,
            seed: 0,
            shapes: vec![ShapeKind::Ellipse, ShapeKind::Rectangle, ShapeKind::Polygon],
            max_shapes: 2,
            octaves: 3,
            texture: 0.12,
            contrast: [0.2, 0.5],
        }
    }
}

pub const MIN_FOREGROUND: f64 = 0.02;
pub const MAX_FOREGROUND: f64 = 0.6;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if self.size < 8 {
            return fail("size must be at least 8");
        }
        if self.count == 0 {
            return fail("count must be positive");
        }
        if self.shapes.is_empty() || self.max_shapes == 0 {
            return fail("need at least one shape kind and max_shapes >= 1");
        }
        let [lo, hi] = self.contrast;
        if !(0.0..=hi).contains(&lo) || hi > 0.5 {
            return fail("contrast must satisfy 0 <= min <= max <= 0.5");
        }
        if !(0.0..=0.15).contains(&self.texture) {
            return fail("texture must lie in [0, 0.15]");
        }
        Ok(())
    }
}

/// Smooth random field in `[-1, 1]` from summed bilinear value-noise octaves.
fn value_noise(rng: &mut ChaCha8Rng, size: usize, octaves: usize) -> Vec<f32> {
    let mut field = vec![0.0f32; size * size];
    let mut total = 0.0;
    for o in 0..octaves.max(1) {
        let cells = 2usize << o;
        let amp = 0.5f32.powi(o as i32);
        total += amp;
        let lattice: Vec<f32> = (0..(cells + 1) * (cells + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let at = |i: usize, j: usize| lattice[i * (cells + 1) + j];
        for y in 0..size {
            let fy = (y as f32 + 0.5) / size as f32 * cells as f32;
            let (iy, ty) = (fy as usize, smooth(fy.fract()));
            for x in 0..size {
                let fx = (x as f32 + 0.5) / size as f32 * cells as f32;
                let (ix, tx) = (fx as usize, smooth(fx.fract()));
                let top = at(iy, ix) * (1.0 - tx) + at(iy, ix + 1) * tx;
                let bottom = at(iy + 1, ix) * (1.0 - tx) + at(iy + 1, ix + 1) * tx;
                field[y * size + x] += amp * (top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    field.iter_mut().for_each(|v| *v /= total);
    field
}

fn smooth(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}

/// Point-membership test in pixel units.
enum Figure {
    Ellipse { cx: f32, cy: f32, rx: f32, ry: f32, cos: f32, sin: f32 },
    Rectangle { cx: f32, cy: f32, hx: f32, hy: f32, cos: f32, sin: f32 },
    /// Counter-clockwise convex vertices.
    Polygon(Vec<(f32, f32)>),
}

impl Figure {
    fn random(kind: ShapeKind, size: usize, rng: &mut ChaCha8Rng) -> Figure {
        let s = size as f32;
        let cx = rng.gen_range(0.2..0.8) * s;
        let cy = rng.gen_range(0.2..0.8) * s;
        let theta = rng.gen_range(0.0..std::f32::consts::PI);
        let (sin, cos) = theta.sin_cos();
        match kind {
            ShapeKind::Ellipse => Figure::Ellipse {
                cx,
                cy,
                rx: rng.gen_range(0.08..0.3) * s,
                ry: rng.gen_range(0.08..0.3) * s,
                cos,
                sin,
            },
            ShapeKind::Rectangle => Figure::Rectangle {
                cx,
                cy,
                hx: rng.gen_range(0.07..0.28) * s,
                hy: rng.gen_range(0.07..0.28) * s,
                cos,
                sin,
            },
            ShapeKind::Polygon => {
                // Points on an ellipse at sorted angles are in convex position.
                let k = rng.gen_range(3..=7);
                let mut angles: Vec<f32> = (0..k).map(|_| rng.gen_range(0.0..std::f32::consts::TAU)).collect();
                angles.sort_by(f32::total_cmp);
                let rx = rng.gen_range(0.12..0.32) * s;
                let ry = rng.gen_range(0.12..0.32) * s;
                Figure::Polygon(
                    angles
                        .into_iter()
                        .map(|a| {
                            let (px, py) = (rx * a.cos(), ry * a.sin());
                            (cx + px * cos - py * sin, cy + px * sin + py * cos)
                        })
                        .collect(),
                )
            }
        }
    }

    fn contains(&self, x: f32, y: f32) -> bool {
        match *self {
            Figure::Ellipse { cx, cy, rx, ry, cos, sin } => {
                let (u, v) = rotate(x - cx, y - cy, cos, sin);
                (u / rx).powi(2) + (v / ry).powi(2) <= 1.0
            }
            Figure::Rectangle { cx, cy, hx, hy, cos, sin } => {
                let (u, v) = rotate(x - cx, y - cy, cos, sin);
                u.abs() <= hx && v.abs() <= hy
            }
            Figure::Polygon(ref pts) => (0..pts.len()).all(|i| {
                let (ax, ay) = pts[i];
                let (bx, by) = pts[(i + 1) % pts.len()];
                (bx - ax) * (y - ay) - (by - ay) * (x - ax) >= 0.0
            }),
        }
    }
}

fn rotate(dx: f32, dy: f32, cos: f32, sin: f32) -> (f32, f32) {
    (dx * cos + dy * sin, -dx * sin + dy * cos)
}

fn render_mask(figures: &[Figure], size: usize) -> Vec<bool> {
    let mut mask = vec![false; size * size];
    for y in 0..size {
        for x in 0..size {
            let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
            mask[y * size + x] = figures.iter().any(|f| f.contains(px, py));
        }
    }
    mask
}

fn draw_mask(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let size = cfg.size;
    for _ in 0..100 {
        let n = rng.gen_range(1..=cfg.max_shapes);
        let figures: Vec<Figure> = (0..n)
            .map(|_| {
                let kind = cfg.shapes[rng.gen_range(0..cfg.shapes.len())];
                Figure::random(kind, size, rng)
            })
            .collect();
        let mask = render_mask(&figures, size);
        let frac = mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64;
        if (MIN_FOREGROUND..=MAX_FOREGROUND).contains(&frac) {
            return mask;
        }
    }
    let s = size as f32;
    let disc = Figure::Ellipse { cx: s / 2.0, cy: s / 2.0, rx: s / 4.0, ry: s / 4.0, cos: 1.0, sin: 0.0 };
    render_mask(&[disc], size)
}

/// Sample `index` of the dataset described by `cfg`.
pub fn synth_sample(cfg: &SynthConfig, index: usize) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let size = cfg.size;
    let mask = draw_mask(cfg, &mut rng);

    let bg: [f32; 3] = std::array::from_fn(|_| rng.gen_range(0.2..0.8));
    let dominant = rng.gen_range(0..3);
    let [lo, hi] = cfg.contrast;
    let offset = if lo < hi { rng.gen_range(lo..=hi) } else { lo };
    let fg: [f32; 3] = std::array::from_fn(|c| {
        if c == dominant {
            if bg[c] < 0.5 { bg[c] + offset } else { bg[c] - offset }
        } else {
            bg[c] + rng.gen_range(-0.1..0.1)
        }
    });
    let bg_tex: Vec<Vec<f32>> = (0..3).map(|_| value_noise(&mut rng, size, cfg.octaves)).collect();
    let fg_tex: Vec<Vec<f32>> = (0..3).map(|_| value_noise(&mut rng, size, cfg.octaves)).collect();

    let image = Tensor::from_fn(Shape::new(1, 3, size, size), |[_, c, y, x]| {
        let i = y * size + x;
        let v = if mask[i] {
            fg[c] + 0.5 * cfg.texture * fg_tex[c][i]
        } else {
            bg[c] + cfg.texture * bg_tex[c][i]
        };
        f32::from(quantize(v)) / 255.0
    });
    let mask = Tensor::from_fn(Shape::new(1, 1, size, size), |[_, _, y, x]| {
        if mask[y * size + x] { 1.0 } else { 0.0 }
    });
    Sample {
        id: format!("s{index:05}"),
        image,
        mask,
    }
}

pub fn synth_dataset(cfg: &SynthConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    Ok((0..cfg.count).into_par_iter().map(|i| synth_sample(cfg, i)).collect())
}
