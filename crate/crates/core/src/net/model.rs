//! Toy saliency network.
//!
//! ```text
//! image -> stage 1 .. stage S        (3x3 stride-2 conv, GN, ReLU each)
//! pyramid over stages 2..S           (1x1 lateral + upsampled coarser level,
//!                                     then a 3x3 smoothing conv)
//! level l: head(concat(SAC(P_l), P_l)) -> logits_l   (head(P_l) without SAC)
//! merged_l = logits_l + upsample(merged_{l+1})
//! ```
//!
//! The final saliency map is the sigmoid of the finest merged logits,
//! resized to the input resolution.

use crate::error::{Error, Result};
use crate::nn::{Conv2d, GroupNorm};
use crate::ops::{
    bilinear_resize, default_groups, relu, sigmoid, ConvVjp, GroupNormVjp, ReluVjp, ResizeVjp,
};
use crate::params::{Initializer, ParamStore};
use crate::sac::{SacModule, SacVjp};
use crate::tensor::{Real, Shape, Tensor};

use super::config::NetConfig;

#[derive(Clone, Debug)]
pub struct Stage {
    pub conv: Conv2d,
    pub norm: GroupNorm,
}

#[derive(Clone, Debug)]
pub struct Level {
    pub lateral: Conv2d,
    pub smooth: Conv2d,
    pub sac: Option<SacModule>,
    pub head: Conv2d,
}

#[derive(Clone, Debug)]
pub struct SaliencyNet {
    pub config: NetConfig,
    pub stages: Vec<Stage>,
    /// Pyramid levels, finest first.
    pub levels: Vec<Level>,
}

/// Per-level merged logits, finest level first.
#[derive(Clone, Debug)]
pub struct Prediction<T> {
    pub logits: Vec<Tensor<T>>,
    pub input_size: (usize, usize),
}

impl<T: Real> Prediction<T> {
    /// Sigmoid of the finest merged logits at input resolution; values in (0, 1).
    pub fn saliency(&self) -> Tensor<T> {
        let (p, _) = sigmoid(&self.logits[0]);
        let (h, w) = self.input_size;
        bilinear_resize(&p, h, w).expect("nonempty sizes").0
    }
}

#[derive(Clone, Debug)]
struct StageVjp<T> {
    conv: ConvVjp<T>,
    norm: GroupNormVjp<T>,
    relu: ReluVjp<T>,
}

#[derive(Clone, Debug)]
struct LevelVjp<T> {
    lateral: ConvVjp<T>,
    /// Upsampling of the next coarser merged pyramid map.
    top_down: Option<ResizeVjp>,
    smooth: ConvVjp<T>,
    sac: Option<SacVjp<T>>,
    head: ConvVjp<T>,
    /// Upsampling of the next coarser merged logits.
    logit_merge: Option<ResizeVjp>,
}

#[derive(Clone, Debug)]
pub struct NetVjp<T> {
    stages: Vec<StageVjp<T>>,
    levels: Vec<LevelVjp<T>>,
}

impl<T: Real> NetVjp<T> {
    /// Attention maps per level (finest first), then per round.
    pub fn attention_maps(&self) -> Vec<Vec<&Tensor<T>>> {
        self.levels
            .iter()
            .map(|l| l.sac.as_ref().map(|s| s.attention_maps()).unwrap_or_default())
            .collect()
    }
}

impl SaliencyNet {
    pub fn new<T: Real>(config: &NetConfig, store: &mut ParamStore<T>, init: &Initializer) -> Result<Self> {
        config.validate()?;
        let mut stages = Vec::with_capacity(config.stages());
        let mut in_c = config.in_channels;
        for (i, &c) in config.stage_channels.iter().enumerate() {
            let name = format!("backbone.stage{}", i + 1);
            stages.push(Stage {
                conv: Conv2d::new(store, init, &format!("{name}.conv"), in_c, c, 3, 2)?,
                norm: GroupNorm::new(store, &format!("{name}.norm"), c, default_groups(c))?,
            });
            in_c = c;
        }
        let w = config.width;
        let sac_cfg = config.sac_config();
        let mut levels = Vec::with_capacity(config.levels());
        for l in 0..config.levels() {
            let stage_c = config.stage_channels[l + 1];
            let sac = if config.has_sac(l) {
                Some(SacModule::new(store, init, &format!("level{l}.sac"), &sac_cfg)?)
            } else {
                None
            };
            let head_in = if sac.is_some() { 2 * w } else { w };
            levels.push(Level {
                lateral: Conv2d::new(store, init, &format!("level{l}.lateral"), stage_c, w, 1, 1)?,
                smooth: Conv2d::new(store, init, &format!("level{l}.smooth"), w, w, 3, 1)?,
                sac,
                head: Conv2d::new(store, init, &format!("level{l}.head"), head_in, 1, 1, 1)?,
            });
        }
        Ok(SaliencyNet {
            config: config.clone(),
            stages,
            levels,
        })
    }

    /// Builds the network together with freshly initialized weights.
    pub fn init<T: Real>(config: &NetConfig, seed: u64) -> Result<(Self, ParamStore<T>)> {
        let mut store = ParamStore::new();
        let net = SaliencyNet::new(config, &mut store, &Initializer::new(seed))?;
        Ok((net, store))
    }

    pub fn expected_input(&self, batch: usize) -> Shape {
        let s = self.config.input_size;
        Shape::new(batch, self.config.in_channels, s, s)
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, image: &Tensor<T>) -> Result<(Prediction<T>, NetVjp<T>)> {
        let s = image.shape();
        let expected = self.expected_input(s.b);
        if s != expected || s.b == 0 {
            return Err(Error::ShapeMismatch {
                op: "SaliencyNet::forward",
                lhs: s,
                rhs: expected,
            });
        }
        let mut stage_vjps = Vec::with_capacity(self.stages.len());
        let mut features = Vec::with_capacity(self.stages.len());
        let mut x = image.clone();
        for stage in &self.stages {
            let (h, conv) = stage.conv.forward(store, &x)?;
            let (h, norm) = stage.norm.forward(store, &h)?;
            let (h, relu) = relu(&h);
            stage_vjps.push(StageVjp { conv, norm, relu });
            features.push(h.clone());
            x = h;
        }

        let nl = self.levels.len();
        let mut lateral_vjps = Vec::with_capacity(nl);
        let mut top_down_vjps = Vec::with_capacity(nl);
        let mut merged: Vec<Option<Tensor<T>>> = vec![None; nl];
        for l in (0..nl).rev() {
            let level = &self.levels[l];
            let (lat, lv) = level.lateral.forward(store, &features[l + 1])?;
            let (m, td) = match &merged.get(l + 1).cloned().flatten() {
                Some(coarse) => {
                    let ls = lat.shape();
                    let (up, rv) = bilinear_resize(coarse, ls.h, ls.w)?;
                    (lat.add(&up)?, Some(rv))
                }
                None => (lat, None),
            };
            merged[l] = Some(m);
            lateral_vjps.push(lv);
            top_down_vjps.push(td);
        }
        lateral_vjps.reverse();
        top_down_vjps.reverse();

        let mut heads = Vec::with_capacity(nl);
        let mut partial = Vec::with_capacity(nl);
        for (l, level) in self.levels.iter().enumerate() {
            let m = merged[l].as_ref().expect("every level merged");
            let (p, smooth) = level.smooth.forward(store, m)?;
            let (head_in, sac) = match &level.sac {
                Some(module) => {
                    let (ctx, sv) = module.forward(store, &p)?;
                    (Tensor::concat_channels(&[&ctx, &p])?, Some(sv))
                }
                None => (p, None),
            };
            let (logit, head) = level.head.forward(store, &head_in)?;
            heads.push(logit);
            partial.push((smooth, sac, head));
        }

        let mut logits: Vec<Option<Tensor<T>>> = vec![None; nl];
        let mut merge_vjps: Vec<Option<ResizeVjp>> = vec![None; nl];
        for l in (0..nl).rev() {
            let z = match logits.get(l + 1).cloned().flatten() {
                Some(coarse) => {
                    let hs = heads[l].shape();
                    let (up, rv) = bilinear_resize(&coarse, hs.h, hs.w)?;
                    merge_vjps[l] = Some(rv);
                    heads[l].add(&up)?
                }
                None => heads[l].clone(),
            };
            logits[l] = Some(z);
        }

        let levels = partial
            .into_iter()
            .zip(lateral_vjps)
            .zip(top_down_vjps)
            .zip(merge_vjps)
            .map(|((((smooth, sac, head), lateral), top_down), logit_merge)| LevelVjp {
                lateral,
                top_down,
                smooth,
                sac,
                head,
                logit_merge,
            })
            .collect();
        Ok((
            Prediction {
                logits: logits.into_iter().map(|z| z.expect("every level has logits")).collect(),
                input_size: (s.h, s.w),
            },
            NetVjp {
                stages: stage_vjps,
                levels,
            },
        ))
    }

    /// Backpropagates cotangents of the merged logits (finest first).
    /// Parameter gradients are added into `grads`; the image cotangent is
    /// returned.
    pub fn backward<T: Real>(&self, vjp: &NetVjp<T>, d_logits: &[Tensor<T>], grads: &mut ParamStore<T>) -> Tensor<T> {
        let nl = self.levels.len();
        assert_eq!(d_logits.len(), nl, "one cotangent per level");
        // merged logits, fine -> coarse
        let mut d_merged: Vec<Tensor<T>> = d_logits.to_vec();
        for l in 0..nl {
            if let Some(rv) = &vjp.levels[l].logit_merge {
                let up = rv.backward(&d_merged[l]);
                d_merged[l + 1].add_assign(&up).expect("coarse logits shape");
            }
        }
        let mut d_pyramid: Vec<Tensor<T>> = Vec::with_capacity(nl);
        for (level, lv) in self.levels.iter().zip(&vjp.levels).take(nl) {
            let l = d_pyramid.len();
            let d_head_in = level.head.backward(&lv.head, &d_merged[l], grads);
            let d_p = match (&level.sac, &lv.sac) {
                (Some(module), Some(sv)) => {
                    let w = self.config.width;
                    let parts = d_head_in.split_channels(&[w, w]).expect("head input is [sac, pyramid]");
                    let mut d_p = module.backward(sv, &parts[0], grads);
                    d_p.add_assign(&parts[1]).expect("pyramid shape");
                    d_p
                }
                _ => d_head_in,
            };
            d_pyramid.push(level.smooth.backward(&lv.smooth, &d_p, grads));
        }
        // top-down pathway, fine -> coarse, then laterals into the backbone
        let ns = self.stages.len();
        let mut d_features: Vec<Option<Tensor<T>>> = vec![None; ns];
        for l in 0..nl {
            if let Some(rv) = &vjp.levels[l].top_down {
                let up = rv.backward(&d_pyramid[l]);
                d_pyramid[l + 1].add_assign(&up).expect("coarse pyramid shape");
            }
            let d_c = self.levels[l].lateral.backward(&vjp.levels[l].lateral, &d_pyramid[l], grads);
            d_features[l + 1] = Some(d_c);
        }
        let mut d: Option<Tensor<T>> = None;
        for i in (0..ns).rev() {
            let mut g = match (d.take(), d_features[i].take()) {
                (Some(mut a), Some(b)) => {
                    a.add_assign(&b).expect("stage output shape");
                    a
                }
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => unreachable!("the deepest stage always feeds a lateral"),
            };
            let sv = &vjp.stages[i];
            g = sv.relu.backward(&g);
            g = self.stages[i].norm.backward(&sv.norm, &g, grads);
            d = Some(self.stages[i].conv.backward(&sv.conv, &g, grads));
        }
        d.expect("at least one stage")
    }
}
