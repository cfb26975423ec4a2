//! The full SAC module.
//!
//! ```text
//! F --1x1--> Z (m = floor(W/n) channels)
//! round r: scans of Z for every (factor k, direction) pair
//!          weighted by attention_r(F), concatenated (D*n*m channels)
//!          --1x1--> next Z (m channels)          [all but the last round]
//! last round output --1x1--> W channels --GN--> ReLU
//! ```
//!
//! Every factor scans the same reduced map. Each round has its own attention
//! branch, and both read the module input `F`. Scan slopes are separate per
//! (round, factor, direction) and per channel.

use serde::{Deserialize, Serialize};

use super::attention::{Attention, AttentionVjp};
use super::fuse::{fuse_round, FuseVjp};
use super::scan::{attenuated_scan, attenuation, Direction, ScanVjp};
use crate::error::{Error, Result};
use crate::nn::{Conv2d, GroupNorm};
use crate::ops::{default_groups, relu, ConvVjp, GroupNormVjp, ReluVjp};
use crate::params::{Initializer, ParamId, ParamKind, ParamStore};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionSet {
    /// Up, down, left and right.
    #[default]
    All,
    /// Up and down only (no left-right scans).
    Vertical,
    /// Left and right only (no up-down scans).
    Horizontal,
}

impl DirectionSet {
    pub fn directions(self) -> &'static [Direction] {
        match self {
            DirectionSet::All => &Direction::ALL,
            DirectionSet::Vertical => &[Direction::Up, Direction::Down],
            DirectionSet::Horizontal => &[Direction::Left, Direction::Right],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionMode {
    #[default]
    Learned,
    /// Every factor weighted `1/n`; no attention parameters.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    /// Number of attenuation factors.
    pub n: usize,
    pub rounds: usize,
    /// Module width `W`; set from the network width.
    #[serde(skip)]
    pub width: usize,
    /// Attention branch width; `width / 2` when unset.
    pub attention_hidden: Option<usize>,
    /// Group-norm group count; the largest divisor of the channel count up
    /// to 32 when unset.
    pub groups: Option<usize>,
    pub directions: DirectionSet,
    pub attention: AttentionMode,
    pub beta_init: f64,
    pub learn_beta: bool,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            n: 3,
            rounds: 2,
            width: 64,
            attention_hidden: None,
            groups: None,
            directions: DirectionSet::All,
            attention: AttentionMode::Learned,
            beta_init: 0.1,
            learn_beta: true,
        }
    }
}

impl SacConfig {
    /// Channels per scanned map, `floor(W / n)`.
    pub fn per_map(&self) -> usize {
        self.width / self.n.max(1)
    }

    pub fn hidden(&self) -> usize {
        self.attention_hidden.unwrap_or((self.width / 2).max(1))
    }

    pub fn groups_for(&self, channels: usize) -> usize {
        match self.groups {
            Some(g) if channels % g == 0 => g,
            _ => default_groups(channels),
        }
    }

    /// Channels of a fused round output: `D * n * floor(W / n)`.
    pub fn fused_channels(&self) -> usize {
        self.directions.directions().len() * self.n * self.per_map()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("sac.n must be at least 1".into()));
        }
        if self.rounds == 0 {
            return Err(Error::Config("sac.rounds must be at least 1".into()));
        }
        if self.per_map() == 0 {
            return Err(Error::Config(format!(
                "width {} leaves no channels per map for n = {}",
                self.width, self.n
            )));
        }
        if self.attention_hidden == Some(0) {
            return Err(Error::Config("sac.attention_hidden must be positive".into()));
        }
        if !self.beta_init.is_finite() {
            return Err(Error::Config("sac.beta_init must be finite".into()));
        }
        Ok(())
    }

    pub fn alphas(&self) -> Vec<f64> {
        (1..=self.n).map(|k| attenuation(self.n, k)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SacRound {
    /// Slope vectors indexed `factor * D + direction`.
    pub betas: Vec<ParamId>,
    pub attention: Option<Attention>,
    /// Channel reduction feeding the next round.
    pub reduce: Option<Conv2d>,
}

#[derive(Clone, Debug)]
pub struct SacModule {
    pub config: SacConfig,
    pub entry: Conv2d,
    pub rounds: Vec<SacRound>,
    pub exit: Conv2d,
    pub exit_norm: GroupNorm,
}

#[derive(Clone, Debug)]
struct RoundVjp<T> {
    scans: Vec<ScanVjp<T>>,
    attention: Option<AttentionVjp<T>>,
    weights: Tensor<T>,
    fuse: FuseVjp<T>,
    reduce: Option<ConvVjp<T>>,
}

#[derive(Clone, Debug)]
pub struct SacVjp<T> {
    entry: ConvVjp<T>,
    rounds: Vec<RoundVjp<T>>,
    exit: ConvVjp<T>,
    exit_norm: GroupNormVjp<T>,
    exit_relu: ReluVjp<T>,
}

impl<T: Real> SacVjp<T> {
    /// Attention weight maps, one `n`-channel tensor per round.
    pub fn attention_maps(&self) -> Vec<&Tensor<T>> {
        self.rounds.iter().map(|r| &r.weights).collect()
    }
}

impl SacModule {
    pub fn new<T: Real>(store: &mut ParamStore<T>, init: &Initializer, name: &str, config: &SacConfig) -> Result<Self> {
        config.validate()?;
        let width = config.width;
        let m = config.per_map();
        let fused = config.fused_channels();
        let dirs = config.directions.directions();
        let beta_kind = if config.learn_beta {
            ParamKind::ScanBeta
        } else {
            ParamKind::FixedScanBeta
        };
        let entry = Conv2d::new(store, init, &format!("{name}.entry"), width, m, 1, 1)?;
        let mut rounds = Vec::with_capacity(config.rounds);
        for r in 0..config.rounds {
            let prefix = format!("{name}.round{r}");
            let mut betas = Vec::with_capacity(config.n * dirs.len());
            for k in 1..=config.n {
                for d in dirs {
                    betas.push(store.add(
                        format!("{prefix}.beta.k{k}.{}", d.name()),
                        beta_kind,
                        Tensor::full((1, m, 1, 1), T::lit(config.beta_init)),
                    )?);
                }
            }
            let attention = match config.attention {
                AttentionMode::Learned => {
                    let hidden = config.hidden();
                    Some(Attention::new(
                        store,
                        init,
                        &format!("{prefix}.attention"),
                        width,
                        hidden,
                        config.n,
                        config.groups_for(hidden),
                    )?)
                }
                AttentionMode::Uniform => None,
            };
            let reduce = if r + 1 < config.rounds {
                Some(Conv2d::new(store, init, &format!("{prefix}.reduce"), fused, m, 1, 1)?)
            } else {
                None
            };
            rounds.push(SacRound {
                betas,
                attention,
                reduce,
            });
        }
        let exit = Conv2d::new(store, init, &format!("{name}.exit"), fused, width, 1, 1)?;
        let exit_norm = GroupNorm::new(store, &format!("{name}.exit_norm"), width, config.groups_for(width))?;
        Ok(SacModule {
            config: config.clone(),
            entry,
            rounds,
            exit,
            exit_norm,
        })
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<(Tensor<T>, SacVjp<T>)> {
        let cfg = &self.config;
        if x.shape().c != cfg.width {
            return Err(Error::invalid(
                "sac_forward",
                format!("input {} has {} channels, module width is {}", x.shape(), x.shape().c, cfg.width),
            ));
        }
        let dirs = cfg.directions.directions();
        let alphas = cfg.alphas();
        let (mut current, entry) = self.entry.forward(store, x)?;
        let mut round_vjps = Vec::with_capacity(self.rounds.len());
        let mut fused = None;
        for round in &self.rounds {
            let mut outputs = Vec::with_capacity(round.betas.len());
            let mut scans = Vec::with_capacity(round.betas.len());
            for (k, &alpha) in alphas.iter().enumerate() {
                for (d, &dir) in dirs.iter().enumerate() {
                    let beta = store.get(round.betas[k * dirs.len() + d]).data();
                    let (f, vjp) = attenuated_scan(&current, dir, T::lit(alpha), beta)?;
                    outputs.push(f);
                    scans.push(vjp);
                }
            }
            let (weights, attention) = match &round.attention {
                Some(att) => {
                    let (w, vjp) = att.forward(store, x)?;
                    (w, Some(vjp))
                }
                None => {
                    let s = current.shape();
                    let uniform = T::one() / T::from_usize(cfg.n).expect("factor count fits");
                    (Tensor::full(s.with_channels(cfg.n), uniform), None)
                }
            };
            let (out, fuse) = fuse_round(&outputs, dirs.len(), &weights)?;
            let reduce = match &round.reduce {
                Some(conv) => {
                    let (next, vjp) = conv.forward(store, &out)?;
                    current = next;
                    Some(vjp)
                }
                None => None,
            };
            fused = Some(out);
            round_vjps.push(RoundVjp {
                scans,
                attention,
                weights,
                fuse,
                reduce,
            });
        }
        let fused = fused.expect("at least one round");
        let (y, exit) = self.exit.forward(store, &fused)?;
        let (y, exit_norm) = self.exit_norm.forward(store, &y)?;
        let (y, exit_relu) = relu(&y);
        Ok((
            y,
            SacVjp {
                entry,
                rounds: round_vjps,
                exit,
                exit_norm,
                exit_relu,
            },
        ))
    }

    /// Accumulates parameter gradients and returns the input cotangent.
    pub fn backward<T: Real>(&self, vjp: &SacVjp<T>, dy: &Tensor<T>, grads: &mut ParamStore<T>) -> Tensor<T> {
        let d = vjp.exit_relu.backward(dy);
        let d = self.exit_norm.backward(&vjp.exit_norm, &d, grads);
        let mut d_fused = self.exit.backward(&vjp.exit, &d, grads);
        let mut d_input: Option<Tensor<T>> = None;
        let mut add_input = |g: Tensor<T>| match d_input.as_mut() {
            Some(acc) => acc.add_assign(&g).expect("input cotangents share a shape"),
            None => d_input = Some(g),
        };
        let mut d_current = None;
        for (r, (round, rv)) in self.rounds.iter().zip(&vjp.rounds).enumerate().rev() {
            if r + 1 < self.rounds.len() {
                // this round fed the next one through its reduction conv
                let conv = round.reduce.as_ref().expect("non-final rounds reduce");
                let reduce_vjp = rv.reduce.as_ref().expect("non-final rounds reduce");
                let d_next: Tensor<T> = d_current.take().expect("later round produced a cotangent");
                d_fused = conv.backward(reduce_vjp, &d_next, grads);
            }
            let fg = rv.fuse.backward(&d_fused);
            if let (Some(att), Some(av)) = (&round.attention, &rv.attention) {
                add_input(att.backward(av, &fg.weights, grads));
            }
            let mut acc: Option<Tensor<T>> = None;
            for ((scan_vjp, ds), &beta_id) in rv.scans.iter().zip(&fg.scans).zip(&round.betas) {
                let g = scan_vjp.backward(ds);
                let bshape = grads.get(beta_id).shape();
                grads.add_into(beta_id, &Tensor::from_vec(bshape, g.beta).expect("beta sized by channels"));
                match acc.as_mut() {
                    Some(a) => a.add_assign(&g.input).expect("scan inputs share a shape"),
                    None => acc = Some(g.input),
                }
            }
            d_current = acc;
        }
        let d_entry = d_current.expect("at least one round");
        add_input(self.entry.backward(&vjp.entry, &d_entry, grads));
        d_input.expect("entry contributes a cotangent")
    }
}
