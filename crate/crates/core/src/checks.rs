//! Finite-difference verification of whole differentiable blocks.
//!
//! Each scope builds a small randomized instance, computes analytic
//! gradients in the scope's precision, and compares them per parameter
//! group against central differences of an `f64` evaluation of the same
//! objective.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::net::{total_loss, NetConfig, SaliencyNet};
use crate::ops::{grad_check_entries, GradCheckConfig, GradCheckReport};
use crate::params::{Initializer, ParamId, ParamKind, ParamStore};
use crate::sac::{attenuated_scan, Attention, Direction, SacConfig, SacModule};
use crate::tensor::{Real, Shape, Tensor};

/// A scalar function of a parameter store and an input tensor.
pub trait Objective {
    fn value<T: Real>(&self, store: &ParamStore<T>, input: &Tensor<T>) -> Result<f64>;

    /// Gradients with respect to every parameter and the input.
    fn gradient<T: Real>(&self, store: &ParamStore<T>, input: &Tensor<T>) -> Result<(ParamStore<T>, Tensor<T>)>;
}

fn project<T: Real>(out: &Tensor<T>, cot: &Tensor<f64>) -> f64 {
    out.data()
        .iter()
        .zip(cot.data())
        .map(|(&a, &c)| a.to_f64_lossless() * c)
        .sum()
}

/// `<c, scan(x)>` for one direction and attenuation.
pub struct ScanObjective {
    pub direction: Direction,
    pub alpha: f64,
    pub beta: ParamId,
    pub cotangent: Tensor<f64>,
}

impl Objective for ScanObjective {
    fn value<T: Real>(&self, store: &ParamStore<T>, input: &Tensor<T>) -> Result<f64> {
        let (f, _) = attenuated_scan(input, self.direction, T::lit(self.alpha), store.get(self.beta).data())?;
        Ok(project(&f, &self.cotangent))
    }

    fn gradient<T: Real>(&self, store: &ParamStore<T>, input: &Tensor<T>) -> Result<(ParamStore<T>, Tensor<T>)> {
        let (_, vjp) = attenuated_scan(input, self.direction, T::lit(self.alpha), store.get(self.beta).data())?;
        let g = vjp.backward(&self.cotangent.cast());
        let mut grads = store.zeros_like();
        let shape = grads.get(self.beta).shape();
        *grads.get_mut(self.beta) = Tensor::from_vec(shape, g.beta)?;
        Ok((grads, g.input))
    }
}

/// `<c, attention(F)>`.
pub struct AttentionObjective {
    pub attention: Attention,
    pub cotangent: Tensor<f64>,
}

impl Objective for AttentionObjective {
    fn value<T: Real>(&self, store: &ParamStore<T>, input: &Tensor<T>) -> Result<f64> {
        Ok(project(&self.attention.forward(store, input)?.0, &self.cotangent))
    }

    fn gradient<T: Real>(&self, store: &ParamStore<T>, input: &Tensor<T>) -> Result<(ParamStore<T>, Tensor<T>)> {
        let (_, vjp) = self.attention.forward(store, input)?;
        let mut grads = store.zeros_like();
        let dx = self.attention.backward(&vjp, &self.cotangent.cast(), &mut grads);
        Ok((grads, dx))
    }
}

/// `<c, sac(F)>`.
pub struct SacObjective {
    pub module: SacModule,
    pub cotangent: Tensor<f64>,
}

impl Objective for SacObjective {
    fn value<T: Real>(&self, store: &ParamStore<T>, input: &Tensor<T>) -> Result<f64> {
        Ok(project(&self.module.forward(store, input)?.0, &self.cotangent))
    }

    fn gradient<T: Real>(&self, store: &ParamStore<T>, input: &Tensor<T>) -> Result<(ParamStore<T>, Tensor<T>)> {
        let (_, vjp) = self.module.forward(store, input)?;
        let mut grads = store.zeros_like();
        let dx = self.module.backward(&vjp, &self.cotangent.cast(), &mut grads);
        Ok((grads, dx))
    }
}

/// The summed multi-level cross-entropy of the full network.
pub struct NetObjective {
    pub net: SaliencyNet,
    pub mask: Tensor<f64>,
}

impl Objective for NetObjective {
    fn value<T: Real>(&self, store: &ParamStore<T>, input: &Tensor<T>) -> Result<f64> {
        let (pred, _) = self.net.forward(store, input)?;
        Ok(total_loss(&pred.logits, &self.mask.cast())?.0)
    }

    fn gradient<T: Real>(&self, store: &ParamStore<T>, input: &Tensor<T>) -> Result<(ParamStore<T>, Tensor<T>)> {
        let (pred, vjp) = self.net.forward(store, input)?;
        let (_, loss) = total_loss(&pred.logits, &self.mask.cast())?;
        let mut grads = store.zeros_like();
        let dx = self.net.backward(&vjp, &loss.backward(), &mut grads);
        Ok((grads, dx))
    }
}

#[derive(Clone, Debug)]
pub struct GroupReport {
    pub group: String,
    pub report: GradCheckReport,
}

/// Checks the analytic gradient computed at precision `A`.
///
/// At most `max_entries` scalar entries are probed; when the instance is
/// larger a seeded uniform subset is used. The error floor is
/// `cfg.floor * max(1, max |g|)` taken over the whole gradient, so entries
/// that are tiny next to the rest of the gradient are compared in absolute
/// terms.
pub fn check_objective<O: Objective, A: Real>(
    objective: &O,
    store: &ParamStore<f64>,
    input: &Tensor<f64>,
    cfg: &GradCheckConfig,
    max_entries: usize,
    rng: &mut impl Rng,
) -> Result<Vec<GroupReport>> {
    let (grads, dx) = objective.gradient::<A>(&store.cast(), &input.cast())?;
    let mut analytic: Vec<f64> = dx.data().iter().map(|v| v.to_f64_lossless()).collect();
    analytic.extend(grads.flatten().into_iter().map(|v| v.to_f64_lossless()));

    let mut point = input.data().to_vec();
    point.extend(store.flatten());

    // (group name, first flat index, length)
    let mut groups = vec![("input".to_owned(), 0usize, input.len())];
    let mut off = input.len();
    for p in store.iter() {
        groups.push((p.name.clone(), off, p.value.len()));
        off += p.value.len();
    }

    let mut selected: Vec<usize> = if point.len() > max_entries {
        sample(rng, point.len(), max_entries).into_vec()
    } else {
        (0..point.len()).collect()
    };
    selected.sort_unstable();

    let scale = analytic.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let cfg = GradCheckConfig {
        floor: cfg.floor * scale,
        ..*cfg
    };

    let shape = input.shape();
    let mut scratch = store.clone();
    let mut failure = None;
    let mut f = |v: &[f64]| -> f64 {
        let x = Tensor::from_vec(shape, v[..shape.numel()].to_vec()).expect("input sized");
        scratch.unflatten(&v[shape.numel()..]).expect("params sized");
        match objective.value(&scratch, &x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let mut out = Vec::with_capacity(groups.len());
    for (name, start, len) in groups {
        let entries: Vec<usize> = selected
            .iter()
            .copied()
            .filter(|&i| i >= start && i < start + len)
            .collect();
        if entries.is_empty() {
            continue;
        }
        let report = grad_check_entries(&mut f, &point, &analytic, &entries, &cfg);
        out.push(GroupReport { group: name, report });
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Scan,
    Attention,
    Sac,
    Net,
}

impl Scope {
    pub const ALL: [Scope; 4] = [Scope::Scan, Scope::Attention, Scope::Sac, Scope::Net];

    /// Tolerances: the scan is checked at 64-bit, everything else with a
    /// 32-bit analytic gradient and a denominator floor of 1e-2 of the
    /// largest gradient entry.
    pub fn config(self) -> GradCheckConfig {
        match self {
            Scope::Scan => GradCheckConfig::f64_default(),
            _ => GradCheckConfig {
                floor: 1e-2,
                ..GradCheckConfig::f32_default()
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scope::Scan => "scan",
            Scope::Attention => "attention",
            Scope::Sac => "sac",
            Scope::Net => "net",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scope::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown gradcheck scope `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub struct ScopeReport {
    pub scope: Scope,
    pub seed: u64,
    pub groups: Vec<GroupReport>,
}

impl ScopeReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.report.passed())
    }

    /// The group with the largest relative error.
    pub fn worst(&self) -> Option<&GroupReport> {
        self.groups
            .iter()
            .max_by(|a, b| a.report.max_rel_error.total_cmp(&b.report.max_rel_error))
    }

    pub fn max_rel_error(&self) -> f64 {
        self.worst().map_or(0.0, |g| g.report.max_rel_error)
    }
}

const MAX_ENTRIES: usize = 2000;

fn uniform(shape: impl Into<Shape>, lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

/// Moves every parameter off its structured initial value (unit gains,
/// zero biases) so no gradient entry is trivially zero.
fn jitter(store: &mut ParamStore<f64>, std: f64, rng: &mut impl Rng) {
    let noise = Normal::new(0.0, std).expect("finite std");
    for p in store.iter_mut() {
        for v in p.value.data_mut() {
            *v += noise.sample(rng);
        }
    }
}

/// Small SAC configuration used by the `attention` and `sac` scopes.
pub fn check_sac_config() -> SacConfig {
    SacConfig {
        n: 3,
        rounds: 2,
        width: 6,
        attention_hidden: Some(4),
        groups: Some(2),
        ..SacConfig::default()
    }
}

fn net_instance(
    init: &Initializer,
    rng: &mut impl Rng,
) -> Result<(NetObjective, ParamStore<f64>, Tensor<f64>)> {
    let net_cfg = NetConfig::micro();
    let mut store = ParamStore::new();
    let net = SaliencyNet::new(&net_cfg, &mut store, init)?;
    jitter(&mut store, 0.05, rng);
    let x = uniform(net.expected_input(1), 0.0, 1.0, rng);
    let s = net_cfg.input_size;
    let mask = Tensor::from_fn((1, 1, s, s), |_| if rng.gen_bool(0.4) { 1.0 } else { 0.0 });
    Ok((NetObjective { net, mask }, store, x))
}

/// Runs one randomized instance of `scope`.
pub fn run_scope(scope: Scope, seed: u64) -> Result<ScopeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ac0_5ac0);
    let init = Initializer::new(seed);
    let cfg = scope.config();
    let groups = match scope {
        Scope::Scan => {
            let shape = Shape::new(
                rng.gen_range(1..=2),
                rng.gen_range(1..=3),
                rng.gen_range(2..=6),
                rng.gen_range(2..=6),
            );
            let mut store = ParamStore::new();
            let beta = store.add(
                "beta",
                ParamKind::ScanBeta,
                uniform((1, shape.c, 1, 1), 0.0, 1.0, &mut rng),
            )?;
            let objective = ScanObjective {
                direction: Direction::ALL[rng.gen_range(0..4)],
                alpha: [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0][rng.gen_range(0..4)],
                beta,
                cotangent: uniform(shape, -1.0, 1.0, &mut rng),
            };
            let x = uniform(shape, -1.0, 1.0, &mut rng);
            check_objective::<_, f64>(&objective, &store, &x, &cfg, MAX_ENTRIES, &mut rng)?
        }
        Scope::Attention => {
            let sac = check_sac_config();
            let mut store = ParamStore::new();
            let attention = Attention::new(&mut store, &init, "attention", sac.width, sac.hidden(), sac.n, 2)?;
            jitter(&mut store, 0.1, &mut rng);
            let x = uniform((1, sac.width, 5, 7), -1.0, 1.0, &mut rng);
            let objective = AttentionObjective {
                attention,
                cotangent: uniform((1, sac.n, 5, 7), -1.0, 1.0, &mut rng),
            };
            check_objective::<_, f32>(&objective, &store, &x, &cfg, MAX_ENTRIES, &mut rng)?
        }
        Scope::Sac => {
            let sac = check_sac_config();
            let mut store = ParamStore::new();
            let module = SacModule::new(&mut store, &init, "sac", &sac)?;
            jitter(&mut store, 0.1, &mut rng);
            let x = uniform((1, sac.width, 5, 7), -1.0, 1.0, &mut rng);
            let objective = SacObjective {
                module,
                cotangent: uniform((1, sac.width, 5, 7), -1.0, 1.0, &mut rng),
            };
            check_objective::<_, f32>(&objective, &store, &x, &cfg, MAX_ENTRIES, &mut rng)?
        }
        Scope::Net => {
            let (objective, store, x) = net_instance(&init, &mut rng)?;
            check_objective::<_, f32>(&objective, &store, &x, &cfg, MAX_ENTRIES, &mut rng)?
        }
    };
    Ok(ScopeReport { scope, seed, groups })
}
