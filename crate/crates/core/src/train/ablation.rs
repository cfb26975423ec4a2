//! Architecture variants compared by the ablation tables.

use std::fmt;
use std::str::FromStr;

use crate::net::NetConfig;
use crate::sac::{AttentionMode, DirectionSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    N,
    Beta,
    Rounds,
    Directions,
    Attention,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::N, Axis::Beta, Axis::Rounds, Axis::Directions, Axis::Attention];

    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::Beta => "beta",
            Axis::Rounds => "rounds",
            Axis::Directions => "directions",
            Axis::Attention => "attention",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown ablation axis `{s}` (expected n, beta, rounds, directions or attention)"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variant {
    pub name: String,
    pub config: NetConfig,
}

/// The plain pyramid baseline followed by one variant per setting of `axis`.
pub fn variants(axis: Axis, base: &NetConfig) -> Vec<Variant> {
    let with = |name: String, edit: &dyn Fn(&mut NetConfig)| {
        let mut config = base.clone();
        edit(&mut config);
        Variant { name, config }
    };
    let mut out = vec![Variant {
        name: "fpn".into(),
        config: base.without_sac(),
    }];
    match axis {
        Axis::N => out.extend((1..=5).map(|n| with(format!("n={n}"), &|c| c.sac.n = n))),
        Axis::Beta => {
            out.push(with("learnable".into(), &|c| c.sac.learn_beta = true));
            for b in [0.1, 0.0, 1.0] {
                out.push(with(format!("fixed({b})"), &|c| {
                    c.sac.learn_beta = false;
                    c.sac.beta_init = b;
                }));
            }
        }
        Axis::Rounds => out.extend((1..=3).map(|r| with(format!("rounds={r}"), &|c| c.sac.rounds = r))),
        Axis::Directions => {
            for (name, d) in [
                ("all", DirectionSet::All),
                ("vertical", DirectionSet::Vertical),
                ("horizontal", DirectionSet::Horizontal),
            ] {
                out.push(with(name.into(), &|c| c.sac.directions = d));
            }
        }
        Axis::Attention => {
            out.push(with("attention".into(), &|c| c.sac.attention = AttentionMode::Learned));
            out.push(with("w/o attention".into(), &|c| c.sac.attention = AttentionMode::Uniform));
        }
    }
    out
}
