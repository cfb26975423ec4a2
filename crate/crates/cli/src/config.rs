//! Run configuration: built-in defaults, then the TOML file, then flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sacnet::net::NetConfig;
use sacnet::train::TrainConfig;

use crate::failure::{CmdResult, Failure};

pub const RESOLVED_NAME: &str = "config.resolved.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblateConfig {
    /// Trailing fraction of the dataset index held out for evaluation.
    pub eval_fraction: f64,
}

impl Default for AblateConfig {
    fn default() -> Self {
        AblateConfig { eval_fraction: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub ablate: AblateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            net: NetConfig::toy(),
            train: TrainConfig::default(),
            ablate: AblateConfig::default(),
        }
    }
}

/// Overlays `over` onto `base`. Tables merge key by key, except that a
/// table whose `kind` changes replaces the old one outright.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) if o.get("kind").map_or(true, |k| b.get("kind") == Some(k)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CmdResult<Self> {
        let over: toml::Value = toml::from_str(text).map_err(|e| Failure::config(format!("config: {e}")))?;
        let mut value = toml::Value::try_from(RunConfig::default()).expect("defaults serialize");
        merge(&mut value, over);
        let cfg: RunConfig = value.try_into().map_err(|e| Failure::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> CmdResult<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::config(format!("cannot read config {}: {e}", p.display())))?;
                RunConfig::parse(&text).map_err(|f| Failure::config(format!("{}: {f}", p.display())))
            }
        }
    }

    pub fn validate(&self) -> CmdResult<()> {
        self.net.validate()?;
        self.train.validate()?;
        if !(self.ablate.eval_fraction > 0.0 && self.ablate.eval_fraction < 1.0) {
            return Err(Failure::config("ablate.eval_fraction must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn write_resolved(&self, dir: &Path) -> CmdResult<()> {
        let path = dir.join(RESOLVED_NAME);
        std::fs::write(&path, self.to_toml()).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
    }
}
