use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sac::SacConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelKeyword {
    All,
    None,
}

/// Which pyramid levels carry a SAC module. Level 0 is the finest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSelection {
    Keyword(LevelKeyword),
    Levels(Vec<usize>),
}

impl Default for LevelSelection {
    fn default() -> Self {
        LevelSelection::Keyword(LevelKeyword::All)
    }
}

impl LevelSelection {
    pub fn includes(&self, level: usize) -> bool {
        match self {
            LevelSelection::Keyword(LevelKeyword::All) => true,
            LevelSelection::Keyword(LevelKeyword::None) => false,
            LevelSelection::Levels(levels) => levels.contains(&level),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    /// Square input side; must be divisible by `2^stages`.
    pub input_size: usize,
    pub in_channels: usize,
    /// Output channels of each stride-2 backbone stage.
    pub stage_channels: Vec<usize>,
    /// Pyramid and SAC width `W`.
    pub width: usize,
    pub sac_levels: LevelSelection,
    pub sac: SacConfig,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            input_size: 64,
            in_channels: 3,
            stage_channels: vec![16, 32, 64, 64],
            width: 64,
            sac_levels: LevelSelection::default(),
            sac: SacConfig::default(),
        }
    }
}

impl NetConfig {
    /// The desk-scale network used for the training experiments.
    pub fn toy() -> Self {
        NetConfig {
            stage_channels: vec![8, 16, 16, 16],
            width: 16,
            sac: SacConfig {
                attention_hidden: Some(8),
                ..SacConfig::default()
            },
            ..NetConfig::default()
        }
    }

    /// Two-stage network small enough for exhaustive gradient checks.
    pub fn micro() -> Self {
        NetConfig {
            input_size: 12,
            stage_channels: vec![4, 5],
            width: 6,
            sac: SacConfig {
                attention_hidden: Some(4),
                ..SacConfig::default()
            },
            ..NetConfig::default()
        }
    }

    /// The same network with every SAC module removed.
    pub fn without_sac(&self) -> Self {
        NetConfig {
            sac_levels: LevelSelection::Keyword(LevelKeyword::None),
            ..self.clone()
        }
    }

    pub fn stages(&self) -> usize {
        self.stage_channels.len()
    }

    /// Pyramid levels are built over stages 2..=S.
    pub fn levels(&self) -> usize {
        self.stages().saturating_sub(1)
    }

    /// Spatial side of pyramid level `l` (0 = finest).
    pub fn level_size(&self, level: usize) -> usize {
        self.input_size >> (level + 2)
    }

    pub fn sac_config(&self) -> SacConfig {
        SacConfig {
            width: self.width,
            ..self.sac.clone()
        }
    }

    pub fn has_sac(&self, level: usize) -> bool {
        self.sac_levels.includes(level)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.stages();
        if s < 2 {
            return Err(Error::Config("at least two backbone stages are required".into()));
        }
        if self.stage_channels.contains(&0) || self.width == 0 || self.in_channels == 0 {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if self.input_size == 0 || self.input_size % (1 << s) != 0 {
            return Err(Error::Config(format!(
                "input_size {} is not divisible by 2^{s}",
                self.input_size
            )));
        }
        if let LevelSelection::Levels(levels) = &self.sac_levels {
            if let Some(bad) = levels.iter().find(|&&l| l >= self.levels()) {
                return Err(Error::Config(format!(
                    "sac level {bad} out of range (network has {} levels)",
                    self.levels()
                )));
            }
        }
        self.sac_config().validate()
    }

    /// Stable 64-bit fingerprint of the architecture.
    pub fn hash(&self) -> u64 {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        NetConfig::default().validate().unwrap();
        NetConfig::toy().validate().unwrap();
        NetConfig::micro().validate().unwrap();
    }

    #[test]
    fn level_geometry() {
        let cfg = NetConfig::default();
        assert_eq!(cfg.levels(), 3);
        let sizes: Vec<_> = (0..3).map(|l| cfg.level_size(l)).collect();
        assert_eq!(sizes, vec![16, 8, 4]);
    }

    #[test]
    fn hash_tracks_architecture() {
        let a = NetConfig::toy();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.sac.n = 2;
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.hash(), a.without_sac().hash());
    }

    #[test]
    fn bad_configs_rejected() {
        let mut c = NetConfig::toy();
        c.input_size = 60;
        assert!(c.validate().is_err());
        let mut c = NetConfig::toy();
        c.sac_levels = LevelSelection::Levels(vec![5]);
        assert!(c.validate().is_err());
        let mut c = NetConfig::toy();
        c.sac.n = 17;
        assert!(c.validate().is_err());
    }
}
