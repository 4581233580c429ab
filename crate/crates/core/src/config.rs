//! Run configuration (TOML). Missing fields take the defaults below.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AugmentationRanges;
use crate::lasermix::LaserMixConfig;
use crate::polarmix::PolarMixConfig;
use crate::tta::SUPPORTED_VIEW_COUNTS;

pub const DEFAULT_P1: f64 = 0.8;
pub const DEFAULT_P2: f64 = 1.0;
pub const DEFAULT_TTA_VIEWS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TtaConfig {
    pub views: usize,
    pub seed: u64,
    /// Draw random views instead of the canonical grid.
    pub random: bool,
    pub random_ranges: AugmentationRanges,
}

impl Default for TtaConfig {
    fn default() -> Self {
        Self {
            views: DEFAULT_TTA_VIEWS,
            seed: 0,
            random: false,
            random_ranges: AugmentationRanges::default(),
        }
    }
}

/// Global per-scan augmentation applied before mixing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalAugmentConfig {
    pub enabled: bool,
    pub ranges: AugmentationRanges,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// LaserMix trigger probability.
    pub p1: f64,
    /// PolarMix trigger probability.
    pub p2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classmap: Option<PathBuf>,
    pub lasermix: LaserMixConfig,
    pub polarmix: PolarMixConfig,
    pub tta: TtaConfig,
    pub augment: GlobalAugmentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p1: DEFAULT_P1,
            p2: DEFAULT_P2,
            classmap: None,
            lasermix: LaserMixConfig::default(),
            polarmix: PolarMixConfig::default(),
            tta: TtaConfig::default(),
            augment: GlobalAugmentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        self.lasermix.validate()?;
        self.polarmix.validate()?;
        if !SUPPORTED_VIEW_COUNTS.contains(&self.tta.views) {
            return Err(Error::Validation(format!(
                "tta.views = {} is not one of {SUPPORTED_VIEW_COUNTS:?}",
                self.tta.views
            )));
        }
        self.tta.random_ranges.validate()?;
        self.augment.ranges.validate()?;
        Ok(())
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Config {
                path: path.to_path_buf(),
                line,
                msg: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}
