use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use epiportrait_core::geometry::{ChannelAssignment, PortraitConfig};
use epiportrait_core::ingest::{JoinOptions, SourcePaths};
use epiportrait_core::temporal::PhaseRules;
use epiportrait_core::StudyWindow;
use serde::{Deserialize, Serialize};

pub const DEFAULT_DIVISOR: f64 = 10_000.0;
pub const DEFAULT_MAX_ITER: usize = 4000;

/// Settings that shape query results. They are stored inside the snapshot
/// so a snapshot always answers the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub portrait: PortraitConfig,
    pub channels: ChannelAssignment,
    pub phase_rules: PhaseRules,
    /// Population unit of per-capita mode.
    pub per_capita_divisor: f64,
    pub layout: LayoutSettings,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            portrait: PortraitConfig::default(),
            channels: ChannelAssignment::default(),
            phase_rules: PhaseRules::default(),
            per_capita_divisor: DEFAULT_DIVISOR,
            layout: LayoutSettings::default(),
        }
    }
}

impl Settings {
    pub fn validate(&self) -> anyhow::Result<()> {
        self.portrait.validate()?;
        self.channels.validate()?;
        if !(self.per_capita_divisor.is_finite() && self.per_capita_divisor > 0.0) {
            bail!("per_capita_divisor must be positive");
        }
        if self.layout.max_iter == 0 {
            bail!("layout.max_iter must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutSettings {
    pub max_iter: usize,
    /// Blank margin around each portrait disc.
    pub padding: f64,
}

impl Default for LayoutSettings {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            padding: 4.0,
        }
    }
}

/// The build configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub window: StudyWindow,
    /// Relative paths resolve against the config file's directory.
    pub sources: SourcePaths,
    #[serde(default)]
    pub join: JoinOptions,
    #[serde(default, flatten)]
    pub settings: Settings,
}

impl BuildConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: BuildConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        cfg.sources = cfg.sources.relative_to(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.window.start > self.window.end {
            bail!("window ends before it starts");
        }
        self.settings.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg: BuildConfig = serde_json::from_str(
            r#"{"window":{"start":"2020-01-01","end":"2020-02-01"},
                "sources":{"cases":"c.csv","profiles":"p.csv","boundaries_lga":"b.geojson"},
                "per_capita_divisor":100000}"#,
        )
        .unwrap();
        assert_eq!(cfg.settings.per_capita_divisor, 100_000.0);
        assert_eq!(cfg.settings.portrait, PortraitConfig::default());
        assert_eq!(cfg.settings.layout.max_iter, DEFAULT_MAX_ITER);
        assert!(cfg.sources.events.is_none());
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_settings() {
        let mut s = Settings::default();
        s.per_capita_divisor = 0.0;
        assert!(s.validate().is_err());
        let mut s = Settings::default();
        s.portrait.crown_radius = 1.0;
        assert!(s.validate().is_err());
    }
}
