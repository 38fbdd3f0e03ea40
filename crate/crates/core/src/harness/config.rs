use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::env::{EnvConfig, EpisodeConfig, HoldConfig, Mode, RewardConfig};
use crate::patterns::SearchConfig;
use crate::physics::{Environment, MaterialParams};
use crate::ppo::PpoConfig;
use crate::twin::{LineConfig, ZoneLayout};

/// Temperature bands used to classify sheared pieces, °C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bands {
    pub required: [f64; 2],
    pub desired: [f64; 2],
}

impl Default for Bands {
    fn default() -> Self {
        Self {
            required: [1010.0, 1090.0],
            desired: [1060.0, 1080.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub mode: Mode,
    pub out_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            mode: Mode::Normal,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub episodes: usize,
    pub deterministic: bool,
    /// Also write every step of every episode to steps.csv.
    pub write_steps: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            episodes: 1000,
            deterministic: false,
            write_steps: false,
        }
    }
}

/// The whole run in one document. Every key has a default, so an empty file is valid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub material: MaterialParams,
    pub ambient: Environment,
    pub line: LineConfig,
    pub zones: ZoneLayout,
    pub hold: HoldConfig,
    pub reward: RewardConfig,
    pub bands: Bands,
    pub episode: EpisodeConfig,
    pub ppo: PpoConfig,
    pub patterns: SearchConfig,
    pub eval: EvalSection,
}

fn field(name: &str, reason: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: name.to_string(),
        reason: reason.into(),
    }
}

/// Sets `key` (dotted path) in `table`. The value is read as a TOML value
/// when it parses as one, otherwise as a bare string.
pub fn set_dotted(table: &mut toml::Table, key: &str, value: &str) -> Result<(), HarnessError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(field(key, "malformed key"));
    }
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let (last, path) = parts.split_last().expect("non-empty");
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| field(key, format!("`{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), parsed);
    Ok(())
}

impl RunConfig {
    /// Parses `text`, applies `overrides` (dotted key, value) in order, then validates.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self, HarnessError> {
        let mut table: toml::Table = text.parse()?;
        for (k, v) in overrides {
            set_dotted(&mut table, k, v)?;
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let [rlo, rhi] = self.bands.required;
        let [dlo, dhi] = self.bands.desired;
        if !(rlo < rhi) {
            return Err(field("bands.required", "low must be below high"));
        }
        if !(dlo < dhi) {
            return Err(field("bands.desired", "low must be below high"));
        }
        if !(rlo <= dlo && dhi <= rhi) {
            return Err(field("bands.desired", "must lie inside bands.required"));
        }
        if !(rhi <= self.reward.hard_max_temp) {
            return Err(field(
                "bands.required",
                "high must not exceed reward.hard_max_temp",
            ));
        }
        self.material
            .validate()
            .map_err(|e| field(&format!("material.{}", e.field), e.reason))?;
        self.ambient
            .validate()
            .map_err(|e| field(&format!("ambient.{}", e.field), e.reason))?;
        self.ppo
            .validate()
            .map_err(|e| field("ppo", e.to_string()))?;
        if self.eval.episodes == 0 {
            return Err(field("eval.episodes", "must be positive"));
        }
        for mode in [Mode::Normal, Mode::WarmHolding] {
            self.env_config(mode)
                .validate()
                .map_err(|e| field(&mode.to_string(), e.to_string()))?;
        }
        let p = self.patterns.constant_power;
        if !(0.0..=self.zones.p_max).contains(&p) {
            return Err(field(
                "patterns.constant_power",
                "must lie in [0, zones.p_max]",
            ));
        }
        Ok(())
    }

    pub fn env_config(&self, mode: Mode) -> EnvConfig {
        EnvConfig {
            mode,
            line: self.line,
            material: self.material,
            ambient: self.ambient,
            zones: self.zones.clone(),
            reward: self.reward,
            episode: self.episode.clone(),
            hold: self.hold.clone(),
        }
    }
}
