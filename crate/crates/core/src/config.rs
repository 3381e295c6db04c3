//! Run configuration (TOML) and the JSON manifest written next to outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HcpError, Result};
use crate::hcp::{EpochSchedule, Thresholds, WindowPolicy};
use crate::ocp::RateProfile;
use crate::spp::RenewalSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulePreset {
    East,
    PasteAll,
}

/// Schedule as written by users: an optional preset with field overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub preset: Option<SchedulePreset>,
    pub thresholds: Option<Thresholds>,
    pub rates: Option<RateProfile>,
    pub gamma: Option<f64>,
}

impl ScheduleConfig {
    pub fn resolve(&self) -> Result<EpochSchedule> {
        let base = match self.preset {
            Some(SchedulePreset::East) => Some(EpochSchedule::east()),
            Some(SchedulePreset::PasteAll) => Some(EpochSchedule::paste_all()),
            None => None,
        };
        let mut s = match base {
            Some(s) => s,
            None => EpochSchedule {
                thresholds: self.thresholds.clone().ok_or_else(|| {
                    HcpError::Config("schedule: give a preset or `thresholds`".into())
                })?,
                rates: self
                    .rates
                    .clone()
                    .ok_or_else(|| HcpError::Config("schedule: give a preset or `rates`".into()))?,
                gamma: None,
            },
        };
        if let Some(t) = &self.thresholds {
            s.thresholds = t.clone();
        }
        if let Some(r) = &self.rates {
            s.rates = r.clone();
        }
        if self.gamma.is_some() {
            s.gamma = self.gamma;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticConfig {
    pub l_max: f64,
    /// Grid for continuous laws; lattice laws keep their own.
    pub grid_step: Option<f64>,
    pub j_max: Option<f64>,
    pub deficit_tolerance: f64,
    pub strict: bool,
    /// Points `x` at which `U^(n)(x)` is reported.
    pub probe_x: Vec<f64>,
    pub c0_s_min: f64,
    pub c0_per_decade: usize,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        Self {
            l_max: 4096.0,
            grid_step: None,
            j_max: None,
            deficit_tolerance: 1e-6,
            strict: false,
            probe_x: vec![10.0],
            c0_s_min: 1e-6,
            c0_per_decade: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsConfig {
    pub c0: f64,
    pub x_max: f64,
    pub x_step: f64,
    pub s_grid: Vec<f64>,
    pub moments: u32,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        Self { c0: 1.0, x_max: 12.0, x_step: 0.01, s_grid: vec![0.25, 0.5, 1.0, 2.0, 4.0], moments: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigbConfig {
    pub q: Vec<f64>,
    pub horizon: usize,
    pub x: f64,
    pub step: f64,
}

impl Default for FigbConfig {
    fn default() -> Self {
        Self { q: vec![0.1, 0.5, 0.8], horizon: 20, x: 10.0, step: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub initial: RenewalSpec,
    pub schedule: ScheduleConfig,
    pub epochs: usize,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default)]
    pub first_replica: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub window: WindowPolicy,
    #[serde(default)]
    pub analytic: AnalyticConfig,
    #[serde(default)]
    pub limits: LimitsConfig,
    #[serde(default)]
    pub figb: FigbConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HcpError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads TOML, or a manifest when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(Manifest::from_json(&text)?.config)
        } else {
            Self::from_toml(&text).map_err(|e| match e {
                HcpError::Config(msg) => HcpError::Config(format!("{}: {msg}", path.display())),
                other => other,
            })
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(HcpError::Config("epochs: must be at least 1".into()));
        }
        if self.replicas == 0 {
            return Err(HcpError::Config("replicas: must be at least 1".into()));
        }
        self.initial.validate().map_err(|e| HcpError::Config(format!("initial: {e}")))?;
        let schedule = self.schedule.resolve()?;
        schedule.validate(self.epochs.saturating_sub(1))?;
        if self.window.intervals < 2 {
            return Err(HcpError::Config("window.intervals: need at least 2".into()));
        }
        if !(self.analytic.l_max > 0.0) {
            return Err(HcpError::Config("analytic.l_max: must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HcpError::Config(e.to_string()))
    }
}

/// Everything required to regenerate a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: RunConfig, files: Vec<String>) -> Self {
        Self {
            tool: "hcp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            files,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        m.config.validate()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EAST: &str = r#"
epochs = 3
replicas = 2
seed = 7

[initial]
kind = "left_bounded"
law = { type = "dirac", value = 1.0 }

[schedule]
preset = "east"

[window]
intervals = 64
"#;

    #[test]
    fn parses_preset_config() {
        let c = RunConfig::from_toml(EAST).unwrap();
        assert_eq!(c.schedule.resolve().unwrap(), EpochSchedule::east());
        assert_eq!(c.window.intervals, 64);
        assert_eq!(c.replicas, 2);
        let again = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_field_is_reported_with_position() {
        let bad = EAST.replace("seed = 7", "sede = 7");
        let msg = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("sede") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn wide_schedule_names_epoch() {
        let bad = EAST.replace(
            "preset = \"east\"",
            "thresholds = { preset = \"explicit\", values = [1.0, 2.0, 5.0, 6.0] }\nrates = { preset = \"constant\", left = 1.0, right = 1.0 }",
        );
        let bad = bad.replace("epochs = 3", "epochs = 4");
        let msg = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("(A2)") && msg.contains("epoch 2"), "{msg}");
    }

    #[test]
    fn manifest_round_trip() {
        let c = RunConfig::from_toml(EAST).unwrap();
        let m = Manifest::new("simulate", c.clone(), vec!["a.csv".into()]);
        let back = Manifest::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
