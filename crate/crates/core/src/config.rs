//! Run configuration files.
//!
//! A config is TOML and names either a preset with optional overrides or a
//! fully explicit scenario. Unknown keys are rejected.
//!
//! ```toml
//! output_dir = "out/tpv3"
//! deterministic = true
//!
//! [preset]
//! name = "tpv3"
//! dx = 500.0
//! strip_width = 2000.0
//!
//! [output]
//! snapshot_every = 20
//! vtk = true
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::Station;
use crate::sbi::boundary::SbiSettings;
use crate::scenario::{preset, Scenario, TimeStepPolicy};

/// Upper bound on the number of field snapshots a run emits by default.
pub const DEFAULT_SNAPSHOT_COUNT: u64 = 50;

/// A named preset and the parameters that replace its defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetSelection {
    pub name: String,
    pub dx: f64,
    /// Full strip width (m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strip_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_step: Option<TimeStepPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stations: Option<Vec<Station>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sbi: Option<SbiSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rupture_threshold: Option<f64>,
}

impl PresetSelection {
    pub fn new(name: impl Into<String>, dx: f64) -> Self {
        Self {
            name: name.into(),
            dx,
            strip_width: None,
            duration: None,
            time_step: None,
            stations: None,
            sbi: None,
            rupture_threshold: None,
        }
    }

    pub fn build(&self) -> Result<Scenario> {
        let mut s = preset(&self.name, self.dx, self.strip_width)?;
        if let Some(d) = self.duration {
            s.duration = d;
        }
        if let Some(t) = self.time_step {
            s.time_step = t;
        }
        if let Some(st) = &self.stations {
            s.stations = st.clone();
        }
        if let Some(sbi) = &self.sbi {
            s.sbi = sbi.clone();
        }
        if let Some(r) = self.rupture_threshold {
            s.rupture_threshold = r;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    /// Steps between field snapshots; 0 disables them. When unset, the
    /// cadence keeps a run at or below [`DEFAULT_SNAPSHOT_COUNT`] snapshots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<u64>,
    /// Also write each snapshot as a legacy VTK structured-points file.
    #[serde(default)]
    pub vtk: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            snapshot_every: None,
            vtk: false,
        }
    }
}

impl OutputSettings {
    /// Snapshot cadence for a run of `steps` steps; `None` when disabled.
    pub fn cadence(&self, steps: u64) -> Option<u64> {
        match self.snapshot_every {
            Some(0) => None,
            Some(n) => Some(n),
            None => Some(steps.div_ceil(DEFAULT_SNAPSHOT_COUNT).max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetSelection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub output: OutputSettings,
    /// Worker threads; all cores when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Leave wall-clock timings out of the manifest so reruns produce
    /// identical artifacts.
    #[serde(default)]
    pub deterministic: bool,
}

impl RunConfig {
    pub fn for_preset(selection: PresetSelection, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            preset: Some(selection),
            scenario: None,
            output_dir: output_dir.into(),
            output: OutputSettings::default(),
            threads: None,
            deterministic: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. Relative output directories are taken relative
    /// to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.output_dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.output_dir = parent.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    /// The scenario this config describes, validated. Returns the scenario
    /// and the validation warnings.
    pub fn resolve(&self) -> Result<(Scenario, Vec<String>)> {
        let scenario = match (&self.preset, &self.scenario) {
            (Some(p), None) => p.build()?,
            (None, Some(s)) => s.clone(),
            (Some(_), Some(_)) => return Err(Error::Config("give either [preset] or [scenario], not both".into())),
            (None, None) => return Err(Error::Config("config needs a [preset] or a [scenario] table".into())),
        };
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let warnings = scenario.validate()?;
        Ok((scenario, warnings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_cadence_caps_snapshot_count() {
        let o = OutputSettings::default();
        assert_eq!(o.cadence(10_000), Some(200));
        assert_eq!(o.cadence(7), Some(1));
        let off = OutputSettings {
            snapshot_every: Some(0),
            vtk: false,
        };
        assert_eq!(off.cadence(100), None);
    }

    #[test]
    fn preset_and_scenario_are_exclusive() {
        let mut cfg = RunConfig::for_preset(PresetSelection::new("tpv3", 500.0), "out");
        cfg.scenario = Some(cfg.preset.as_ref().unwrap().build().unwrap());
        assert!(matches!(cfg.resolve(), Err(Error::Config(_))));
        cfg.preset = None;
        assert!(cfg.resolve().is_ok());
        cfg.scenario = None;
        assert!(matches!(cfg.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_apply() {
        let mut p = PresetSelection::new("tpv3", 500.0);
        p.duration = Some(1.0);
        p.strip_width = Some(6000.0);
        p.rupture_threshold = Some(0.01);
        let s = p.build().unwrap();
        assert_eq!(s.duration, 1.0);
        assert_eq!(s.domain.x2, [0.0, 3000.0]);
        assert_eq!(s.rupture_threshold, 0.01);
    }
}
