use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::baselines::{BaselineKind, GridSpec};
use crate::channel::{ArrayGeometry, ScenarioConfig};
use crate::error::{Error, Result};
use crate::orchestrator::SolverConfig;

/// Swept parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "kebab-case")]
pub enum Sweep {
    /// Single point at `power_dbm`.
    None,
    /// Transmit power budgets (dBm).
    Power(Vec<f64>),
    /// Frame sizes in wavelengths.
    Region(Vec<f64>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Full description of a Monte-Carlo run. Loaded from JSON; every field has
/// a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    /// `max_power` and `seed` are overwritten per trial and sweep point.
    pub solver: SolverConfig,
    pub grid: GridSpec,
    pub sweep: Sweep,
    /// Power budget when power is not swept (dBm).
    pub power_dbm: f64,
    pub trials: usize,
    pub schemes: Vec<BaselineKind>,
    pub master_seed: u64,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    /// Record wall-clock time. Off by default so outputs are reproducible.
    pub timing: bool,
    pub format: OutputFormat,
    /// Aggregate rows go here; per-trial rows go next to it.
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: ScenarioConfig::default(),
            solver: SolverConfig::default(),
            grid: GridSpec::default(),
            sweep: Sweep::None,
            power_dbm: 10.0,
            trials: 100,
            schemes: vec![BaselineKind::FpaSub, BaselineKind::FpaFull, BaselineKind::MaSub],
            master_seed: 0,
            workers: 0,
            timing: false,
            format: OutputFormat::Csv,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::config("need at least one trial"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("no schemes selected"));
        }
        let values = match &self.sweep {
            Sweep::None => vec![self.power_dbm],
            Sweep::Power(v) | Sweep::Region(v) => v.clone(),
        };
        if values.is_empty() {
            return Err(Error::config("sweep has no values"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sweep values must be finite"));
        }
        self.scenario.validate()?;
        let geometry = ArrayGeometry::tiled(&self.scenario.geometry)?;
        if let Sweep::Region(v) = &self.sweep {
            for &d in v {
                geometry.with_frame_size(d * geometry.wavelength)?;
            }
        }
        self.solver.validate()?;
        if self.schemes.contains(&BaselineKind::UpperBound) {
            self.grid.check_budget(geometry.num_subarrays())?;
        }
        Ok(())
    }

    /// Sweep values in ascending order without duplicates.
    pub fn sweep_values(&self) -> Vec<f64> {
        let mut v = match &self.sweep {
            Sweep::None => vec![self.power_dbm],
            Sweep::Power(v) | Sweep::Region(v) => v.clone(),
        };
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Schemes in canonical order without duplicates.
    pub fn scheme_list(&self) -> Vec<BaselineKind> {
        let mut s = self.schemes.clone();
        s.sort();
        s.dedup();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let j = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&j).unwrap(), c);
        let partial: ExperimentConfig =
            serde_json::from_str(r#"{"trials": 3, "sweep": {"axis": "power", "values": [5, 0]}}"#).unwrap();
        assert_eq!(partial.trials, 3);
        assert_eq!(partial.sweep_values(), vec![0.0, 5.0]);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            ExperimentConfig { trials: 0, ..Default::default() },
            ExperimentConfig { schemes: vec![], ..Default::default() },
            ExperimentConfig { sweep: Sweep::Power(vec![]), ..Default::default() },
            ExperimentConfig { sweep: Sweep::Region(vec![0.2]), ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().unwrap_err().is_config(), "{c:?}");
        }
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"trails": 3}"#).is_err());
    }
}
