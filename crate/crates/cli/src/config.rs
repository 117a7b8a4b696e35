use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use runevt::forecast::ForecastSettings;
use runevt::{BootstrapConfig, FitConfig, YearRange};

/// Settings shared by all subcommands, read from a TOML file.
///
/// ```toml
/// target_exceedances = 200
///
/// [horizon]
/// first = 2001
/// last = 2019
///
/// [thresholds]
/// marM = -7564.32
///
/// [fit]
/// starts = 8
/// seed = 7
/// shared_xi = true
/// gamma = true
/// delta = true
/// max_evaluations = 1000000
/// tolerance = 1e-7
/// year_origin = 2000
/// aft_start_year = 2018
///
/// [forecast]
/// origin_year = 2020
/// horizon_cap = 2150
///
/// [bootstrap]
/// replicates = 200
/// level = 0.95
/// seed = 45063
/// method = "basic"
///
/// [diagnostics]
/// replicates = 1000
/// seed = 153
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub target_exceedances: usize,
    pub horizon: Option<YearRange>,
    /// Overrides for the thresholds stored in a model file.
    pub thresholds: BTreeMap<String, f64>,
    pub fit: FitConfig,
    pub forecast: ForecastSettings,
    pub bootstrap: BootstrapConfig,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            target_exceedances: 200,
            horizon: None,
            thresholds: BTreeMap::new(),
            fit: FitConfig::default(),
            forecast: ForecastSettings::default(),
            bootstrap: BootstrapConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub replicates: usize,
    pub seed: u64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            seed: 0x99,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| runevt::Error::Config(format!("{}: {e}", path.display())).into())
    }

    pub fn horizon_override(&mut self, from: Option<i32>, to: Option<i32>) -> anyhow::Result<()> {
        match (from, to, self.horizon) {
            (None, None, _) => {}
            (Some(f), Some(t), _) => self.horizon = Some(YearRange::new(f, t)?),
            (Some(f), None, Some(h)) => self.horizon = Some(YearRange::new(f, h.last)?),
            (None, Some(t), Some(h)) => self.horizon = Some(YearRange::new(h.first, t)?),
            _ => {
                return Err(runevt::Error::Config(
                    "--from and --to must be given together unless the config sets a horizon".into(),
                )
                .into())
            }
        }
        Ok(())
    }
}
