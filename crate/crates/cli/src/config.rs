//! TOML run configuration. Every section is optional; command-line flags
//! override whatever the file sets.

use std::path::{Path, PathBuf};

use cfcal_core::bayesopt::HyperBounds;
use cfcal_core::{BayesConfig, DeConfig, GridRanges, KlDirection};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub synth: SynthConfig,
    pub bayes: BayesConfig,
    pub de: DeConfig,
    pub tune: TuneConfig,
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_drivers: usize,
    pub n_instances: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub noise_std: f64,
    pub spread: f64,
    pub v_max: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_drivers: 10,
            n_instances: 3,
            n_steps: 600,
            dt: 0.1,
            noise_std: 0.1,
            spread: 0.25,
            v_max: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TuneMethod {
    Grid,
    Bo,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub method: Option<TuneMethod>,
    pub budget: usize,
    pub grid: GridRanges,
    pub bo_bounds: HyperBounds,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            method: None,
            budget: 30,
            grid: GridRanges::default(),
            bo_bounds: HyperBounds::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub kl_direction: KlDirection,
    pub histogram_bins: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
