//! End-to-end Bayesian calibration: build the model, choose the starting
//! point and mass, run the restart protocol, and realize per-driver
//! posterior parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::hmc::{posterior_params, restart_calibrate, HmcConfig, HmcError, PosteriorParams, RestartOutcome};
use crate::idm::IdmParams;
use crate::metrics::DriverParams;
use crate::model::{BayesModel, Formulation, ModelError, ModelSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BayesError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Hmc(#[from] HmcError),
    #[error("dataset has no instances")]
    EmptyData,
}

/// Where every run of the restart protocol starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Prior mean, nudged off the support boundary.
    PriorMean,
    /// Approximate posterior mode found from the prior mean.
    #[default]
    Mode,
}

/// How the per-dimension HMC mass is chosen when the sampler config does not
/// give one explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassStrategy {
    Identity,
    /// Diagonal Fisher information plus prior precision at the start point.
    #[default]
    Fisher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BayesConfig {
    pub formulation: Formulation,
    pub prior_sigma: f64,
    pub init: InitStrategy,
    pub mode_iterations: usize,
    pub mass: MassStrategy,
    pub hmc: HmcConfig,
}

impl Default for BayesConfig {
    fn default() -> Self {
        Self {
            formulation: Formulation::Hierarchical,
            prior_sigma: 10.0,
            init: InitStrategy::default(),
            mode_iterations: 500,
            mass: MassStrategy::default(),
            hmc: HmcConfig::default(),
        }
    }
}

/// Result of [`calibrate_bayes`].
#[derive(Debug, Clone)]
pub struct BayesCalibration {
    pub spec: ModelSpec,
    pub init: Vec<f64>,
    pub mass: Vec<f64>,
    pub outcome: RestartOutcome,
    pub posterior: PosteriorParams,
    /// Dataset driver ids, in model driver order.
    pub drivers: Vec<String>,
}

impl BayesCalibration {
    /// Posterior-mean parameters keyed by driver id.
    pub fn posterior_means(&self) -> DriverParams {
        DriverParams::PerDriver(
            self.drivers
                .iter()
                .cloned()
                .zip(self.posterior.means())
                .collect::<BTreeMap<String, IdmParams>>(),
        )
    }
}

/// Runs the restart protocol for one formulation and prior scale.
pub fn calibrate_bayes(data: &Dataset, config: &BayesConfig) -> Result<BayesCalibration, BayesError> {
    if data.is_empty() {
        return Err(BayesError::EmptyData);
    }
    let spec = ModelSpec::new(config.formulation, config.prior_sigma, data.n_drivers())?;
    let model = BayesModel::new(spec.clone(), data)?;
    let start = spec.interior_initial_state().theta;
    let init = match config.init {
        InitStrategy::PriorMean => start,
        InitStrategy::Mode => model.find_mode(&start, config.mode_iterations)?,
    };
    let mass = match (&config.hmc.mass, config.mass) {
        (Some(m), _) => m.clone(),
        (None, MassStrategy::Identity) => vec![1.0; init.len()],
        (None, MassStrategy::Fisher) => model.fisher_diagonal(&init)?,
    };
    let hmc = HmcConfig {
        mass: Some(mass.clone()),
        ..config.hmc.clone()
    };
    let outcome = restart_calibrate(&model, &init, &hmc)?;
    let posterior = posterior_params(&spec, &outcome.chain)?;
    Ok(BayesCalibration {
        spec,
        init,
        mass,
        outcome,
        posterior,
        drivers: data.drivers().to_vec(),
    })
}
