//! Calibration of the Intelligent Driver Model from car-following data.
//!
//! Two calibrators are provided: Hamiltonian Monte Carlo over pooled,
//! hierarchical and individual probabilistic formulations ([`model`],
//! [`hmc`]), and a regularized differential-evolution search with grid and
//! Bayesian-optimization hyperparameter tuning ([`de`], [`bayesopt`]).
//! [`metrics`] and [`report`] score and summarize the results.

pub mod bayes;
pub mod bayesopt;
pub mod data;
pub mod de;
pub mod dual;
pub mod hmc;
pub mod idm;
pub mod metrics;
pub mod model;
pub mod report;
pub mod rng;

pub use bayes::{calibrate_bayes, BayesCalibration, BayesConfig};
pub use bayesopt::{bayes_opt_tune, BoConfig};
pub use data::{CfInstance, Dataset, InstanceStats};
pub use de::{grid_search, run_de, DeCalibration, DeConfig, GridRanges, TuningResult};
pub use hmc::{Chain, HmcConfig, RestartOutcome};
pub use idm::{IdmParams, KinematicState, N_PARAMS, PARAM_NAMES};
pub use metrics::{avg_kl, dataset_rmse, DriverParams, KlDirection};
pub use model::{BayesModel, Formulation, ModelSpec};
pub use report::{CalibrationReport, Method};
