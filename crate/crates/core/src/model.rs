//! Probabilistic IDM: priors, likelihood and gradient for the pooled,
//! hierarchical and individual formulations.
//!
//! The latent vector that the sampler walks over is laid out as follows
//! (`k = 7`, `n = n_drivers`):
//!
//! | formulation  | layout                                                        |
//! |--------------|---------------------------------------------------------------|
//! | pooled       | `[theta (k)]`                                                 |
//! | individual   | `[theta_0 (k), ..., theta_{n-1} (k)]`                         |
//! | hierarchical | `[z_0 (k), ..., z_{n-1} (k), mu (k), sigma_raw (k)]`          |
//!
//! Hierarchical drivers are recomposed non-centrally as
//! `theta_d = mu + softplus(sigma_raw) * z_d` with `z_d ~ N(0, 1)`,
//! `mu ~ N(prior_mean, prior_sigma^2)` and `sigma_raw ~ N(0, prior_sigma^2)`.
//!
//! Each observed acceleration is modelled as
//! `N(idm(theta_driver, state_t), sigma_i^2)` where `sigma_i` is the sample
//! standard deviation of the instance's observed accelerations, floored at
//! [`SIGMA_FLOOR`]. Time steps are conditionally independent given `theta`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{instance_stats, Dataset};
use crate::dual::{Dual, Scalar};
use crate::hmc::Target;
use crate::idm::{requires_positive, validate_array, IdmKernel, IdmParams, N_PARAMS, PARAM_NAMES};

/// Lower bound on per-instance noise scales and fitted standard deviations
/// (m/s^2).
pub const SIGMA_FLOOR: f64 = 0.01;

const K: usize = N_PARAMS;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("prior sigma must be positive and finite, got {0}")]
    InvalidPriorSigma(f64),
    #[error("model needs at least one driver")]
    NoDrivers,
    #[error("dataset has {data} drivers but the model was built for {model}")]
    DriverMismatch { model: usize, data: usize },
    #[error("latent vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("log density is -inf at this state: {0}")]
    OutOfSupport(String),
    #[error("unknown formulation {0:?} (expected pooled, hierarchical or individual)")]
    UnknownFormulation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Pooled,
    Hierarchical,
    Individual,
}

impl Formulation {
    pub const ALL: [Formulation; 3] = [
        Formulation::Pooled,
        Formulation::Hierarchical,
        Formulation::Individual,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Formulation::Pooled => "pooled",
            Formulation::Hierarchical => "hierarchical",
            Formulation::Individual => "individual",
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Formulation {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pooled" => Ok(Formulation::Pooled),
            "hierarchical" => Ok(Formulation::Hierarchical),
            "individual" => Ok(Formulation::Individual),
            _ => Err(ModelError::UnknownFormulation(s.to_owned())),
        }
    }
}

/// Which formulation to fit and how strongly the priors pull.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub formulation: Formulation,
    pub prior_sigma: f64,
    pub prior_mean: IdmParams,
    pub n_drivers: usize,
}

impl ModelSpec {
    pub fn new(formulation: Formulation, prior_sigma: f64, n_drivers: usize) -> Result<Self, ModelError> {
        let spec = Self {
            formulation,
            prior_sigma,
            prior_mean: IdmParams::LITERATURE,
            n_drivers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.prior_sigma > 0.0 && self.prior_sigma.is_finite()) {
            return Err(ModelError::InvalidPriorSigma(self.prior_sigma));
        }
        if self.n_drivers == 0 {
            return Err(ModelError::NoDrivers);
        }
        Ok(())
    }

    pub fn layout(&self) -> LatentLayout {
        LatentLayout {
            formulation: self.formulation,
            n_drivers: self.n_drivers,
        }
    }

    pub fn dim(&self) -> usize {
        self.layout().dim()
    }

    /// Prior-mean initialization: literature values for every parameter-level
    /// entry, zero for the standardized and raw-scale entries.
    pub fn initial_state(&self) -> LatentState {
        let layout = self.layout();
        let mean = self.prior_mean.to_array();
        let theta = (0..layout.dim())
            .map(|i| match layout.slot(i) {
                Slot::Shared { param } | Slot::Driver { param, .. } | Slot::PopulationMean { param } => {
                    mean[param]
                }
                Slot::DriverNorm { .. } | Slot::PopulationScaleRaw { .. } => 0.0,
            })
            .collect();
        LatentState { theta, layout }
    }

    /// [`initial_state`](Self::initial_state) with nonnegative parameters
    /// whose prior mean lies closer than [`INTERIOR_MIN`] to zero raised to
    /// that value. The literature `s1 = 0` sits on the support boundary,
    /// where half of all sampler moves would leave the support.
    pub fn interior_initial_state(&self) -> LatentState {
        let mut state = self.initial_state();
        let layout = state.layout;
        for (i, x) in state.theta.iter_mut().enumerate() {
            if let Slot::Shared { param } | Slot::Driver { param, .. } | Slot::PopulationMean { param } =
                layout.slot(i)
            {
                if !requires_positive(param) && *x < INTERIOR_MIN {
                    *x = INTERIOR_MIN;
                }
            }
        }
        state
    }
}

/// Smallest starting value for nonnegative parameters; see
/// [`ModelSpec::interior_initial_state`].
pub const INTERIOR_MIN: f64 = 0.5;

/// Meaning of one latent coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    /// Pooled parameter shared by all drivers.
    Shared { param: usize },
    /// Individual driver parameter.
    Driver { driver: usize, param: usize },
    /// Hierarchical standardized driver variate.
    DriverNorm { driver: usize, param: usize },
    /// Hierarchical population mean.
    PopulationMean { param: usize },
    /// Hierarchical population scale before softplus.
    PopulationScaleRaw { param: usize },
}

/// Bijection between [`Slot`]s and positions in the latent vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatentLayout {
    pub formulation: Formulation,
    pub n_drivers: usize,
}

impl LatentLayout {
    pub fn dim(&self) -> usize {
        match self.formulation {
            Formulation::Pooled => K,
            Formulation::Individual => self.n_drivers * K,
            Formulation::Hierarchical => (self.n_drivers + 2) * K,
        }
    }

    pub fn index(&self, slot: Slot) -> Option<usize> {
        let n = self.n_drivers;
        match (self.formulation, slot) {
            (Formulation::Pooled, Slot::Shared { param }) if param < K => Some(param),
            (Formulation::Individual, Slot::Driver { driver, param }) if driver < n && param < K => {
                Some(driver * K + param)
            }
            (Formulation::Hierarchical, Slot::DriverNorm { driver, param }) if driver < n && param < K => {
                Some(driver * K + param)
            }
            (Formulation::Hierarchical, Slot::PopulationMean { param }) if param < K => Some(n * K + param),
            (Formulation::Hierarchical, Slot::PopulationScaleRaw { param }) if param < K => {
                Some((n + 1) * K + param)
            }
            _ => None,
        }
    }

    /// Panics if `index >= dim()`.
    pub fn slot(&self, index: usize) -> Slot {
        assert!(index < self.dim(), "latent index {index} out of range");
        let (block, param) = (index / K, index % K);
        match self.formulation {
            Formulation::Pooled => Slot::Shared { param },
            Formulation::Individual => Slot::Driver { driver: block, param },
            Formulation::Hierarchical if block < self.n_drivers => Slot::DriverNorm { driver: block, param },
            Formulation::Hierarchical if block == self.n_drivers => Slot::PopulationMean { param },
            Formulation::Hierarchical => Slot::PopulationScaleRaw { param },
        }
    }

    /// Human-readable coordinate name, e.g. `mu.v0` or `z[3].delta`.
    pub fn name(&self, index: usize) -> String {
        match self.slot(index) {
            Slot::Shared { param } => PARAM_NAMES[param].to_string(),
            Slot::Driver { driver, param } => format!("theta[{driver}].{}", PARAM_NAMES[param]),
            Slot::DriverNorm { driver, param } => format!("z[{driver}].{}", PARAM_NAMES[param]),
            Slot::PopulationMean { param } => format!("mu.{}", PARAM_NAMES[param]),
            Slot::PopulationScaleRaw { param } => format!("sigma_raw.{}", PARAM_NAMES[param]),
        }
    }
}

/// Flat latent vector with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub theta: Vec<f64>,
    pub layout: LatentLayout,
}

impl LatentState {
    pub fn new(theta: Vec<f64>, layout: LatentLayout) -> Result<Self, ModelError> {
        if theta.len() != layout.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: layout.dim(),
                found: theta.len(),
            });
        }
        Ok(Self { theta, layout })
    }

    pub fn get(&self, slot: Slot) -> Option<f64> {
        self.layout.index(slot).map(|i| self.theta[i])
    }
}

/// Log density value with an optional gradient of matching dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDensity {
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of [`softplus`].
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - HALF_LN_2PI
}

fn realize_array(spec: &ModelSpec, theta: &[f64], driver: usize) -> [f64; K] {
    let mut out = [0.0; K];
    match spec.formulation {
        Formulation::Pooled => out.copy_from_slice(&theta[..K]),
        Formulation::Individual => out.copy_from_slice(&theta[driver * K..(driver + 1) * K]),
        Formulation::Hierarchical => {
            let n = spec.n_drivers;
            let z = &theta[driver * K..(driver + 1) * K];
            let mu = &theta[n * K..(n + 1) * K];
            let raw = &theta[(n + 1) * K..(n + 2) * K];
            for j in 0..K {
                out[j] = mu[j] + softplus(raw[j]) * z[j];
            }
        }
    }
    out
}

/// IDM parameters of `driver` implied by the latent vector. The result is not
/// validated and may violate positivity.
///
/// Panics if `driver >= spec.n_drivers` or the vector has the wrong length.
pub fn realize_params(spec: &ModelSpec, state: &LatentState, driver: usize) -> IdmParams {
    assert!(driver < spec.n_drivers, "driver index {driver} out of range");
    assert_eq!(state.theta.len(), spec.dim(), "latent vector does not match model");
    IdmParams::from_array(realize_array(spec, &state.theta, driver))
}

/// Log prior density, optionally accumulating its gradient into `grad`.
fn log_prior_impl(spec: &ModelSpec, theta: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
    let sd = spec.prior_sigma;
    let var = sd * sd;
    let mean = spec.prior_mean.to_array();
    let layout = spec.layout();
    let mut total = 0.0;
    for (i, &x) in theta.iter().enumerate() {
        let center = match layout.slot(i) {
            Slot::Shared { param } | Slot::Driver { param, .. } | Slot::PopulationMean { param } => {
                (mean[param], sd)
            }
            Slot::PopulationScaleRaw { .. } => (0.0, sd),
            Slot::DriverNorm { .. } => (0.0, 1.0),
        };
        total += normal_logpdf(x, center.0, center.1);
        if let Some(g) = grad.as_deref_mut() {
            let v = if center.1 == 1.0 { 1.0 } else { var };
            g[i] -= (x - center.0) / v;
        }
    }
    total
}

/// Log prior density of `state` under `spec`.
pub fn log_prior(spec: &ModelSpec, state: &LatentState) -> f64 {
    assert_eq!(state.theta.len(), spec.dim(), "latent vector does not match model");
    log_prior_impl(spec, &state.theta, None)
}

/// A model bound to a dataset, with per-instance noise scales precomputed.
#[derive(Debug, Clone)]
pub struct BayesModel<'a> {
    spec: ModelSpec,
    data: &'a Dataset,
    noise_sd: Vec<f64>,
    by_driver: Vec<Vec<usize>>,
}

impl<'a> BayesModel<'a> {
    /// The dataset's drivers are mapped to model driver indices in order; the
    /// dataset may have fewer drivers than the model (e.g. none at all).
    pub fn new(spec: ModelSpec, data: &'a Dataset) -> Result<Self, ModelError> {
        spec.validate()?;
        if data.n_drivers() > spec.n_drivers {
            return Err(ModelError::DriverMismatch {
                model: spec.n_drivers,
                data: data.n_drivers(),
            });
        }
        let noise_sd = data
            .instances()
            .iter()
            .map(|inst| instance_stats(inst).std_a.max(SIGMA_FLOOR))
            .collect();
        let mut by_driver = data.instances_by_driver();
        by_driver.resize(spec.n_drivers, Vec::new());
        Ok(Self {
            spec,
            data,
            noise_sd,
            by_driver,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    /// Observation noise scale assigned to each instance.
    pub fn noise_sd(&self) -> &[f64] {
        &self.noise_sd
    }

    fn check_dim(&self, theta: &[f64]) -> Result<(), ModelError> {
        if theta.len() != self.spec.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.spec.dim(),
                found: theta.len(),
            });
        }
        Ok(())
    }

    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        log_prior_impl(&self.spec, theta, None)
    }

    fn instance_loglik(&self, kernel: &IdmKernel<f64>, i: usize) -> f64 {
        let inst = &self.data.instances()[i];
        let sd = self.noise_sd[i];
        let mut ss = 0.0;
        for t in 0..inst.len() {
            let r = inst.a_obs[t] - kernel.accel(inst.v[t], inst.dv[t], inst.s[t]);
            ss += r * r;
        }
        -0.5 * ss / (sd * sd) - inst.len() as f64 * (sd.ln() + HALF_LN_2PI)
    }

    /// Log likelihood; `-inf` when any driver's realized parameters are invalid.
    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let mut total = 0.0;
        for (d, instances) in self.by_driver.iter().enumerate() {
            if instances.is_empty() {
                continue;
            }
            let p = realize_array(&self.spec, theta, d);
            if validate_array(&p).is_err() {
                return f64::NEG_INFINITY;
            }
            let kernel = IdmKernel::new(&p);
            for &i in instances {
                total += self.instance_loglik(&kernel, i);
            }
        }
        if total.is_nan() {
            f64::NEG_INFINITY
        } else {
            total
        }
    }

    pub fn log_joint(&self, theta: &[f64]) -> f64 {
        let ll = self.log_likelihood(theta);
        if ll == f64::NEG_INFINITY {
            return ll;
        }
        self.log_prior(theta) + ll
    }

    /// Log likelihood of one driver's instances and its gradient with respect
    /// to the driver's realized parameters, by forward-mode differentiation.
    fn driver_loglik_grad(&self, p: &[f64; K], instances: &[usize]) -> (f64, [f64; K]) {
        let kernel = IdmKernel::new(&Dual::<K>::variables(*p));
        let mut value = 0.0;
        let mut grad = [0.0; K];
        for &i in instances {
            let inst = &self.data.instances()[i];
            let sd = self.noise_sd[i];
            let prec = 1.0 / (sd * sd);
            let mut ss = 0.0;
            for t in 0..inst.len() {
                let pred = kernel.accel(inst.v[t], inst.dv[t], inst.s[t]);
                let r = inst.a_obs[t] - pred.value();
                ss += r * r;
                let w = r * prec;
                for (g, e) in grad.iter_mut().zip(pred.eps) {
                    *g += w * e;
                }
            }
            value += -0.5 * ss * prec - inst.len() as f64 * (sd.ln() + HALF_LN_2PI);
        }
        (value, grad)
    }

    /// Log joint and its gradient written into `grad`. Errors when the state
    /// has zero density.
    pub fn log_joint_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64, ModelError> {
        self.joint_impl(theta, grad, 0.0)
    }

    /// Log joint plus `barrier * sum(ln p)` over every realized parameter of
    /// every driver with data.
    fn joint_impl(&self, theta: &[f64], grad: &mut [f64], barrier: f64) -> Result<f64, ModelError> {
        self.check_dim(theta)?;
        assert_eq!(grad.len(), theta.len(), "gradient buffer has wrong length");
        grad.fill(0.0);
        let n = self.spec.n_drivers;
        let mut total = 0.0;
        for (d, instances) in self.by_driver.iter().enumerate() {
            if instances.is_empty() {
                continue;
            }
            let p = realize_array(&self.spec, theta, d);
            if let Err(e) = validate_array(&p) {
                return Err(ModelError::OutOfSupport(format!("driver {d}: {e}")));
            }
            let (ll, mut g) = self.driver_loglik_grad(&p, instances);
            total += ll;
            if barrier > 0.0 {
                for j in 0..K {
                    total += barrier * p[j].ln();
                    g[j] += barrier / p[j];
                }
            }
            match self.spec.formulation {
                Formulation::Pooled => {
                    for j in 0..K {
                        grad[j] += g[j];
                    }
                }
                Formulation::Individual => {
                    for j in 0..K {
                        grad[d * K + j] += g[j];
                    }
                }
                Formulation::Hierarchical => {
                    for j in 0..K {
                        let raw = theta[(n + 1) * K + j];
                        let z = theta[d * K + j];
                        grad[d * K + j] += g[j] * softplus(raw);
                        grad[n * K + j] += g[j];
                        grad[(n + 1) * K + j] += g[j] * z * sigmoid(raw);
                    }
                }
            }
        }
        if !total.is_finite() {
            return Err(ModelError::OutOfSupport("non-finite likelihood".into()));
        }
        total += log_prior_impl(&self.spec, theta, Some(grad));
        Ok(total)
    }

    /// Approximate posterior mode by Fisher-preconditioned gradient ascent
    /// from `init`, with backtracking. A weak log barrier on the realized
    /// parameters keeps the result strictly inside the support, so a sampler
    /// started there can move in every direction.
    pub fn find_mode(&self, init: &[f64], max_iter: usize) -> Result<Vec<f64>, ModelError> {
        const BARRIER: f64 = 1.0;
        let mut x = init.to_vec();
        let mut grad = vec![0.0; x.len()];
        let mut value = self.joint_impl(&x, &mut grad, BARRIER)?;
        let mut cand = vec![0.0; x.len()];
        let mut cand_grad = vec![0.0; x.len()];
        let mut alpha: f64 = 1.0;
        for _ in 0..max_iter {
            let fisher = self.fisher_diagonal(&x)?;
            let mut improved = false;
            while alpha > 1e-10 {
                for i in 0..x.len() {
                    cand[i] = x[i] + alpha * grad[i] / fisher[i];
                }
                match self.joint_impl(&cand, &mut cand_grad, BARRIER) {
                    Ok(v) if v > value => {
                        improved = v - value > 1e-9 * value.abs().max(1.0);
                        std::mem::swap(&mut x, &mut cand);
                        std::mem::swap(&mut grad, &mut cand_grad);
                        value = v;
                        alpha = (alpha * 2.0).min(1.0);
                        break;
                    }
                    _ => alpha *= 0.5,
                }
            }
            if !improved {
                break;
            }
        }
        Ok(x)
    }

    /// Diagonal of the Gauss-Newton approximation to the negative Hessian of
    /// the log joint at `theta`: expected Fisher information of the
    /// likelihood plus prior precision. Hierarchical scale entries use
    /// `E[z^2] = 1` in place of the current standardized variates. The
    /// entries are natural per-dimension HMC masses.
    pub fn fisher_diagonal(&self, theta: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(theta)?;
        let n = self.spec.n_drivers;
        let prior_prec = 1.0 / (self.spec.prior_sigma * self.spec.prior_sigma);
        let layout = self.spec.layout();
        let mut diag: Vec<f64> = (0..theta.len())
            .map(|i| match layout.slot(i) {
                Slot::DriverNorm { .. } => 1.0,
                _ => prior_prec,
            })
            .collect();
        for (d, instances) in self.by_driver.iter().enumerate() {
            if instances.is_empty() {
                continue;
            }
            let p = realize_array(&self.spec, theta, d);
            if let Err(e) = validate_array(&p) {
                return Err(ModelError::OutOfSupport(format!("driver {d}: {e}")));
            }
            let kernel = IdmKernel::new(&Dual::<K>::variables(p));
            let mut info = [0.0; K];
            for &i in instances {
                let inst = &self.data.instances()[i];
                let prec = 1.0 / (self.noise_sd[i] * self.noise_sd[i]);
                for t in 0..inst.len() {
                    let pred = kernel.accel(inst.v[t], inst.dv[t], inst.s[t]);
                    for (f, e) in info.iter_mut().zip(pred.eps) {
                        *f += e * e * prec;
                    }
                }
            }
            for j in 0..K {
                match self.spec.formulation {
                    Formulation::Pooled => diag[j] += info[j],
                    Formulation::Individual => diag[d * K + j] += info[j],
                    Formulation::Hierarchical => {
                        let raw = theta[(n + 1) * K + j];
                        let scale = softplus(raw);
                        diag[d * K + j] += info[j] * scale * scale;
                        diag[n * K + j] += info[j];
                        // Averaged over the standard-normal prior of z, which
                        // keeps the scale mass away from zero at z = 0.
                        diag[(n + 1) * K + j] += info[j] * sigmoid(raw).powi(2);
                    }
                }
            }
        }
        Ok(diag)
    }

    pub fn grad_log_joint(&self, theta: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut grad = vec![0.0; theta.len()];
        self.log_joint_and_gradient(theta, &mut grad)?;
        Ok(grad)
    }

    pub fn evaluate(&self, theta: &[f64], with_gradient: bool) -> LogDensity {
        if with_gradient {
            let mut grad = vec![0.0; theta.len()];
            match self.log_joint_and_gradient(theta, &mut grad) {
                Ok(value) => LogDensity {
                    value,
                    gradient: Some(grad),
                },
                Err(_) => LogDensity {
                    value: f64::NEG_INFINITY,
                    gradient: None,
                },
            }
        } else {
            LogDensity {
                value: self.log_joint(theta),
                gradient: None,
            }
        }
    }

    /// Realized parameters for every driver.
    pub fn realize_all(&self, theta: &[f64]) -> Vec<IdmParams> {
        (0..self.spec.n_drivers)
            .map(|d| IdmParams::from_array(realize_array(&self.spec, theta, d)))
            .collect()
    }
}

impl Target for BayesModel<'_> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_joint(x)
    }

    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.log_joint_and_gradient(x, grad).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Log likelihood of `data` at `state`.
pub fn log_likelihood(spec: &ModelSpec, state: &LatentState, data: &Dataset) -> Result<f64, ModelError> {
    let model = BayesModel::new(spec.clone(), data)?;
    model.check_dim(&state.theta)?;
    Ok(model.log_likelihood(&state.theta))
}

/// Log prior plus log likelihood.
pub fn log_joint(spec: &ModelSpec, state: &LatentState, data: &Dataset) -> Result<f64, ModelError> {
    let model = BayesModel::new(spec.clone(), data)?;
    model.check_dim(&state.theta)?;
    Ok(model.log_joint(&state.theta))
}

/// Gradient of the log joint with respect to every latent coordinate.
pub fn grad_log_joint(spec: &ModelSpec, state: &LatentState, data: &Dataset) -> Result<Vec<f64>, ModelError> {
    BayesModel::new(spec.clone(), data)?.grad_log_joint(&state.theta)
}

/// `-(k/2) ln(2 pi)`, the standardized-normal log density at its mode in
/// `k` dimensions.
pub fn standard_normal_mode_logpdf(k: usize) -> f64 {
    -(k as f64) * 0.5 * (2.0 * PI).ln()
}
