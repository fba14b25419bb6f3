//! Hamiltonian Monte Carlo with a diagonal mass matrix, plus the incremental
//! restart protocol used to decide how long a calibration chain must be.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::idm::{IdmParams, N_PARAMS};
use crate::model::{realize_params, LatentState, ModelSpec};
use crate::rng::{stream, stream_rng, Rng};

/// An unnormalized log density the sampler can explore.
pub trait Target {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    /// Log density with its gradient written into `grad`. Returns `-inf`
    /// (leaving `grad` unspecified) where the density is zero.
    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HmcError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("initial state has zero density")]
    InitOutOfSupport,
    #[error("gradient undefined at leapfrog step {step}")]
    UndefinedGradient { step: usize },
    #[error("state has dimension {found}, target expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("chain is empty")]
    EmptyChain,
}

/// Sampler settings. `max_total_steps` caps the length of any single run in
/// the restart schedule; steps are HMC iterations, not leapfrog steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmcConfig {
    pub step_size: f64,
    pub n_leapfrog: usize,
    pub base_run_steps: usize,
    pub max_total_steps: usize,
    pub convergence_tol: f64,
    pub seed: u64,
    /// Per-dimension mass; `None` means identity.
    pub mass: Option<Vec<f64>>,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            n_leapfrog: 20,
            base_run_steps: 1500,
            max_total_steps: 9000,
            convergence_tol: 1e-2,
            seed: 0,
            mass: None,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self, dim: usize) -> Result<(), HmcError> {
        let bad = |m: String| Err(HmcError::InvalidConfig(m));
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad(format!("step_size must be positive, got {}", self.step_size));
        }
        if self.n_leapfrog == 0 {
            return bad("n_leapfrog must be at least 1".into());
        }
        if self.base_run_steps == 0 {
            return bad("base_run_steps must be at least 1".into());
        }
        if self.max_total_steps < self.base_run_steps {
            return bad(format!(
                "max_total_steps ({}) must be >= base_run_steps ({})",
                self.max_total_steps, self.base_run_steps
            ));
        }
        if !(self.convergence_tol > 0.0) {
            return bad(format!("convergence_tol must be positive, got {}", self.convergence_tol));
        }
        if let Some(mass) = &self.mass {
            if mass.len() != dim {
                return bad(format!("mass has {} entries, target has dimension {dim}", mass.len()));
            }
            if mass.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
                return bad("mass entries must be positive".into());
            }
        }
        Ok(())
    }

    fn inv_mass(&self, dim: usize) -> Vec<f64> {
        match &self.mass {
            Some(m) => m.iter().map(|m| 1.0 / m).collect(),
            None => vec![1.0; dim],
        }
    }
}

/// Position with its cached log density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct HmcState {
    pub position: Vec<f64>,
    pub log_density: f64,
    pub gradient: Vec<f64>,
}

impl HmcState {
    pub fn new<T: Target + ?Sized>(target: &T, position: Vec<f64>) -> Result<Self, HmcError> {
        if position.len() != target.dim() {
            return Err(HmcError::DimensionMismatch {
                expected: target.dim(),
                found: position.len(),
            });
        }
        let mut gradient = vec![0.0; position.len()];
        let log_density = target.log_density_and_gradient(&position, &mut gradient);
        if !log_density.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
            return Err(HmcError::InitOutOfSupport);
        }
        Ok(Self {
            position,
            log_density,
            gradient,
        })
    }
}

/// `n_steps` leapfrog steps from `(q, p)`, where `log_grad` returns the log
/// density at its first argument and writes the gradient into the second.
/// `grad_q` must hold the gradient at `q` on entry and holds the gradient at
/// the final position on success. Returns the final log density.
fn integrate<G>(
    q: &mut [f64],
    p: &mut [f64],
    grad_q: &mut [f64],
    log_grad: &mut G,
    step_size: f64,
    n_steps: usize,
    inv_mass: &[f64],
) -> Result<f64, HmcError>
where
    G: FnMut(&[f64], &mut [f64]) -> f64,
{
    let half = 0.5 * step_size;
    let mut logp = f64::NAN;
    for step in 0..n_steps {
        for i in 0..q.len() {
            p[i] += half * grad_q[i];
            q[i] += step_size * inv_mass[i] * p[i];
        }
        logp = log_grad(q, grad_q);
        if !logp.is_finite() || grad_q.iter().any(|g| !g.is_finite()) {
            return Err(HmcError::UndefinedGradient { step });
        }
        for i in 0..p.len() {
            p[i] += half * grad_q[i];
        }
    }
    Ok(logp)
}

/// Leapfrog integration: half kick, drift, half kick, `n_steps` times.
///
/// `log_grad(x, grad)` must return the log density at `x` and write its
/// gradient. `inv_mass` of `None` means identity mass.
pub fn leapfrog<G>(
    state: &[f64],
    momentum: &[f64],
    mut log_grad: G,
    step_size: f64,
    n_steps: usize,
    inv_mass: Option<&[f64]>,
) -> Result<(Vec<f64>, Vec<f64>), HmcError>
where
    G: FnMut(&[f64], &mut [f64]) -> f64,
{
    let dim = state.len();
    let ones;
    let inv_mass = match inv_mass {
        Some(m) => m,
        None => {
            ones = vec![1.0; dim];
            &ones
        }
    };
    let mut q = state.to_vec();
    let mut p = momentum.to_vec();
    let mut grad = vec![0.0; dim];
    let logp = log_grad(&q, &mut grad);
    if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(HmcError::UndefinedGradient { step: 0 });
    }
    integrate(&mut q, &mut p, &mut grad, &mut log_grad, step_size, n_steps, inv_mass)?;
    Ok((q, p))
}

fn kinetic(p: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_mass).map(|(p, m)| p * p * m).sum::<f64>()
}

fn hmc_step_inner<T: Target + ?Sized>(
    rng: &mut Rng,
    target: &T,
    current: &HmcState,
    step_size: f64,
    n_leapfrog: usize,
    inv_mass: &[f64],
) -> (HmcState, bool) {
    let dim = current.position.len();
    let mut p: Vec<f64> = inv_mass
        .iter()
        .map(|m| {
            let z: f64 = StandardNormal.sample(rng);
            z / m.sqrt()
        })
        .collect();
    let h0 = -current.log_density + kinetic(&p, inv_mass);
    let mut q = current.position.clone();
    let mut grad = current.gradient.clone();
    let mut log_grad = |x: &[f64], g: &mut [f64]| target.log_density_and_gradient(x, g);
    let proposal = integrate(&mut q, &mut p, &mut grad, &mut log_grad, step_size, n_leapfrog, inv_mass);
    // The uniform draw is taken unconditionally so the random stream does not
    // depend on whether the proposal diverged.
    let u: f64 = rng.random();
    match proposal {
        Ok(logp) => {
            let h1 = -logp + kinetic(&p, inv_mass);
            let log_accept = h0 - h1;
            if log_accept.is_finite() && u.ln() < log_accept {
                return (
                    HmcState {
                        position: q,
                        log_density: logp,
                        gradient: grad,
                    },
                    true,
                );
            }
            debug_assert_eq!(q.len(), dim);
            (current.clone(), false)
        }
        Err(_) => (current.clone(), false),
    }
}

/// One HMC transition: fresh Gaussian momentum, leapfrog proposal, Metropolis
/// correction. Rejected or diverged proposals return `current` unchanged.
pub fn hmc_step<T: Target + ?Sized>(
    rng: &mut Rng,
    target: &T,
    current: &HmcState,
    config: &HmcConfig,
) -> (HmcState, bool) {
    let inv_mass = config.inv_mass(current.position.len());
    hmc_step_inner(rng, target, current, config.step_size, config.n_leapfrog, &inv_mass)
}

/// Ordered samples of one run. Index 0 is the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub samples: Vec<Vec<f64>>,
    pub log_joints: Vec<f64>,
    pub accepted: Vec<bool>,
    pub config: HmcConfig,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Fraction of accepted transitions, excluding the initial entry.
    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.len() <= 1 {
            return f64::NAN;
        }
        let n = self.accepted.len() - 1;
        self.accepted[1..].iter().filter(|&&a| a).count() as f64 / n as f64
    }

    /// Copy without the first `n` entries.
    pub fn skip(&self, n: usize) -> Chain {
        let n = n.min(self.len());
        Chain {
            samples: self.samples[n..].to_vec(),
            log_joints: self.log_joints[n..].to_vec(),
            accepted: self.accepted[n..].to_vec(),
            config: self.config.clone(),
        }
    }

    /// Mean log joint over the last `fraction` of the chain (at least one
    /// sample).
    pub fn tail_mean_log_joint(&self, fraction: f64) -> f64 {
        let n = self.log_joints.len();
        let k = ((n as f64 * fraction).round() as usize).clamp(1, n.max(1));
        self.log_joints[n - k..].iter().sum::<f64>() / k as f64
    }

    /// Per-coordinate sample means.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for s in &self.samples {
            for (a, b) in m.iter_mut().zip(s) {
                *a += b;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|x| *x /= n);
        m
    }

    /// Values of coordinate `i` across the chain.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[i]).collect()
    }
}

/// Runs `n_steps` transitions from `init` using stream `run_index` of the
/// configured seed.
pub fn run_chain_indexed<T: Target + ?Sized>(
    target: &T,
    init: &[f64],
    n_steps: usize,
    config: &HmcConfig,
    run_index: u64,
) -> Result<Chain, HmcError> {
    config.validate(target.dim())?;
    let mut state = HmcState::new(target, init.to_vec())?;
    let inv_mass = config.inv_mass(init.len());
    let mut rng = stream_rng(config.seed, stream::HMC_RUN, run_index);
    let mut chain = Chain {
        samples: Vec::with_capacity(n_steps + 1),
        log_joints: Vec::with_capacity(n_steps + 1),
        accepted: Vec::with_capacity(n_steps + 1),
        config: config.clone(),
    };
    chain.samples.push(state.position.clone());
    chain.log_joints.push(state.log_density);
    chain.accepted.push(true);
    for _ in 0..n_steps {
        let (next, accepted) =
            hmc_step_inner(&mut rng, target, &state, config.step_size, config.n_leapfrog, &inv_mass);
        state = next;
        chain.samples.push(state.position.clone());
        chain.log_joints.push(state.log_density);
        chain.accepted.push(accepted);
    }
    Ok(chain)
}

/// Runs `n_steps` transitions from `init`; deterministic in `config.seed`.
pub fn run_chain<T: Target + ?Sized>(
    target: &T,
    init: &[f64],
    n_steps: usize,
    config: &HmcConfig,
) -> Result<Chain, HmcError> {
    run_chain_indexed(target, init, n_steps, config, 0)
}

/// Fraction of each run whose mean log joint is compared between runs.
pub const TAIL_FRACTION: f64 = 0.2;

/// Outcome of [`restart_calibrate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    /// Second half of the final run.
    pub chain: Chain,
    /// Length of every run performed, in order.
    pub schedule_log: Vec<usize>,
    /// Mean log joint over the final 20% of each run.
    pub tail_means: Vec<f64>,
    pub converged: bool,
}

/// Run lengths `base, 2 base, 3 base, ...` not exceeding `max_total_steps`.
pub fn restart_schedule(config: &HmcConfig) -> Vec<usize> {
    (1..)
        .map(|k| k * config.base_run_steps)
        .take_while(|&n| n <= config.max_total_steps)
        .collect()
}

/// Runs fresh chains of increasing length from the same initial state until
/// the mean tail log joint of two consecutive runs differs by less than
/// `convergence_tol` (relative), or the schedule is exhausted. Runs that
/// rejected every proposal never count as converged.
pub fn restart_calibrate<T: Target + ?Sized>(
    target: &T,
    init: &[f64],
    config: &HmcConfig,
) -> Result<RestartOutcome, HmcError> {
    config.validate(target.dim())?;
    let mut schedule_log = Vec::new();
    let mut tail_means: Vec<f64> = Vec::new();
    let mut last: Option<Chain> = None;
    let mut converged = false;
    let mut prev_moved = false;
    for (k, n_steps) in restart_schedule(config).into_iter().enumerate() {
        let chain = run_chain_indexed(target, init, n_steps, config, k as u64)?;
        let mean = chain.tail_mean_log_joint(TAIL_FRACTION);
        // A run that never accepted has a constant log joint and would pass
        // the comparison trivially.
        let moved = n_steps == 0 || chain.accepted[1..].iter().any(|&a| a);
        schedule_log.push(n_steps);
        if let Some(&prev) = tail_means.last() {
            let rel = (mean - prev).abs() / prev.abs();
            if rel < config.convergence_tol && moved && prev_moved {
                converged = true;
            }
        }
        prev_moved = moved;
        tail_means.push(mean);
        last = Some(chain);
        if converged {
            break;
        }
    }
    let chain = last.expect("schedule has at least one run");
    let burn_in = chain.len() / 2;
    Ok(RestartOutcome {
        chain: chain.skip(burn_in),
        schedule_log,
        tail_means,
        converged,
    })
}

/// Posterior samples of realized IDM parameters, indexed `[driver][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorParams {
    pub samples: Vec<Vec<IdmParams>>,
}

impl PosteriorParams {
    pub fn n_drivers(&self) -> usize {
        self.samples.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Samples of parameter `param` (vector order) for `driver`.
    pub fn param_samples(&self, driver: usize, param: usize) -> Vec<f64> {
        self.samples[driver].iter().map(|p| p.to_array()[param]).collect()
    }

    /// Per-driver posterior means.
    pub fn means(&self) -> Vec<IdmParams> {
        self.samples
            .iter()
            .map(|draws| {
                let mut acc = [0.0; N_PARAMS];
                for p in draws {
                    for (a, x) in acc.iter_mut().zip(p.to_array()) {
                        *a += x;
                    }
                }
                let n = draws.len() as f64;
                IdmParams::from_array(acc.map(|a| a / n))
            })
            .collect()
    }

    /// Per-driver posterior standard deviations (n - 1 denominator).
    pub fn std_devs(&self) -> Vec<[f64; N_PARAMS]> {
        (0..self.n_drivers())
            .map(|d| {
                let mut out = [0.0; N_PARAMS];
                for (j, o) in out.iter_mut().enumerate() {
                    *o = crate::data::mean_std(&self.param_samples(d, j)).1;
                }
                out
            })
            .collect()
    }
}

/// Maps every chain entry through [`realize_params`] for every driver.
pub fn posterior_params(spec: &ModelSpec, chain: &Chain) -> Result<PosteriorParams, HmcError> {
    if chain.is_empty() {
        return Err(HmcError::EmptyChain);
    }
    let layout = spec.layout();
    let states: Vec<LatentState> = chain
        .samples
        .iter()
        .map(|s| LatentState {
            theta: s.clone(),
            layout,
        })
        .collect();
    let samples = (0..spec.n_drivers)
        .map(|d| states.iter().map(|st| realize_params(spec, st, d)).collect())
        .collect();
    Ok(PosteriorParams { samples })
}
