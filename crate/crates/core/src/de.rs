//! Differential evolution (rand/1/bin with bound clipping and greedy
//! selection), the regularized calibration fitness, and grid search over the
//! DE hyperparameters.

use std::io::Write;

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::idm::{predict_instance, requires_positive, IdmParams, N_PARAMS, PARAM_NAMES};
use crate::metrics::rmse;
use crate::rng::{stream, stream_rng, Rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeError {
    #[error("invalid DE configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid range {name}: {reason}")]
    InvalidRange { name: &'static str, reason: String },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("dataset has no instances")]
    EmptyData,
    #[error("failed to write table: {0}")]
    Io(String),
}

/// Default search box for IDM parameters, in vector order.
pub const DEFAULT_BOUNDS: [[f64; 2]; N_PARAMS] = [
    [0.5, 40.0],
    [0.0, 5.0],
    [0.05, 6.0],
    [0.05, 10.0],
    [0.5, 10.0],
    [0.0, 10.0],
    [0.0, 5.0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeConfig {
    pub differential_weight: f64,
    pub crossover_prob: f64,
    pub lambda: f64,
    pub population_size: usize,
    pub n_generations: usize,
    pub bounds: Vec<[f64; 2]>,
    pub seed: u64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            differential_weight: 0.5,
            crossover_prob: 0.7,
            lambda: 0.0,
            population_size: 28,
            n_generations: 300,
            bounds: DEFAULT_BOUNDS.to_vec(),
            seed: 0,
        }
    }
}

impl DeConfig {
    /// Checks the settings for a generic search space.
    pub fn validate(&self) -> Result<(), DeError> {
        let bad = |m: String| Err(DeError::InvalidConfig(m));
        if self.population_size < 4 {
            return bad(format!("population_size must be at least 4, got {}", self.population_size));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad(format!("crossover_prob must lie in [0, 1], got {}", self.crossover_prob));
        }
        if !(self.differential_weight >= 0.0 && self.differential_weight.is_finite()) {
            return bad(format!(
                "differential_weight must be finite and >= 0, got {}",
                self.differential_weight
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if self.bounds.is_empty() {
            return bad("bounds are empty".into());
        }
        for (j, [lo, hi]) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("bounds[{j}]: need finite lo < hi, got [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus checks that the box lies inside the
    /// IDM parameter domain.
    pub fn validate_idm(&self) -> Result<(), DeError> {
        self.validate()?;
        if self.bounds.len() != N_PARAMS {
            return Err(DeError::InvalidConfig(format!(
                "expected {N_PARAMS} bounds, got {}",
                self.bounds.len()
            )));
        }
        for (j, [lo, _]) in self.bounds.iter().enumerate() {
            let ok = if requires_positive(j) { *lo > 0.0 } else { *lo >= 0.0 };
            if !ok {
                return Err(DeError::InvalidConfig(format!(
                    "lower bound of {} must be {}, got {lo}",
                    PARAM_NAMES[j],
                    if requires_positive(j) { "> 0" } else { ">= 0" }
                )));
            }
        }
        Ok(())
    }
}

/// A population member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub params: Vec<f64>,
    pub fitness: f64,
}

/// Mean over instances of the per-instance RMSE; `+inf` for invalid params.
pub fn average_rmse(params: &IdmParams, data: &Dataset) -> f64 {
    if !params.is_valid() || data.is_empty() {
        return f64::INFINITY;
    }
    let mut total = 0.0;
    for inst in data.instances() {
        let pred = match predict_instance(params, inst) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        total += rmse(&pred, &inst.a_obs).unwrap_or(f64::INFINITY);
    }
    let avg = total / data.n_instances() as f64;
    if avg.is_nan() {
        f64::INFINITY
    } else {
        avg
    }
}

/// Euclidean distance to the literature values.
pub fn literature_distance(params: &[f64]) -> f64 {
    params
        .iter()
        .zip(IdmParams::LITERATURE.to_array())
        .map(|(p, l)| (p - l) * (p - l))
        .sum::<f64>()
        .sqrt()
}

/// Regularized calibration fitness (lower is better).
pub fn fitness(params: &[f64], data: &Dataset, lambda: f64) -> f64 {
    if params.len() != N_PARAMS {
        return f64::INFINITY;
    }
    average_rmse(&IdmParams::from_slice(params), data) + lambda * literature_distance(params)
}

fn clip(x: f64, [lo, hi]: [f64; 2]) -> f64 {
    x.clamp(lo, hi)
}

/// Uniform initial population within the bounds.
pub fn initial_population<F>(rng: &mut Rng, config: &DeConfig, objective: &F) -> Vec<Candidate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let points: Vec<Vec<f64>> = (0..config.population_size)
        .map(|_| config.bounds.iter().map(|&[lo, hi]| rng.random_range(lo..=hi)).collect())
        .collect();
    evaluate_all(points, objective)
}

fn evaluate_all<F>(points: Vec<Vec<f64>>, objective: &F) -> Vec<Candidate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    points
        .into_par_iter()
        .map(|params| {
            let f = objective(&params);
            Candidate {
                fitness: if f.is_nan() { f64::INFINITY } else { f },
                params,
            }
        })
        .collect()
}

/// One rand/1/bin generation. Trials are drawn sequentially from `rng`,
/// evaluated (possibly in parallel), and each replaces its target when at
/// least as fit.
pub fn de_generation<F>(rng: &mut Rng, population: &[Candidate], config: &DeConfig, objective: &F) -> Vec<Candidate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let np = population.len();
    let dim = config.bounds.len();
    let trials: Vec<Vec<f64>> = (0..np)
        .map(|i| {
            // Three distinct indices from the np - 1 members other than i.
            let picks = sample(rng, np - 1, 3);
            let r: Vec<usize> = picks.iter().map(|k| if k >= i { k + 1 } else { k }).collect();
            let (a, b, c) = (&population[r[0]].params, &population[r[1]].params, &population[r[2]].params);
            let forced = rng.random_range(0..dim);
            (0..dim)
                .map(|j| {
                    let take_mutant = j == forced || rng.random::<f64>() < config.crossover_prob;
                    let x = if take_mutant {
                        a[j] + config.differential_weight * (b[j] - c[j])
                    } else {
                        population[i].params[j]
                    };
                    clip(x, config.bounds[j])
                })
                .collect()
        })
        .collect();
    evaluate_all(trials, objective)
        .into_iter()
        .zip(population)
        .map(|(trial, target)| {
            if trial.fitness <= target.fitness {
                trial
            } else {
                target.clone()
            }
        })
        .collect()
}

fn best_of(population: &[Candidate]) -> &Candidate {
    population
        .iter()
        .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
        .expect("population is non-empty")
}

/// Result of a DE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeRun {
    pub best: Candidate,
    /// Best fitness after initialization and after every generation.
    pub history: Vec<f64>,
    pub population: Vec<Candidate>,
}

/// Minimizes `objective` over the configured box.
pub fn minimize<F>(config: &DeConfig, objective: F) -> Result<DeRun, DeError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let mut rng = stream_rng(config.seed, stream::DE, 0);
    let mut population = initial_population(&mut rng, config, &objective);
    let mut history = Vec::with_capacity(config.n_generations + 1);
    history.push(best_of(&population).fitness);
    for _ in 0..config.n_generations {
        population = de_generation(&mut rng, &population, config, &objective);
        history.push(best_of(&population).fitness);
    }
    Ok(DeRun {
        best: best_of(&population).clone(),
        history,
        population,
    })
}

/// A DE calibration of IDM parameters with its unregularized scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeCalibration {
    pub run: DeRun,
    pub best_params: IdmParams,
    /// Average RMSE of the best candidate, without the penalty.
    pub best_rmse: f64,
    /// Mean over the final population of each member's average RMSE.
    pub population_mean_rmse: f64,
}

/// Calibrates one IDM parameter set against every instance in `data`.
pub fn run_de(config: &DeConfig, data: &Dataset) -> Result<DeCalibration, DeError> {
    config.validate_idm()?;
    if data.is_empty() {
        return Err(DeError::EmptyData);
    }
    let lambda = config.lambda;
    let run = minimize(config, |p| fitness(p, data, lambda))?;
    let best_params = IdmParams::from_slice(&run.best.params);
    let best_rmse = average_rmse(&best_params, data);
    let population_mean_rmse = run
        .population
        .iter()
        .map(|c| average_rmse(&IdmParams::from_slice(&c.params), data))
        .sum::<f64>()
        / run.population.len() as f64;
    Ok(DeCalibration {
        run,
        best_params,
        best_rmse,
        population_mean_rmse,
    })
}

/// Inclusive arithmetic range `lo, lo + step, ...` up to `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64, step: f64) -> Self {
        Self { lo, hi, step }
    }

    pub fn single(value: f64) -> Self {
        Self {
            lo: value,
            hi: value,
            step: 1.0,
        }
    }

    fn validate(&self, name: &'static str) -> Result<(), DeError> {
        let fail = |reason: String| Err(DeError::InvalidRange { name, reason });
        if !(self.lo.is_finite() && self.hi.is_finite() && self.step.is_finite()) {
            return fail("values must be finite".into());
        }
        if self.lo > self.hi {
            return fail(format!("lo {} exceeds hi {}", self.lo, self.hi));
        }
        if self.step <= 0.0 {
            return fail(format!("step must be positive, got {}", self.step));
        }
        Ok(())
    }

    /// Grid values. Points are computed as `lo + k * step` and the end point
    /// is included when it lies within a relative 1e-9 of a grid point.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step * (1.0 + 1e-9) + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.lo + k as f64 * self.step).collect()
    }
}

/// Hyperparameter grid over crossover probability, differential weight and
/// regularization weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRanges {
    pub cr: Range,
    pub f: Range,
    pub lambda: Range,
}

impl Default for GridRanges {
    /// CR 0.1..0.9 step 0.2, F 0.1..1.9 step 0.2, lambda 0..1e-4 step 2.5e-6.
    fn default() -> Self {
        Self {
            cr: Range::new(0.1, 0.9, 0.2),
            f: Range::new(0.1, 1.9, 0.2),
            lambda: Range::new(0.0, 1e-4, 2.5e-6),
        }
    }
}

impl GridRanges {
    pub fn validate(&self) -> Result<(), DeError> {
        self.cr.validate("cr")?;
        self.f.validate("f")?;
        self.lambda.validate("lambda")
    }

    /// Every (CR, F, lambda) cell, CR slowest.
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        let (crs, fs, lambdas) = (self.cr.values(), self.f.values(), self.lambda.values());
        let mut out = Vec::with_capacity(crs.len() * fs.len() * lambdas.len());
        for &cr in &crs {
            for &f in &fs {
                for &l in &lambdas {
                    out.push((cr, f, l));
                }
            }
        }
        out
    }
}

/// One evaluated hyperparameter setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRow {
    pub cr: f64,
    pub f: f64,
    pub lambda: f64,
    pub best_rmse: f64,
    pub population_mean_rmse: f64,
    pub best_fitness: f64,
    pub best_params: IdmParams,
}

impl TuningRow {
    fn from_calibration(cr: f64, f: f64, lambda: f64, cal: &DeCalibration) -> Self {
        Self {
            cr,
            f,
            lambda,
            best_rmse: cal.best_rmse,
            population_mean_rmse: cal.population_mean_rmse,
            best_fitness: cal.run.best.fitness,
            best_params: cal.best_params,
        }
    }
}

/// Runs DE with the given hyperparameters on top of `base`.
pub fn evaluate_hyperparams(
    data: &Dataset,
    base: &DeConfig,
    cr: f64,
    f: f64,
    lambda: f64,
) -> Result<TuningRow, DeError> {
    let config = DeConfig {
        crossover_prob: cr,
        differential_weight: f,
        lambda,
        ..base.clone()
    };
    let cal = run_de(&config, data)?;
    Ok(TuningRow::from_calibration(cr, f, lambda, &cal))
}

/// Incumbent and every evaluation of a tuning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub best: TuningRow,
    pub rows: Vec<TuningRow>,
}

/// Index of the row with the lowest unregularized best RMSE; ties keep the
/// earliest row.
pub fn argmin_rows(rows: &[TuningRow]) -> Option<usize> {
    rows.iter()
        .enumerate()
        .min_by(|a, b| a.1.best_rmse.total_cmp(&b.1.best_rmse).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}

/// One DE run per grid cell, all with `base.seed`.
pub fn grid_search(data: &Dataset, ranges: &GridRanges, base: &DeConfig) -> Result<TuningResult, DeError> {
    ranges.validate()?;
    base.validate_idm()?;
    let cells = ranges.cells();
    if cells.is_empty() {
        return Err(DeError::EmptyGrid);
    }
    let rows = cells
        .par_iter()
        .map(|&(cr, f, l)| evaluate_hyperparams(data, base, cr, f, l))
        .collect::<Result<Vec<_>, _>>()?;
    let best = rows[argmin_rows(&rows).expect("non-empty")].clone();
    Ok(TuningResult { best, rows })
}

pub const TUNING_COLUMNS: [&str; 13] = [
    "cr",
    "f",
    "lambda",
    "best_rmse",
    "population_mean_rmse",
    "best_fitness",
    "v0",
    "T",
    "a",
    "b",
    "delta",
    "s0",
    "s1",
];

/// One CSV row per evaluation.
pub fn write_tuning_csv<W: Write>(rows: &[TuningRow], writer: W) -> Result<(), DeError> {
    let io = |e: csv::Error| DeError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TUNING_COLUMNS).map_err(io)?;
    for r in rows {
        let mut rec = vec![
            r.cr.to_string(),
            r.f.to_string(),
            r.lambda.to_string(),
            r.best_rmse.to_string(),
            r.population_mean_rmse.to_string(),
            r.best_fitness.to_string(),
        ];
        rec.extend(r.best_params.to_array().iter().map(f64::to_string));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| DeError::Io(e.to_string()))
}
