//! Gaussian-process Bayesian optimization over a box, used to tune the DE
//! hyperparameters.
//!
//! The surrogate works in the unit cube with standardized targets, a
//! Matérn-5/2 kernel whose length scale is chosen by marginal likelihood
//! from a fixed grid, and a small diagonal jitter. Proposals maximize
//! expected improvement by random multi-start followed by a shrinking
//! coordinate search.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::data::Dataset;
use crate::de::{argmin_rows, evaluate_hyperparams, DeConfig, DeError, TuningResult, TuningRow};
use crate::rng::{stream, stream_rng, Rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoError {
    #[error("bounds[{index}] has zero or negative width: [{lo}, {hi}]")]
    DegenerateBounds { index: usize, lo: f64, hi: f64 },
    #[error("budget must be at least {min}, got {got}")]
    BudgetTooSmall { min: usize, got: usize },
    #[error("no bounds given")]
    NoDimensions,
    #[error(transparent)]
    De(#[from] DeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoConfig {
    /// Total objective evaluations, including the warm start.
    pub budget: usize,
    /// Space-filling evaluations before the surrogate is used.
    pub n_initial: usize,
    /// Random acquisition starts per proposal.
    pub n_candidates: usize,
    /// Best starts refined by local search.
    pub n_refine: usize,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            budget: 30,
            n_initial: 5,
            n_candidates: 512,
            n_refine: 4,
            jitter: 1e-6,
            seed: 0,
        }
    }
}

/// Matérn-5/2 correlation at scaled distance `r`.
fn matern52(r: f64) -> f64 {
    let s = 5f64.sqrt() * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

const LENGTH_SCALES: [f64; 10] = [0.05, 0.08, 0.12, 0.18, 0.25, 0.35, 0.5, 0.7, 1.0, 1.5];

/// Zero-mean unit-variance GP on standardized targets.
#[derive(Debug, Clone)]
pub struct Gp {
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_scale: f64,
    length_scale: f64,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl Gp {
    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        kernel(a, b, self.length_scale)
    }

    /// Fits to `(x, y)`, picking the length scale with the highest log
    /// marginal likelihood.
    pub fn fit(x: &[Vec<f64>], y: &[f64], jitter: f64) -> Gp {
        assert!(!x.is_empty() && x.len() == y.len());
        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_scale));
        let mut best: Option<(f64, Gp)> = None;
        for &ls in &LENGTH_SCALES {
            let Some((chol, alpha)) = factor(x, &ys, ls, jitter) else {
                continue;
            };
            let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
            let lml = -0.5 * ys.dot(&alpha) - 0.5 * log_det;
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((
                    lml,
                    Gp {
                        x: x.to_vec(),
                        y_mean,
                        y_scale,
                        length_scale: ls,
                        jitter,
                        chol,
                        alpha,
                    },
                ));
            }
        }
        best.map(|(_, gp)| gp).unwrap_or_else(|| {
            // Every scale was numerically singular; fall back to heavy jitter.
            let (chol, alpha) = factor(x, &ys, LENGTH_SCALES[0], 1e-2).expect("jittered kernel is positive definite");
            Gp {
                x: x.to_vec(),
                y_mean,
                y_scale,
                length_scale: LENGTH_SCALES[0],
                jitter: 1e-2,
                chol,
                alpha,
            }
        })
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    /// Posterior mean and standard deviation in the original units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| self.kernel(xi, x)));
        let mean = k.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&k).expect("triangular solve");
        let var = (1.0 + self.jitter - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }
}

fn kernel(a: &[f64], b: &[f64], ls: f64) -> f64 {
    let r2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    matern52(r2.sqrt() / ls)
}

fn factor(x: &[Vec<f64>], ys: &DVector<f64>, ls: f64, jitter: f64) -> Option<(Cholesky<f64, Dyn>, DVector<f64>)> {
    let n = x.len();
    let k = DMatrix::from_fn(n, n, |i, j| kernel(&x[i], &x[j], ls) + if i == j { jitter } else { 0.0 });
    let chol = Cholesky::new(k)?;
    let alpha = chol.solve(ys);
    Some((chol, alpha))
}

/// Expected improvement below `best` for a minimization problem.
pub fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    if sd <= 0.0 {
        return (best - mean).max(0.0);
    }
    let z = (best - mean) / sd;
    let n = Normal::standard();
    (best - mean) * n.cdf(z) + sd * n.pdf(z)
}

/// `n` Latin-hypercube points in the `dim`-dimensional unit cube.
pub fn latin_hypercube(rng: &mut Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; dim]; n];
    for j in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, s) in strata.into_iter().enumerate() {
            out[i][j] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    out
}

fn maximize_ei(rng: &mut Rng, gp: &Gp, best: f64, dim: usize, config: &BoConfig) -> Vec<f64> {
    let ei = |u: &[f64]| {
        let (m, s) = gp.predict(u);
        expected_improvement(m, s, best)
    };
    let mut starts: Vec<(f64, Vec<f64>)> = (0..config.n_candidates.max(1))
        .map(|_| {
            let u: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            (ei(&u), u)
        })
        .collect();
    starts.sort_by(|a, b| b.0.total_cmp(&a.0));
    starts.truncate(config.n_refine.max(1));
    let mut winner = starts[0].clone();
    for (mut val, mut u) in starts {
        let mut step = 0.1;
        while step > 1e-4 {
            let mut moved = false;
            for j in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut c = u.clone();
                    c[j] = (c[j] + sign * step).clamp(0.0, 1.0);
                    let v = ei(&c);
                    if v > val {
                        val = v;
                        u = c;
                        moved = true;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if val > winner.0 {
            winner = (val, u);
        }
    }
    winner.1
}

/// All evaluations of a minimization, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoTrace {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub best_index: usize,
}

fn check_bounds(bounds: &[[f64; 2]]) -> Result<(), BoError> {
    if bounds.is_empty() {
        return Err(BoError::NoDimensions);
    }
    for (index, &[lo, hi]) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(BoError::DegenerateBounds { index, lo, hi });
        }
    }
    Ok(())
}

/// Minimizes `objective` over `bounds` within `config.budget` evaluations.
/// Non-finite objective values are recorded as-is but enter the surrogate as
/// the worst finite value seen.
pub fn bayes_opt_minimize<F>(mut objective: F, bounds: &[[f64; 2]], config: &BoConfig) -> Result<BoTrace, BoError>
where
    F: FnMut(&[f64]) -> Result<f64, BoError>,
{
    check_bounds(bounds)?;
    let n_initial = config.n_initial.max(1);
    if config.budget < n_initial {
        return Err(BoError::BudgetTooSmall {
            min: n_initial,
            got: config.budget,
        });
    }
    let dim = bounds.len();
    let to_box = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(bounds)
            .map(|(v, [lo, hi])| (lo + v * (hi - lo)).clamp(*lo, *hi))
            .collect()
    };
    let mut rng = stream_rng(config.seed, stream::BAYES_OPT, 0);
    let mut unit: Vec<Vec<f64>> = Vec::with_capacity(config.budget);
    let mut trace = BoTrace {
        points: Vec::with_capacity(config.budget),
        values: Vec::with_capacity(config.budget),
        best_index: 0,
    };
    let mut evaluate = |u: Vec<f64>, unit: &mut Vec<Vec<f64>>, trace: &mut BoTrace| -> Result<(), BoError> {
        let x = to_box(&u);
        let y = objective(&x)?;
        trace.points.push(x);
        trace.values.push(y);
        unit.push(u);
        Ok(())
    };
    for u in latin_hypercube(&mut rng, n_initial, dim) {
        evaluate(u, &mut unit, &mut trace)?;
    }
    while trace.values.len() < config.budget {
        let worst = trace
            .values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let fill = if worst.is_finite() { worst } else { 0.0 };
        let y: Vec<f64> = trace
            .values
            .iter()
            .map(|&v| if v.is_finite() { v } else { fill })
            .collect();
        let gp = Gp::fit(&unit, &y, config.jitter);
        let best = y.iter().copied().fold(f64::INFINITY, f64::min);
        let u = maximize_ei(&mut rng, &gp, best, dim, config);
        evaluate(u, &mut unit, &mut trace)?;
    }
    trace.best_index = trace
        .values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("budget is at least one");
    Ok(trace)
}

/// Box over (CR, F, lambda).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub cr: [f64; 2],
    pub f: [f64; 2],
    pub lambda: [f64; 2],
}

impl Default for HyperBounds {
    /// The hull of the default tuning grid.
    fn default() -> Self {
        Self {
            cr: [0.1, 0.9],
            f: [0.1, 1.9],
            lambda: [0.0, 1e-4],
        }
    }
}

/// Tunes DE hyperparameters, scoring each setting by the unregularized
/// average RMSE of the best candidate.
pub fn bayes_opt_tune(
    data: &Dataset,
    bounds: &HyperBounds,
    budget: usize,
    base: &DeConfig,
    seed: u64,
) -> Result<TuningResult, BoError> {
    let min = BoConfig::default().n_initial;
    if budget < min {
        return Err(BoError::BudgetTooSmall { min, got: budget });
    }
    base.validate_idm()?;
    let config = BoConfig {
        budget,
        seed,
        ..BoConfig::default()
    };
    let mut rows: Vec<TuningRow> = Vec::with_capacity(budget);
    bayes_opt_minimize(
        |x| {
            let row = evaluate_hyperparams(data, base, x[0], x[1], x[2])?;
            let y = row.best_rmse;
            rows.push(row);
            Ok(y)
        },
        &[bounds.cr, bounds.f, bounds.lambda],
        &config,
    )?;
    let best = rows[argmin_rows(&rows).expect("non-empty")].clone();
    Ok(TuningResult { best, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matern_at_zero_is_one() {
        assert_eq!(matern52(0.0), 1.0);
        assert!(matern52(1.0) < 1.0 && matern52(1.0) > matern52(2.0));
    }

    #[test]
    fn gp_interpolates_training_points() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0, ((i * 3) % 8) as f64 / 7.0]).collect();
        let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin() + p[1] * p[1]).collect();
        let gp = Gp::fit(&x, &y, 1e-8);
        for (xi, yi) in x.iter().zip(&y) {
            let (m, s) = gp.predict(xi);
            assert!((m - yi).abs() < 1e-3, "{m} vs {yi} (ls {})", gp.length_scale());
            assert!(s < 1e-2);
        }
    }

    #[test]
    fn ei_properties() {
        assert_eq!(expected_improvement(1.0, 0.0, 0.5), 0.0);
        assert_eq!(expected_improvement(0.2, 0.0, 0.5), 0.3);
        assert!(expected_improvement(0.0, 1.0, 0.0) > 0.39);
        assert!(expected_improvement(0.0, 1.0, 1.0) > expected_improvement(0.0, 1.0, 0.0));
    }

    #[test]
    fn latin_hypercube_fills_strata() {
        let mut rng = stream_rng(1, stream::BAYES_OPT, 9);
        let pts = latin_hypercube(&mut rng, 6, 3);
        for j in 0..3 {
            let mut strata: Vec<usize> = pts.iter().map(|p| (p[j] * 6.0) as usize).collect();
            strata.sort();
            assert_eq!(strata, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn warm_start_only_budget() {
        let cfg = BoConfig {
            budget: 5,
            ..BoConfig::default()
        };
        let t = bayes_opt_minimize(|x| Ok(x[0]), &[[0.0, 1.0], [2.0, 3.0]], &cfg).unwrap();
        assert_eq!(t.values.len(), 5);
        let min = t.values.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(t.values[t.best_index], min);
    }

    #[test]
    fn finds_quadratic_bowl_minimum() {
        let bounds = [[0.1, 0.9], [0.1, 1.9], [0.0, 1e-4]];
        let cfg = BoConfig {
            budget: 20,
            seed: 3,
            ..BoConfig::default()
        };
        let t = bayes_opt_minimize(|x| Ok((x[0] - 0.37).powi(2)), &bounds, &cfg).unwrap();
        let best = &t.points[t.best_index];
        assert!((best[0] - 0.37).abs() < 0.05, "{best:?}");
        for p in &t.points {
            for (v, [lo, hi]) in p.iter().zip(bounds) {
                assert!(*v >= lo && *v <= hi);
            }
        }
    }

    #[test]
    fn degenerate_bounds_rejected() {
        let cfg = BoConfig::default();
        assert_eq!(
            bayes_opt_minimize(|_| Ok(0.0), &[[0.0, 1.0], [1.0, 1.0]], &cfg).unwrap_err(),
            BoError::DegenerateBounds {
                index: 1,
                lo: 1.0,
                hi: 1.0
            }
        );
        let small = BoConfig {
            budget: 3,
            ..BoConfig::default()
        };
        assert!(matches!(
            bayes_opt_minimize(|_| Ok(0.0), &[[0.0, 1.0]], &small),
            Err(BoError::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn non_finite_values_do_not_break_the_surrogate() {
        let cfg = BoConfig {
            budget: 9,
            seed: 1,
            ..BoConfig::default()
        };
        let t = bayes_opt_minimize(
            |x| Ok(if x[0] > 0.5 { f64::INFINITY } else { x[0] }),
            &[[0.0, 1.0]],
            &cfg,
        )
        .unwrap();
        assert_eq!(t.values.len(), 9);
        assert!(t.values[t.best_index].is_finite());
    }
}
