//! Measures of calibration error and posterior summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{instance_stats, mean_std, Dataset};
use crate::idm::{predict_instance, IdmParams};
use crate::model::SIGMA_FLOOR;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty series")]
    Empty,
    #[error("standard deviations must be positive, got {0} and {1}")]
    NonPositiveSd(f64, f64),
    #[error("no parameters for driver {0}")]
    MissingDriver(String),
    #[error("invalid parameters for driver {driver}: {reason}")]
    InvalidParams { driver: String, reason: String },
    #[error("dataset has no instances")]
    EmptyData,
    #[error("unknown KL direction {0:?}")]
    UnknownDirection(String),
}

/// Root mean squared difference.
pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64, MetricError> {
    if pred.len() != obs.len() {
        return Err(MetricError::LengthMismatch(pred.len(), obs.len()));
    }
    if pred.is_empty() {
        return Err(MetricError::Empty);
    }
    let ss: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o) * (p - o)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

/// Parameters to score a dataset with.
#[derive(Debug, Clone, PartialEq)]
pub enum DriverParams {
    /// The same parameters for every driver.
    Shared(IdmParams),
    PerDriver(BTreeMap<String, IdmParams>),
}

impl DriverParams {
    pub fn get(&self, driver_id: &str) -> Option<&IdmParams> {
        match self {
            DriverParams::Shared(p) => Some(p),
            DriverParams::PerDriver(m) => m.get(driver_id),
        }
    }
}

fn predictions(params: &DriverParams, data: &Dataset) -> Result<Vec<Vec<f64>>, MetricError> {
    if data.is_empty() {
        return Err(MetricError::EmptyData);
    }
    data.instances()
        .iter()
        .map(|inst| {
            let p = params
                .get(&inst.driver_id)
                .ok_or_else(|| MetricError::MissingDriver(inst.driver_id.clone()))?;
            predict_instance(p, inst).map_err(|e| MetricError::InvalidParams {
                driver: inst.driver_id.clone(),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Per-instance RMSE, in dataset order.
pub fn instance_rmses(params: &DriverParams, data: &Dataset) -> Result<Vec<f64>, MetricError> {
    predictions(params, data)?
        .iter()
        .zip(data.instances())
        .map(|(pred, inst)| rmse(pred, &inst.a_obs))
        .collect()
}

/// Mean over instances of the per-instance RMSE.
pub fn dataset_rmse(params: &DriverParams, data: &Dataset) -> Result<f64, MetricError> {
    let r = instance_rmses(params, data)?;
    Ok(r.iter().sum::<f64>() / r.len() as f64)
}

/// `KL(N(mu1, sd1^2) || N(mu2, sd2^2))` in nats.
pub fn gaussian_kl(mu1: f64, sd1: f64, mu2: f64, sd2: f64) -> Result<f64, MetricError> {
    if !(sd1 > 0.0 && sd2 > 0.0) {
        return Err(MetricError::NonPositiveSd(sd1, sd2));
    }
    let d = mu1 - mu2;
    Ok((sd2 / sd1).ln() + (sd1 * sd1 + d * d) / (2.0 * sd2 * sd2) - 0.5)
}

/// Which way round the per-instance KL divergence is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlDirection {
    /// `KL(observed || predicted)`.
    #[default]
    ObservedPredicted,
    /// `KL(predicted || observed)`.
    PredictedObserved,
}

impl KlDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            KlDirection::ObservedPredicted => "observed-predicted",
            KlDirection::PredictedObserved => "predicted-observed",
        }
    }
}

impl fmt::Display for KlDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KlDirection {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "observed-predicted" => Ok(KlDirection::ObservedPredicted),
            "predicted-observed" => Ok(KlDirection::PredictedObserved),
            other => Err(MetricError::UnknownDirection(other.to_string())),
        }
    }
}

/// Per-instance KL divergences between Gaussian fits of the observed and
/// predicted accelerations, both standard deviations floored at
/// [`SIGMA_FLOOR`].
pub fn instance_kls(params: &DriverParams, data: &Dataset, direction: KlDirection) -> Result<Vec<f64>, MetricError> {
    predictions(params, data)?
        .iter()
        .zip(data.instances())
        .map(|(pred, inst)| {
            let obs = instance_stats(inst);
            let (pm, ps) = mean_std(pred);
            let (om, os) = (obs.mean_a, obs.std_a.max(SIGMA_FLOOR));
            let ps = ps.max(SIGMA_FLOOR);
            match direction {
                KlDirection::ObservedPredicted => gaussian_kl(om, os, pm, ps),
                KlDirection::PredictedObserved => gaussian_kl(pm, ps, om, os),
            }
        })
        .collect()
}

/// Mean of [`instance_kls`].
pub fn avg_kl(params: &DriverParams, data: &Dataset, direction: KlDirection) -> Result<f64, MetricError> {
    let k = instance_kls(params, data, direction)?;
    Ok(k.iter().sum::<f64>() / k.len() as f64)
}

/// Sample quantile with linear interpolation between order statistics
/// (position `p * (n - 1)` in the sorted sample).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub const SUMMARY_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

/// Mean, sample standard deviation and the [`SUMMARY_LEVELS`] quantiles.
pub fn posterior_summary(samples: &[f64]) -> Result<Summary, MetricError> {
    if samples.is_empty() {
        return Err(MetricError::Empty);
    }
    let (mean, std) = mean_std(samples);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = SUMMARY_LEVELS.map(|p| quantile_sorted(&sorted, p));
    Ok(Summary {
        mean,
        std,
        q05: q[0],
        q25: q[1],
        q50: q[2],
        q75: q[3],
        q95: q[4],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram over the sample range. The last bin is closed on
/// the right; a constant sample yields one zero-width bin.
pub fn histogram(samples: &[f64], n_bins: usize) -> Result<Vec<HistogramBin>, MetricError> {
    if samples.is_empty() || n_bins == 0 {
        return Err(MetricError::Empty);
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(vec![HistogramBin {
            lo,
            hi,
            count: samples.len(),
        }]);
    }
    let width = (hi - lo) / n_bins as f64;
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|k| HistogramBin {
            lo: lo + k as f64 * width,
            hi: if k + 1 == n_bins { hi } else { lo + (k + 1) as f64 * width },
            count: 0,
        })
        .collect();
    for &x in samples {
        let k = (((x - lo) / width) as usize).min(n_bins - 1);
        bins[k].count += 1;
    }
    Ok(bins)
}
