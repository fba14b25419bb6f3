//! Calibration reports, the Table-1-shaped summary, and the CSV exports of
//! posterior samples and histograms.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::BayesCalibration;
use crate::data::Dataset;
use crate::de::{DeCalibration, DeConfig};
use crate::hmc::PosteriorParams;
use crate::idm::{IdmParams, N_PARAMS, PARAM_NAMES};
use crate::metrics::{avg_kl, dataset_rmse, histogram, posterior_summary, DriverParams, KlDirection, MetricError, Summary};
use crate::model::Formulation;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("driver {driver} has no samples for parameter {parameter}")]
    MissingParameter { driver: String, parameter: String },
    #[error("no parameters for driver {0}")]
    MissingDriver(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "Bayes-Pooled")]
    BayesPooled,
    #[serde(rename = "Bayes-Hierarchical")]
    BayesHierarchical,
    #[serde(rename = "Bayes-Individual")]
    BayesIndividual,
    #[serde(rename = "DE")]
    De,
    #[serde(rename = "Literature")]
    Literature,
    #[serde(rename = "Custom")]
    Custom,
}

impl Method {
    pub fn from_formulation(f: Formulation) -> Self {
        match f {
            Formulation::Pooled => Method::BayesPooled,
            Formulation::Hierarchical => Method::BayesHierarchical,
            Formulation::Individual => Method::BayesIndividual,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::BayesPooled => "Bayes-Pooled",
            Method::BayesHierarchical => "Bayes-Hierarchical",
            Method::BayesIndividual => "Bayes-Individual",
            Method::De => "DE",
            Method::Literature => "Literature",
            Method::Custom => "Custom",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub parameter: String,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverSummary {
    pub driver_id: String,
    pub parameters: Vec<ParamSummary>,
}

/// Sampler diagnostics of a Bayesian run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerInfo {
    pub schedule_log: Vec<usize>,
    pub tail_means: Vec<f64>,
    pub converged: bool,
    pub acceptance_rate: f64,
    pub retained_samples: usize,
    pub step_size: f64,
    pub n_leapfrog: usize,
}

/// Details of a DE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeInfo {
    pub config: DeConfig,
    pub best_params: IdmParams,
    pub best_fitness: f64,
    pub best_rmse: f64,
    pub population_mean_rmse: f64,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub method: Method,
    pub prior_sigma: Option<f64>,
    pub rmse: f64,
    pub avg_kl: f64,
    pub kl_direction: KlDirection,
    pub n_drivers: usize,
    pub n_instances: usize,
    pub seed: Option<u64>,
    pub sampler: Option<SamplerInfo>,
    pub de: Option<DeInfo>,
    pub drivers: Vec<DriverSummary>,
}

impl CalibrationReport {
    pub fn to_json(&self) -> Result<String, ReportError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Point parameters per driver: the summary means.
    pub fn point_params(&self) -> DriverParams {
        DriverParams::PerDriver(
            self.drivers
                .iter()
                .map(|d| {
                    let mut a = [0.0; N_PARAMS];
                    for (j, p) in d.parameters.iter().enumerate().take(N_PARAMS) {
                        a[j] = p.summary.mean;
                    }
                    (d.driver_id.clone(), IdmParams::from_array(a))
                })
                .collect(),
        )
    }
}

fn point_summary(x: f64) -> Summary {
    Summary {
        mean: x,
        std: 0.0,
        q05: x,
        q25: x,
        q50: x,
        q75: x,
        q95: x,
    }
}

fn point_drivers(params: &DriverParams, data: &Dataset) -> Result<Vec<DriverSummary>, ReportError> {
    data.drivers()
        .iter()
        .map(|id| {
            let p = params.get(id).ok_or_else(|| ReportError::MissingDriver(id.clone()))?;
            Ok(DriverSummary {
                driver_id: id.clone(),
                parameters: PARAM_NAMES
                    .iter()
                    .zip(p.to_array())
                    .map(|(name, x)| ParamSummary {
                        parameter: name.to_string(),
                        summary: point_summary(x),
                    })
                    .collect(),
            })
        })
        .collect()
}

/// Per-driver, per-parameter posterior summaries.
pub fn posterior_drivers(drivers: &[String], posterior: &PosteriorParams) -> Result<Vec<DriverSummary>, ReportError> {
    drivers
        .iter()
        .enumerate()
        .map(|(d, id)| {
            let parameters = (0..N_PARAMS)
                .map(|j| {
                    Ok(ParamSummary {
                        parameter: PARAM_NAMES[j].to_string(),
                        summary: posterior_summary(&posterior.param_samples(d, j))?,
                    })
                })
                .collect::<Result<_, ReportError>>()?;
            Ok(DriverSummary {
                driver_id: id.clone(),
                parameters,
            })
        })
        .collect()
}

/// Report for a Bayesian calibration, scored at the per-driver posterior
/// means.
pub fn bayes_report(
    cal: &BayesCalibration,
    data: &Dataset,
    direction: KlDirection,
) -> Result<CalibrationReport, ReportError> {
    let params = cal.posterior_means();
    let chain = &cal.outcome.chain;
    Ok(CalibrationReport {
        method: Method::from_formulation(cal.spec.formulation),
        prior_sigma: Some(cal.spec.prior_sigma),
        rmse: dataset_rmse(&params, data)?,
        avg_kl: avg_kl(&params, data, direction)?,
        kl_direction: direction,
        n_drivers: data.n_drivers(),
        n_instances: data.n_instances(),
        seed: Some(chain.config.seed),
        sampler: Some(SamplerInfo {
            schedule_log: cal.outcome.schedule_log.clone(),
            tail_means: cal.outcome.tail_means.clone(),
            converged: cal.outcome.converged,
            acceptance_rate: chain.acceptance_rate(),
            retained_samples: chain.len(),
            step_size: chain.config.step_size,
            n_leapfrog: chain.config.n_leapfrog,
        }),
        de: None,
        drivers: posterior_drivers(&cal.drivers, &cal.posterior)?,
    })
}

/// Report for a DE calibration.
pub fn de_report(
    cal: &DeCalibration,
    config: &DeConfig,
    data: &Dataset,
    direction: KlDirection,
) -> Result<CalibrationReport, ReportError> {
    let params = DriverParams::Shared(cal.best_params);
    Ok(CalibrationReport {
        method: Method::De,
        prior_sigma: None,
        rmse: dataset_rmse(&params, data)?,
        avg_kl: avg_kl(&params, data, direction)?,
        kl_direction: direction,
        n_drivers: data.n_drivers(),
        n_instances: data.n_instances(),
        seed: Some(config.seed),
        sampler: None,
        de: Some(DeInfo {
            config: config.clone(),
            best_params: cal.best_params,
            best_fitness: cal.run.best.fitness,
            best_rmse: cal.best_rmse,
            population_mean_rmse: cal.population_mean_rmse,
            history: cal.run.history.clone(),
        }),
        drivers: point_drivers(&params, data)?,
    })
}

/// Report for fixed parameters, e.g. the literature baseline.
pub fn params_report(
    method: Method,
    params: &DriverParams,
    data: &Dataset,
    direction: KlDirection,
) -> Result<CalibrationReport, ReportError> {
    Ok(CalibrationReport {
        method,
        prior_sigma: None,
        rmse: dataset_rmse(params, data)?,
        avg_kl: avg_kl(params, data, direction)?,
        kl_direction: direction,
        n_drivers: data.n_drivers(),
        n_instances: data.n_instances(),
        seed: None,
        sampler: None,
        de: None,
        drivers: point_drivers(params, data)?,
    })
}

/// The literature-values baseline.
pub fn literature_report(data: &Dataset, direction: KlDirection) -> Result<CalibrationReport, ReportError> {
    params_report(
        Method::Literature,
        &DriverParams::Shared(IdmParams::LITERATURE),
        data,
        direction,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub method: Method,
    pub prior_sigma: Option<f64>,
    pub rmse: f64,
    pub avg_kl: f64,
}

/// One row per report, ordered by method then prior sigma.
pub fn table1_rows(reports: &[CalibrationReport]) -> Vec<Table1Row> {
    let mut rows: Vec<Table1Row> = reports
        .iter()
        .map(|r| Table1Row {
            method: r.method,
            prior_sigma: r.prior_sigma,
            rmse: r.rmse,
            avg_kl: r.avg_kl,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.prior_sigma.unwrap_or(f64::INFINITY).total_cmp(&b.prior_sigma.unwrap_or(f64::INFINITY)))
    });
    rows
}

pub fn write_table1_csv<W: Write>(rows: &[Table1Row], writer: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "prior_sigma", "rmse", "avg_kl"])?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.prior_sigma.map(|s| s.to_string()).unwrap_or_default(),
            r.rmse.to_string(),
            r.avg_kl.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const POSTERIOR_COLUMNS: [&str; 4] = ["driver_id", "parameter_name", "sample_index", "value"];

/// Long-format posterior samples.
pub fn write_posterior_csv<W: Write>(
    drivers: &[String],
    posterior: &PosteriorParams,
    writer: W,
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(POSTERIOR_COLUMNS)?;
    for (d, id) in drivers.iter().enumerate() {
        for (j, name) in PARAM_NAMES.iter().enumerate() {
            for (k, x) in posterior.param_samples(d, j).iter().enumerate() {
                w.write_record([id.as_str(), name, &k.to_string(), &x.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-driver sample means from a posterior CSV. Every driver must have
/// samples for all seven parameters.
pub fn read_posterior_means<R: Read>(reader: R) -> Result<BTreeMap<String, IdmParams>, ReportError> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != POSTERIOR_COLUMNS {
        return Err(ReportError::Malformed {
            row: 1,
            message: format!("expected columns {POSTERIOR_COLUMNS:?}, got {header:?}"),
        });
    }
    let mut acc: BTreeMap<String, [(f64, usize); N_PARAMS]> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let bad = |message: String| ReportError::Malformed { row, message };
        let j = PARAM_NAMES
            .iter()
            .position(|n| *n == &rec[1])
            .ok_or_else(|| bad(format!("unknown parameter {:?}", &rec[1])))?;
        let x: f64 = rec[3].parse().map_err(|_| bad(format!("bad value {:?}", &rec[3])))?;
        let slot = &mut acc.entry(rec[0].to_string()).or_insert([(0.0, 0); N_PARAMS])[j];
        slot.0 += x;
        slot.1 += 1;
    }
    acc.into_iter()
        .map(|(driver, sums)| {
            let mut a = [0.0; N_PARAMS];
            for j in 0..N_PARAMS {
                if sums[j].1 == 0 {
                    return Err(ReportError::MissingParameter {
                        driver,
                        parameter: PARAM_NAMES[j].to_string(),
                    });
                }
                a[j] = sums[j].0 / sums[j].1 as f64;
            }
            Ok((driver, IdmParams::from_array(a)))
        })
        .collect()
}

/// Histogram bins of every driver-parameter sample set.
pub fn write_histogram_csv<W: Write>(
    drivers: &[String],
    posterior: &PosteriorParams,
    n_bins: usize,
    writer: W,
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["driver_id", "parameter", "bin_lo", "bin_hi", "count"])?;
    for (d, id) in drivers.iter().enumerate() {
        for (j, name) in PARAM_NAMES.iter().enumerate() {
            for bin in histogram(&posterior.param_samples(d, j), n_bins)? {
                w.write_record([
                    id.as_str(),
                    name,
                    &bin.lo.to_string(),
                    &bin.hi.to_string(),
                    &bin.count.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
