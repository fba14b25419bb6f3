//! Leader-follower trajectory data: CSV ingestion, validation, summary
//! statistics and synthetic generation with known ground truth.
//!
//! CSV layout (header required, columns in this order):
//!
//! ```text
//! driver_id,instance_id,time_s,v_mps,dv_mps,gap_m,accel_mps2
//! ```
//!
//! Rows of one `(driver_id, instance_id)` group must be contiguous and sorted
//! by time with a uniform sampling interval.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::idm::{self, IdmError, IdmParams, KinematicState};
use crate::rng::{stream, stream_rng};

/// Expected CSV header.
pub const CSV_COLUMNS: [&str; 7] = [
    "driver_id",
    "instance_id",
    "time_s",
    "v_mps",
    "dv_mps",
    "gap_m",
    "accel_mps2",
];

/// Default sampling interval for synthetic data (s).
pub const DEFAULT_DT: f64 = 0.1;

/// Relative tolerance on consecutive timestamp differences.
const DT_REL_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad header: expected {expected:?}, found {found:?}")]
    Header { expected: Vec<String>, found: Vec<String> },
    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("instance {driver_id}/{instance_id}: {reason}")]
    InvalidInstance {
        driver_id: String,
        instance_id: String,
        reason: InstanceRejection,
    },
    #[error("no data rows")]
    Empty,
    #[error("synthetic driver {driver_id} instance {instance}: {source}")]
    Simulation {
        driver_id: String,
        instance: usize,
        source: IdmError,
    },
    #[error("invalid synthetic configuration: {0}")]
    InvalidConfig(String),
}

/// Why an instance failed validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceRejection {
    #[error("non-uniform dt at row {row} (expected {expected}, found {found})")]
    NonUniformDt { row: usize, expected: f64, found: f64 },
    #[error("nonpositive gap {gap} at row {row}")]
    NonPositiveGap { row: usize, gap: f64 },
    #[error("negative speed {speed} at row {row}")]
    NegativeSpeed { row: usize, speed: f64 },
    #[error("series too short ({len} samples, need at least 2)")]
    TooShort { len: usize },
    #[error("series lengths differ")]
    LengthMismatch,
    #[error("time step {dt} must be positive")]
    NonPositiveDt { dt: f64 },
    #[error("rows of this group are not contiguous (row {row})")]
    NonContiguous { row: usize },
    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },
}

/// One car-following episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfInstance {
    pub driver_id: String,
    pub instance_id: String,
    /// Timestamp of the first sample (s).
    pub t0: f64,
    /// Sampling interval (s).
    pub dt: f64,
    /// Follower speed (m/s).
    pub v: Vec<f64>,
    /// Follower minus leader speed (m/s).
    pub dv: Vec<f64>,
    /// Bumper-to-bumper gap (m).
    pub s: Vec<f64>,
    /// Observed follower acceleration (m/s^2).
    pub a_obs: Vec<f64>,
}

impl CfInstance {
    /// Builds and validates an instance starting at `t0 = 0`.
    pub fn new(
        driver_id: impl Into<String>,
        instance_id: impl Into<String>,
        dt: f64,
        v: Vec<f64>,
        dv: Vec<f64>,
        s: Vec<f64>,
        a_obs: Vec<f64>,
    ) -> Result<Self, DataError> {
        let inst = Self {
            driver_id: driver_id.into(),
            instance_id: instance_id.into(),
            t0: 0.0,
            dt,
            v,
            dv,
            s,
            a_obs,
        };
        inst.validate().map_err(|reason| DataError::InvalidInstance {
            driver_id: inst.driver_id.clone(),
            instance_id: inst.instance_id.clone(),
            reason,
        })?;
        Ok(inst)
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Checks the structural invariants. Row numbers in the result are
    /// sample indices within the instance.
    pub fn validate(&self) -> Result<(), InstanceRejection> {
        let n = self.v.len();
        if self.dv.len() != n || self.s.len() != n || self.a_obs.len() != n {
            return Err(InstanceRejection::LengthMismatch);
        }
        if n < 2 {
            return Err(InstanceRejection::TooShort { len: n });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(InstanceRejection::NonPositiveDt { dt: self.dt });
        }
        for t in 0..n {
            if !(self.v[t].is_finite()
                && self.dv[t].is_finite()
                && self.s[t].is_finite()
                && self.a_obs[t].is_finite())
            {
                return Err(InstanceRejection::NonFinite { row: t });
            }
            if self.s[t] <= 0.0 {
                return Err(InstanceRejection::NonPositiveGap { row: t, gap: self.s[t] });
            }
            if self.v[t] < 0.0 {
                return Err(InstanceRejection::NegativeSpeed { row: t, speed: self.v[t] });
            }
        }
        Ok(())
    }

    pub fn state(&self, t: usize) -> KinematicState {
        KinematicState::new(self.v[t], self.dv[t], self.s[t])
    }
}

/// Immutable collection of instances with drivers in first-seen order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    instances: Vec<CfInstance>,
    drivers: Vec<String>,
    driver_of: Vec<usize>,
}

impl Dataset {
    pub fn new(instances: Vec<CfInstance>) -> Self {
        let mut drivers: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut driver_of = Vec::with_capacity(instances.len());
        for inst in &instances {
            let idx = *index.entry(inst.driver_id.clone()).or_insert_with(|| {
                drivers.push(inst.driver_id.clone());
                drivers.len() - 1
            });
            driver_of.push(idx);
        }
        Self {
            instances,
            drivers,
            driver_of,
        }
    }

    pub fn instances(&self) -> &[CfInstance] {
        &self.instances
    }

    pub fn drivers(&self) -> &[String] {
        &self.drivers
    }

    pub fn n_drivers(&self) -> usize {
        self.drivers.len()
    }

    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Driver index (into [`Dataset::drivers`]) of instance `i`.
    pub fn driver_index(&self, i: usize) -> usize {
        self.driver_of[i]
    }

    pub fn driver_position(&self, driver_id: &str) -> Option<usize> {
        self.drivers.iter().position(|d| d == driver_id)
    }

    /// Instance indices grouped per driver, in driver order.
    pub fn instances_by_driver(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.drivers.len()];
        for (i, &d) in self.driver_of.iter().enumerate() {
            groups[d].push(i);
        }
        groups
    }

    /// Total number of time samples across all instances.
    pub fn n_samples(&self) -> usize {
        self.instances.iter().map(CfInstance::len).sum()
    }
}

/// Summary of an instance's observed accelerations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub mean_a: f64,
    /// Sample (n - 1) standard deviation.
    pub std_a: f64,
}

pub fn instance_stats(inst: &CfInstance) -> InstanceStats {
    let (mean_a, std_a) = mean_std(&inst.a_obs);
    InstanceStats { mean_a, std_a }
}

/// Two-pass mean and sample standard deviation. A single value has std 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut sum = 0.0;
    for &x in xs {
        sum += x;
    }
    let mean = sum / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let mut ss = 0.0;
    for &x in xs {
        let d = x - mean;
        ss += d * d;
    }
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// A group that failed validation during lenient ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub driver_id: String,
    pub instance_id: String,
    pub reason: InstanceRejection,
}

/// Result of lenient ingestion: surviving instances plus rejected groups.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub rejections: Vec<Rejection>,
}

struct RawGroup {
    driver_id: String,
    instance_id: String,
    first_row: usize,
    time: Vec<f64>,
    v: Vec<f64>,
    dv: Vec<f64>,
    s: Vec<f64>,
    a: Vec<f64>,
}

impl RawGroup {
    // Row numbers are 1-based data rows counting the header as row 1.
    fn into_instance(self) -> Result<CfInstance, Rejection> {
        let reject = |reason| Rejection {
            driver_id: self.driver_id.clone(),
            instance_id: self.instance_id.clone(),
            reason,
        };
        let n = self.time.len();
        if n < 2 {
            return Err(reject(InstanceRejection::TooShort { len: n }));
        }
        let first = self.time[1] - self.time[0];
        if !(first > 0.0) {
            return Err(reject(InstanceRejection::NonPositiveDt { dt: first }));
        }
        for k in 1..n {
            let step = self.time[k] - self.time[k - 1];
            if (step - first).abs() > DT_REL_TOL * first {
                return Err(reject(InstanceRejection::NonUniformDt {
                    row: self.first_row + k,
                    expected: first,
                    found: step,
                }));
            }
        }
        let dt = (self.time[n - 1] - self.time[0]) / (n - 1) as f64;
        let inst = CfInstance {
            driver_id: self.driver_id.clone(),
            instance_id: self.instance_id.clone(),
            t0: self.time[0],
            dt,
            v: self.v,
            dv: self.dv,
            s: self.s,
            a_obs: self.a,
        };
        let first_row = self.first_row;
        inst.validate().map_err(|reason| {
            let reason = match reason {
                InstanceRejection::NonPositiveGap { row, gap } => {
                    InstanceRejection::NonPositiveGap { row: first_row + row, gap }
                }
                InstanceRejection::NegativeSpeed { row, speed } => {
                    InstanceRejection::NegativeSpeed { row: first_row + row, speed }
                }
                InstanceRejection::NonFinite { row } => {
                    InstanceRejection::NonFinite { row: first_row + row }
                }
                other => other,
            };
            Rejection {
                driver_id: inst.driver_id.clone(),
                instance_id: inst.instance_id.clone(),
                reason,
            }
        })?;
        Ok(inst)
    }
}

fn read_groups<R: Read>(reader: R) -> Result<Vec<Result<CfInstance, Rejection>>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_COLUMNS {
        return Err(DataError::Header {
            expected: CSV_COLUMNS.iter().map(|s| s.to_string()).collect(),
            found: header,
        });
    }

    let mut groups: Vec<RawGroup> = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    let mut outcomes = Vec::new();
    let mut broken: HashMap<usize, InstanceRejection> = HashMap::new();

    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record?;
        if record.len() != CSV_COLUMNS.len() {
            return Err(DataError::MalformedRow {
                row,
                message: format!("expected {} columns, found {}", CSV_COLUMNS.len(), record.len()),
            });
        }
        let mut nums = [0.0f64; 5];
        for (k, slot) in nums.iter_mut().enumerate() {
            let field = &record[k + 2];
            *slot = field.parse().map_err(|_| DataError::MalformedRow {
                row,
                message: format!("column {} is not a number: {field:?}", CSV_COLUMNS[k + 2]),
            })?;
        }
        let key = (record[0].to_owned(), record[1].to_owned());
        let is_current = groups
            .last()
            .is_some_and(|g| g.driver_id == key.0 && g.instance_id == key.1);
        if !is_current {
            if let Some(&gi) = seen.get(&key) {
                broken
                    .entry(gi)
                    .or_insert(InstanceRejection::NonContiguous { row });
                continue;
            }
            seen.insert(key.clone(), groups.len());
            groups.push(RawGroup {
                driver_id: key.0,
                instance_id: key.1,
                first_row: row,
                time: Vec::new(),
                v: Vec::new(),
                dv: Vec::new(),
                s: Vec::new(),
                a: Vec::new(),
            });
        }
        let g = groups.last_mut().expect("group pushed above");
        let [t, v, dv, s, a] = nums;
        g.time.push(t);
        g.v.push(v);
        g.dv.push(dv);
        g.s.push(s);
        g.a.push(a);
    }
    if groups.is_empty() {
        return Err(DataError::Empty);
    }
    for (gi, g) in groups.into_iter().enumerate() {
        if let Some(reason) = broken.remove(&gi) {
            outcomes.push(Err(Rejection {
                driver_id: g.driver_id,
                instance_id: g.instance_id,
                reason,
            }));
        } else {
            outcomes.push(g.into_instance());
        }
    }
    Ok(outcomes)
}

/// Strict parse: any invalid group is an error naming that group.
pub fn parse_trajectories<R: Read>(reader: R) -> Result<Dataset, DataError> {
    let mut instances = Vec::new();
    for outcome in read_groups(reader)? {
        match outcome {
            Ok(inst) => instances.push(inst),
            Err(r) => {
                return Err(DataError::InvalidInstance {
                    driver_id: r.driver_id,
                    instance_id: r.instance_id,
                    reason: r.reason,
                })
            }
        }
    }
    Ok(Dataset::new(instances))
}

/// Lenient parse: invalid groups are dropped and reported. Malformed rows are
/// still fatal since they cannot be attributed reliably.
pub fn ingest_trajectories<R: Read>(reader: R) -> Result<Ingested, DataError> {
    let mut instances = Vec::new();
    let mut rejections = Vec::new();
    for outcome in read_groups(reader)? {
        match outcome {
            Ok(inst) => instances.push(inst),
            Err(r) => rejections.push(r),
        }
    }
    Ok(Ingested {
        dataset: Dataset::new(instances),
        rejections,
    })
}

/// Writes a dataset in the CSV layout accepted by [`parse_trajectories`].
pub fn write_trajectories<W: Write>(data: &Dataset, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for inst in data.instances() {
        for t in 0..inst.len() {
            let time = inst.t0 + t as f64 * inst.dt;
            w.write_record([
                inst.driver_id.as_str(),
                inst.instance_id.as_str(),
                &time.to_string(),
                &inst.v[t].to_string(),
                &inst.dv[t].to_string(),
                &inst.s[t].to_string(),
                &inst.a_obs[t].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-driver ground truth, serialized as `{driver_id: {v0, T, ...}}`.
pub type GroundTruth = BTreeMap<String, IdmParams>;

/// Synthetic dataset together with the parameters that generated it.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

/// Simulates `n_instances_per_driver` episodes per driver behind the given
/// leader profiles and adds Gaussian noise of scale `noise_std` to the
/// recorded accelerations.
///
/// Instance `j` of driver `d` follows profile `(d * n_instances_per_driver + j)
/// % leader_profiles.len()` and starts in equilibrium behind the leader's
/// initial speed (capped at 90% of the driver's `v0`).
pub fn generate_synthetic(
    true_params: &[(String, IdmParams)],
    leader_profiles: &[Vec<f64>],
    noise_std: f64,
    n_instances_per_driver: usize,
    dt: f64,
    seed: u64,
) -> Result<SyntheticData, DataError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DataError::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(DataError::InvalidConfig(format!("noise_std must be >= 0, got {noise_std}")));
    }
    if leader_profiles.is_empty() || leader_profiles.iter().any(|p| p.len() < 2) {
        return Err(DataError::InvalidConfig(
            "need at least one leader profile with 2 or more samples".into(),
        ));
    }
    let mut instances = Vec::new();
    let mut truth = GroundTruth::new();
    for (d, (driver_id, params)) in true_params.iter().enumerate() {
        params.validate().map_err(|e| DataError::InvalidConfig(format!("driver {driver_id}: {e}")))?;
        truth.insert(driver_id.clone(), *params);
        for j in 0..n_instances_per_driver {
            let k = d * n_instances_per_driver + j;
            let leader = &leader_profiles[k % leader_profiles.len()];
            let sim_err = |source| DataError::Simulation {
                driver_id: driver_id.clone(),
                instance: j,
                source,
            };
            let v_init = leader[0].min(0.9 * params.v0).max(0.0);
            let s_init = idm::equilibrium_gap(params, v_init)
                .ok_or_else(|| sim_err(IdmError::InvalidState("no equilibrium gap".into())))?;
            let traj = idm::simulate_forward(
                params,
                leader,
                &KinematicState::new(v_init, v_init - leader[0], s_init),
                dt,
            )
            .map_err(sim_err)?;
            let mut a_obs = traj.a;
            if noise_std > 0.0 {
                let mut rng = stream_rng(seed, stream::SYNTH_NOISE, k as u64);
                for a in a_obs.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *a += noise_std * z;
                }
            }
            instances.push(CfInstance {
                driver_id: driver_id.clone(),
                instance_id: format!("i{j:02}"),
                t0: 0.0,
                dt,
                v: traj.v,
                dv: traj.dv,
                s: traj.s,
                a_obs,
            });
        }
    }
    Ok(SyntheticData {
        dataset: Dataset::new(instances),
        truth,
    })
}

/// Draws heterogeneous driver parameters around `center`.
///
/// Strictly positive parameters get multiplicative log-normal jitter of scale
/// `spread`; the nonnegative ones (`T`, `s0`) likewise when nonzero. `s1`,
/// whose customary value is 0, is drawn uniformly from `[0.1, 0.5]` m so the
/// truth sits away from the boundary of its support.
pub fn sample_driver_params(
    n_drivers: usize,
    center: &IdmParams,
    spread: f64,
    seed: u64,
) -> Vec<(String, IdmParams)> {
    let mut rng = stream_rng(seed, stream::SYNTH_PARAMS, 0);
    let width = (n_drivers.max(1) - 1).to_string().len().max(2);
    (0..n_drivers)
        .map(|d| {
            let c = center.to_array();
            let mut p = [0.0; 7];
            for i in 0..7 {
                p[i] = if i == 6 {
                    rng.random_range(0.1..0.5)
                } else {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c[i] * (spread * z).exp()
                };
            }
            (format!("d{d:0width$}"), IdmParams::from_array(p))
        })
        .collect()
}

/// Random smooth leader speed profiles: piecewise-constant accelerations held
/// for 1.5-4 s, drawn from `[-1.0, 0.8]` m/s^2, with speed clipped to
/// `[0, v_max]`.
pub fn random_leader_profiles(
    n_profiles: usize,
    n_steps: usize,
    dt: f64,
    v_max: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    (0..n_profiles)
        .map(|k| {
            let mut rng = stream_rng(seed, stream::SYNTH_LEADERS, k as u64);
            let mut v = rng.random_range(0.3 * v_max..0.9 * v_max);
            let mut out = Vec::with_capacity(n_steps);
            let mut accel = 0.0;
            let mut hold = 0.0;
            for _ in 0..n_steps {
                if hold <= 0.0 {
                    accel = rng.random_range(-1.0..0.8);
                    hold = rng.random_range(1.5..4.0);
                }
                out.push(v);
                v = (v + accel * dt).clamp(0.0, v_max);
                hold -= dt;
            }
            out
        })
        .collect()
}
