//! The Intelligent Driver Model.
//!
//! ```text
//! a(v, dv, s) = a_max * [1 - (v / v0)^delta - (s*(v, dv) / s)^2]
//! s*(v, dv)   = s0 + s1 * sqrt(v / v0) + T * v + v * dv / (2 * sqrt(a_max * b))
//! ```
//!
//! `dv` is follower speed minus leader speed, so a closing gap (`dv > 0`)
//! raises the desired gap. `s*` is not clamped at zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::CfInstance;
use crate::dual::Scalar;

/// Number of IDM parameters.
pub const N_PARAMS: usize = 7;

/// Parameter names in vector order.
pub const PARAM_NAMES: [&str; N_PARAMS] = ["v0", "T", "a", "b", "delta", "s0", "s1"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdmError {
    #[error("invalid IDM parameter {name} = {value}: must be {rule}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        rule: &'static str,
    },
    #[error("invalid kinematic state: {0}")]
    InvalidState(String),
    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),
    #[error("gap collapsed to {gap} m at step {step}")]
    GapCollapse { step: usize, gap: f64 },
}

/// The seven IDM parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// Desired velocity (m/s).
    pub v0: f64,
    /// Safe time headway (s).
    #[serde(rename = "T")]
    pub time_headway: f64,
    /// Maximum acceleration (m/s^2).
    #[serde(rename = "a")]
    pub max_accel: f64,
    /// Comfortable deceleration (m/s^2).
    #[serde(rename = "b")]
    pub comfort_decel: f64,
    /// Acceleration exponent.
    pub delta: f64,
    /// Jam distance (m).
    pub s0: f64,
    /// Second jam distance term (m).
    pub s1: f64,
}

impl IdmParams {
    /// Commonly cited defaults `{6.5, 1.6, 0.73, 1.67, 4, 2, 0}`; used as prior
    /// centre, regularization anchor and baseline.
    pub const LITERATURE: IdmParams = IdmParams {
        v0: 6.5,
        time_headway: 1.6,
        max_accel: 0.73,
        comfort_decel: 1.67,
        delta: 4.0,
        s0: 2.0,
        s1: 0.0,
    };

    pub fn from_array(v: [f64; N_PARAMS]) -> Self {
        Self {
            v0: v[0],
            time_headway: v[1],
            max_accel: v[2],
            comfort_decel: v[3],
            delta: v[4],
            s0: v[5],
            s1: v[6],
        }
    }

    /// Builds parameters from a slice of length [`N_PARAMS`].
    ///
    /// Panics if the slice has the wrong length.
    pub fn from_slice(v: &[f64]) -> Self {
        let arr: [f64; N_PARAMS] = v.try_into().expect("IDM parameter vector must have 7 entries");
        Self::from_array(arr)
    }

    pub fn to_array(&self) -> [f64; N_PARAMS] {
        [
            self.v0,
            self.time_headway,
            self.max_accel,
            self.comfort_decel,
            self.delta,
            self.s0,
            self.s1,
        ]
    }

    pub fn validate(&self) -> Result<(), IdmError> {
        validate_array(&self.to_array())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }
}

impl Default for IdmParams {
    fn default() -> Self {
        Self::LITERATURE
    }
}

// (strictly positive?) per parameter, in vector order.
const POSITIVE: [bool; N_PARAMS] = [true, false, true, true, true, false, false];

pub(crate) fn validate_array(p: &[f64; N_PARAMS]) -> Result<(), IdmError> {
    for (i, &value) in p.iter().enumerate() {
        let ok = if POSITIVE[i] { value > 0.0 } else { value >= 0.0 };
        if !ok || !value.is_finite() {
            return Err(IdmError::InvalidParam {
                name: PARAM_NAMES[i],
                value,
                rule: if POSITIVE[i] {
                    "finite and > 0"
                } else {
                    "finite and >= 0"
                },
            });
        }
    }
    Ok(())
}

/// Whether parameter `index` must be strictly positive (otherwise nonnegative).
pub fn requires_positive(index: usize) -> bool {
    POSITIVE[index]
}

/// Follower state relative to its leader.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    /// Follower speed (m/s).
    pub v: f64,
    /// Follower minus leader speed (m/s).
    pub dv: f64,
    /// Bumper-to-bumper gap (m).
    pub s: f64,
}

impl KinematicState {
    pub fn new(v: f64, dv: f64, s: f64) -> Self {
        Self { v, dv, s }
    }

    pub fn validate(&self) -> Result<(), IdmError> {
        if !(self.v >= 0.0 && self.v.is_finite()) {
            return Err(IdmError::InvalidState(format!("speed {} must be >= 0", self.v)));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(IdmError::InvalidState(format!("gap {} must be > 0", self.s)));
        }
        if !self.dv.is_finite() {
            return Err(IdmError::InvalidState(format!("relative speed {} is not finite", self.dv)));
        }
        Ok(())
    }
}

/// IDM evaluator for one parameter vector, generic over the scalar type so
/// the same code yields values (`f64`) or gradients ([`crate::dual::Dual`]).
/// Terms that depend only on the parameters are computed once.
#[derive(Debug, Clone, Copy)]
pub struct IdmKernel<S> {
    inv_v0: S,
    time_headway: S,
    max_accel: S,
    delta: S,
    s0: S,
    s1: S,
    inv_two_sqrt_ab: S,
}

impl<S: Scalar> IdmKernel<S> {
    /// Parameters in vector order. No validation is performed.
    #[inline]
    pub fn new(p: &[S; N_PARAMS]) -> Self {
        let [v0, t, a, b, delta, s0, s1] = *p;
        Self {
            inv_v0: S::constant(1.0) / v0,
            time_headway: t,
            max_accel: a,
            delta,
            s0,
            s1,
            inv_two_sqrt_ab: S::constant(1.0) / ((a * b).sqrt() * 2.0),
        }
    }

    #[inline]
    pub fn desired_gap(&self, v: f64, dv: f64) -> S {
        let ratio = self.inv_v0 * v;
        self.s0 + self.s1 * ratio.sqrt_nonneg() + self.time_headway * v + self.inv_two_sqrt_ab * (v * dv)
    }

    #[inline]
    pub fn accel(&self, v: f64, dv: f64, s: f64) -> S {
        let s_star = self.desired_gap(v, dv);
        let free = S::pow_nonneg(self.inv_v0 * v, self.delta);
        let interaction = (s_star / s).square();
        self.max_accel * (S::constant(1.0) - free - interaction)
    }
}

/// Desired gap for parameters in vector order, generic over the scalar type.
pub fn desired_gap_generic<S: Scalar>(p: &[S; N_PARAMS], v: f64, dv: f64) -> S {
    IdmKernel::new(p).desired_gap(v, dv)
}

/// Acceleration for parameters in vector order, generic over the scalar type.
pub fn accel_generic<S: Scalar>(p: &[S; N_PARAMS], v: f64, dv: f64, s: f64) -> S {
    IdmKernel::new(p).accel(v, dv, s)
}

/// Desired gap `s*(v, dv)`. May be negative for strongly opening gaps.
pub fn desired_gap(p: &IdmParams, v: f64, dv: f64) -> Result<f64, IdmError> {
    p.validate()?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(IdmError::InvalidState(format!("speed {v} must be >= 0")));
    }
    Ok(desired_gap_generic(&p.to_array(), v, dv))
}

/// One-step acceleration prediction.
pub fn predict_accel(p: &IdmParams, state: &KinematicState) -> Result<f64, IdmError> {
    p.validate()?;
    state.validate()?;
    Ok(accel_generic(&p.to_array(), state.v, state.dv, state.s))
}

/// Applies [`predict_accel`] at every observed state of an instance. States are
/// the recorded ones, never rolled out.
pub fn predict_instance(p: &IdmParams, inst: &CfInstance) -> Result<Vec<f64>, IdmError> {
    p.validate()?;
    let kernel = IdmKernel::new(&p.to_array());
    Ok(inst
        .v
        .iter()
        .zip(&inst.dv)
        .zip(&inst.s)
        .map(|((&v, &dv), &s)| kernel.accel(v, dv, s))
        .collect())
}

/// Gap at which a follower at speed `v` behind an equally fast leader has
/// zero acceleration. `None` when `v >= v0` (no finite equilibrium).
pub fn equilibrium_gap(p: &IdmParams, v: f64) -> Option<f64> {
    if p.validate().is_err() || !(v >= 0.0) {
        return None;
    }
    let free = 1.0 - f64::pow_nonneg(v / p.v0, p.delta);
    if free <= 0.0 {
        return None;
    }
    let s_star = desired_gap_generic(&p.to_array(), v, 0.0);
    if s_star <= 0.0 {
        return None;
    }
    Some(s_star / free.sqrt())
}

/// Closed-loop follower trajectory behind a prescribed leader.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
    pub s: Vec<f64>,
    /// Acceleration applied at each step.
    pub a: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Integrates the follower behind `leader_speed` with semi-implicit Euler:
///
/// ```text
/// a_t     = idm(v_t, v_t - vl_t, s_t)
/// v_{t+1} = max(0, v_t + a_t dt)
/// s_{t+1} = s_t - (v_{t+1} - vl_{t+1}) dt
/// ```
///
/// The output has one entry per leader sample. `init.dv` is ignored; the
/// relative speed is always derived from the leader series.
pub fn simulate_forward(
    p: &IdmParams,
    leader_speed: &[f64],
    init: &KinematicState,
    dt: f64,
) -> Result<Trajectory, IdmError> {
    p.validate()?;
    init.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(IdmError::InvalidTimeStep(dt));
    }
    let kernel = IdmKernel::new(&p.to_array());
    let n = leader_speed.len();
    let mut traj = Trajectory {
        v: Vec::with_capacity(n),
        dv: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
    };
    let (mut v, mut s) = (init.v, init.s);
    for t in 0..n {
        let dv = v - leader_speed[t];
        let a = kernel.accel(v, dv, s);
        traj.v.push(v);
        traj.dv.push(dv);
        traj.s.push(s);
        traj.a.push(a);
        if t + 1 < n {
            v = (v + a * dt).max(0.0);
            s -= (v - leader_speed[t + 1]) * dt;
            if !(s > 0.0) {
                return Err(IdmError::GapCollapse { step: t + 1, gap: s });
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIT: IdmParams = IdmParams::LITERATURE;

    // Scalar evaluation written directly from the formulas, independent of
    // the generic code path.
    fn oracle_accel(p: &IdmParams, v: f64, dv: f64, s: f64) -> f64 {
        let s_star = p.s0
            + p.s1 * (v / p.v0).sqrt()
            + p.time_headway * v
            + v * dv / (2.0 * (p.max_accel * p.comfort_decel).sqrt());
        p.max_accel * (1.0 - (v / p.v0).powf(p.delta) - (s_star / s).powi(2))
    }

    #[test]
    fn desired_gap_at_rest_is_jam_distance() {
        assert_eq!(desired_gap(&LIT, 0.0, 0.0).unwrap(), 2.0);
    }

    #[test]
    fn desired_gap_hand_values() {
        let p = IdmParams { s1: 0.0, time_headway: 1.6, s0: 2.0, ..LIT };
        assert!((desired_gap(&p, 5.0, 0.0).unwrap() - 10.0).abs() < 1e-12);
        let expected = 2.0 + 8.0 + 5.0 / (2.0 * (0.73f64 * 1.67).sqrt());
        let got = desired_gap(&LIT, 5.0, 1.0).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 12.264).abs() < 1e-3);
    }

    #[test]
    fn desired_gap_may_be_negative() {
        let g = desired_gap(&LIT, 5.0, -20.0).unwrap();
        assert!(g < 0.0);
    }

    #[test]
    fn rejects_invalid_params() {
        let p = IdmParams { comfort_decel: 0.0, ..LIT };
        match desired_gap(&p, 1.0, 0.0) {
            Err(IdmError::InvalidParam { name, .. }) => assert_eq!(name, "b"),
            other => panic!("unexpected {other:?}"),
        }
        let p = IdmParams { s1: -0.1, ..LIT };
        assert!(predict_accel(&p, &KinematicState::new(1.0, 0.0, 10.0)).is_err());
        let p = IdmParams { v0: f64::NAN, ..LIT };
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_invalid_state() {
        assert!(predict_accel(&LIT, &KinematicState::new(-1.0, 0.0, 10.0)).is_err());
        assert!(predict_accel(&LIT, &KinematicState::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn free_road_at_desired_speed_is_zero() {
        let p = IdmParams { s1: 0.0, ..LIT };
        let a = predict_accel(&p, &KinematicState::new(p.v0, 0.0, 1e9)).unwrap();
        assert!(a.abs() < 1e-10);
    }

    #[test]
    fn full_acceleration_from_rest() {
        let a = predict_accel(&LIT, &KinematicState::new(0.0, 0.0, 1e9)).unwrap();
        assert!((a - 0.73).abs() < 1e-12);
    }

    #[test]
    fn predict_accel_matches_oracle() {
        let a = predict_accel(&LIT, &KinematicState::new(5.0, 1.0, 20.0)).unwrap();
        let expected = oracle_accel(&LIT, 5.0, 1.0, 20.0);
        assert!((a - expected).abs() < 1e-14);
        let hand = 0.73 * (1.0 - (5.0f64 / 6.5).powi(4) - (12.264f64 / 20.0).powi(2));
        assert!((a - hand).abs() < 1e-3);
    }

    #[test]
    fn predict_instance_hand_built() {
        let inst = CfInstance::new(
            "d",
            "i",
            0.1,
            vec![0.0, 3.0, 5.0],
            vec![0.0, -0.5, 1.0],
            vec![5.0, 12.0, 20.0],
            vec![0.0; 3],
        )
        .unwrap();
        let pred = predict_instance(&LIT, &inst).unwrap();
        assert_eq!(pred.len(), 3);
        for t in 0..3 {
            let o = oracle_accel(&LIT, inst.v[t], inst.dv[t], inst.s[t]);
            assert!((pred[t] - o).abs() <= 1e-12 * o.abs().max(1.0));
        }
    }

    fn bisect_equilibrium(p: &IdmParams, v: f64) -> f64 {
        let f = |s: f64| oracle_accel(p, v, 0.0, s);
        let (mut lo, mut hi) = (1e-6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn equilibrium_gap_matches_root_finding() {
        for v in [0.5, 3.0, 6.0] {
            let closed = equilibrium_gap(&LIT, v).unwrap();
            let root = bisect_equilibrium(&LIT, v);
            assert!((closed - root).abs() < 1e-8 * root, "{closed} vs {root}");
        }
        assert!(equilibrium_gap(&LIT, LIT.v0).is_none());
    }

    #[test]
    fn steady_following_stays_steady() {
        let v = 0.8 * LIT.v0;
        let s = bisect_equilibrium(&LIT, v);
        let leader = vec![v; 101];
        let traj = simulate_forward(&LIT, &leader, &KinematicState::new(v, 0.0, s), 0.1).unwrap();
        assert_eq!(traj.len(), 101);
        for &vt in &traj.v {
            assert!((vt - v).abs() < 1e-3);
        }
    }

    #[test]
    fn cruising_at_desired_speed_stays_there() {
        // Leader at v0 pulls away slowly from nothing; follower sits at v0 with
        // a huge gap so it has no reason to change speed.
        let p = IdmParams { s1: 0.0, ..LIT };
        let leader = vec![p.v0; 101];
        let traj =
            simulate_forward(&p, &leader, &KinematicState::new(p.v0, 0.0, 1e6), 0.1).unwrap();
        assert!(traj.v.iter().all(|v| (v - p.v0).abs() < 1e-3));
    }

    fn stop_scenario(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| (5.0 - 0.8 * i as f64 * dt).max(0.0)).collect()
    }

    #[test]
    fn braking_leader_does_not_cause_collision() {
        let dt = 0.1;
        let leader = stop_scenario(300, dt);
        let s = equilibrium_gap(&LIT, 5.0).unwrap();
        let traj = simulate_forward(&LIT, &leader, &KinematicState::new(5.0, 0.0, s), dt).unwrap();
        assert!(traj.s.iter().all(|&s| s > 0.0));
        assert!(traj.v.iter().all(|&v| v >= 0.0));
        assert!(*traj.v.last().unwrap() < 0.1);
    }

    #[test]
    fn halving_dt_converges() {
        // Smooth scenario sampled at three resolutions over the same horizon.
        let horizon = 10.0;
        let leader_at = |t: f64| 4.0 + (0.5 * t).sin();
        let run = |dt: f64| {
            let n = (horizon / dt).round() as usize + 1;
            let leader: Vec<f64> = (0..n).map(|i| leader_at(i as f64 * dt)).collect();
            let traj =
                simulate_forward(&LIT, &leader, &KinematicState::new(4.0, 0.0, 15.0), dt).unwrap();
            (*traj.v.last().unwrap(), *traj.s.last().unwrap())
        };
        let (v1, s1) = run(0.1);
        let (v2, s2) = run(0.05);
        let (v3, s3) = run(0.025);
        let e1 = (v1 - v2).abs() + (s1 - s2).abs();
        let e2 = (v2 - v3).abs() + (s2 - s3).abs();
        assert!(e2 < e1);
        let ratio = e1 / e2;
        assert!(ratio > 1.5 && ratio < 2.7, "ratio {ratio}");
    }

    #[test]
    fn gap_collapse_reports_step() {
        // No headway and a huge comfortable deceleration: barely brakes for a
        // stopped leader.
        let p = IdmParams { time_headway: 0.0, s0: 0.0, comfort_decel: 1000.0, ..LIT };
        let leader = vec![0.0; 50];
        let err = simulate_forward(&p, &leader, &KinematicState::new(10.0, 0.0, 5.0), 0.1)
            .unwrap_err();
        assert!(matches!(err, IdmError::GapCollapse { step, .. } if step >= 1));
    }

    #[test]
    fn simulate_rejects_bad_dt() {
        let err = simulate_forward(&LIT, &[1.0, 1.0], &KinematicState::new(1.0, 0.0, 5.0), 0.0);
        assert_eq!(err.unwrap_err(), IdmError::InvalidTimeStep(0.0));
    }
}
