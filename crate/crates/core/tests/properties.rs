use cfcal_core::data::{instance_stats, parse_trajectories, write_trajectories};
use cfcal_core::idm::{desired_gap, predict_accel};
use cfcal_core::metrics::{dataset_rmse, gaussian_kl, quantile_sorted, rmse, DriverParams};
use cfcal_core::model::{Formulation, ModelSpec};
use cfcal_core::{CfInstance, Dataset, IdmParams, KinematicState};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = IdmParams> {
    (
        1.0..40.0f64,
        0.0..3.0f64,
        0.2..4.0f64,
        0.2..5.0f64,
        1.0..8.0f64,
        0.0..5.0f64,
        0.0..2.0f64,
    )
        .prop_map(|(v0, t, a, b, d, s0, s1)| IdmParams::from_array([v0, t, a, b, d, s0, s1]))
}

fn instance(driver: usize, id: usize) -> impl Strategy<Value = CfInstance> {
    (2usize..12).prop_flat_map(move |n| {
        (
            prop::collection::vec(0.0..30.0f64, n),
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(0.5..80.0f64, n),
            prop::collection::vec(-3.0..3.0f64, n),
        )
            .prop_map(move |(v, dv, s, a)| {
                CfInstance::new(format!("d{driver}"), format!("i{id}"), 0.1, v, dv, s, a).unwrap()
            })
    })
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..4, 1usize..3).prop_flat_map(|(nd, ni)| {
        let insts: Vec<_> = (0..nd).flat_map(|d| (0..ni).map(move |i| instance(d, i))).collect();
        insts.prop_map(Dataset::new)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(data in dataset()) {
        let mut buf = Vec::new();
        write_trajectories(&data, &mut buf).unwrap();
        let back = parse_trajectories(buf.as_slice()).unwrap();
        prop_assert_eq!(back.n_instances(), data.n_instances());
        for (x, y) in back.instances().iter().zip(data.instances()) {
            prop_assert_eq!(&x.driver_id, &y.driver_id);
            prop_assert_eq!(&x.instance_id, &y.instance_id);
            prop_assert!((x.dt - y.dt).abs() < 1e-9);
            prop_assert_eq!(&x.v, &y.v);
            prop_assert_eq!(&x.dv, &y.dv);
            prop_assert_eq!(&x.s, &y.s);
            prop_assert_eq!(&x.a_obs, &y.a_obs);
        }
        let mut again = Vec::new();
        write_trajectories(&back, &mut again).unwrap();
        let third = parse_trajectories(again.as_slice()).unwrap();
        for (x, y) in third.instances().iter().zip(back.instances()) {
            prop_assert!((x.dt - y.dt).abs() < 1e-9);
            prop_assert_eq!(&x.a_obs, &y.a_obs);
            prop_assert_eq!(&x.s, &y.s);
        }
    }

    #[test]
    fn accel_increases_with_gap(p in params(), v in 0.0..30.0f64, dv in -3.0..5.0f64,
                                s in 0.5..60.0f64, ds in 0.01..20.0f64) {
        prop_assume!(desired_gap(&p, v, dv).unwrap() > 0.0);
        let a1 = predict_accel(&p, &KinematicState::new(v, dv, s)).unwrap();
        let a2 = predict_accel(&p, &KinematicState::new(v, dv, s + ds)).unwrap();
        prop_assert!(a2 > a1);
    }

    #[test]
    fn accel_decreases_with_closing_speed(p in params(), v in 0.1..30.0f64, dv in -3.0..5.0f64,
                                          ddv in 0.01..3.0f64, s in 0.5..60.0f64) {
        prop_assume!(desired_gap(&p, v, dv).unwrap() > 0.0);
        let a1 = predict_accel(&p, &KinematicState::new(v, dv, s)).unwrap();
        let a2 = predict_accel(&p, &KinematicState::new(v, dv + ddv, s)).unwrap();
        prop_assert!(a2 < a1);
    }

    #[test]
    fn accel_never_exceeds_max(p in params(), v in 0.0..40.0f64, dv in -10.0..10.0f64, s in 0.1..200.0f64) {
        let acc = predict_accel(&p, &KinematicState::new(v, dv, s)).unwrap();
        prop_assert!(acc <= p.max_accel);
    }

    #[test]
    fn latent_layout_round_trip(n in 1usize..6, form in prop::sample::select(vec![
        Formulation::Pooled, Formulation::Hierarchical, Formulation::Individual])) {
        let layout = ModelSpec::new(form, 1.0, n).unwrap().layout();
        for i in 0..layout.dim() {
            prop_assert_eq!(layout.index(layout.slot(i)), Some(i));
        }
    }

    #[test]
    fn kl_is_nonnegative_and_zero_only_at_equality(m1 in -5.0..5.0f64, s1 in 0.05..5.0f64,
                                                  m2 in -5.0..5.0f64, s2 in 0.05..5.0f64) {
        let kl = gaussian_kl(m1, s1, m2, s2).unwrap();
        prop_assert!(kl >= 0.0);
        prop_assert!(gaussian_kl(m1, s1, m1, s1).unwrap().abs() < 1e-15);
        if (m1 - m2).abs() > 1e-6 || (s1 - s2).abs() > 1e-6 {
            prop_assert!(kl > 0.0);
        }
    }

    #[test]
    fn quantiles_are_monotone(mut xs in prop::collection::vec(-1e3..1e3f64, 1..50),
                              p in 0.0..1.0f64, q in 0.0..1.0f64) {
        xs.sort_by(f64::total_cmp);
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        prop_assert!(quantile_sorted(&xs, lo) <= quantile_sorted(&xs, hi));
    }

    #[test]
    fn dataset_rmse_ignores_instance_order(data in dataset(), p in params(), seed in any::<u64>()) {
        let mut insts = data.instances().to_vec();
        let n = insts.len();
        for i in (1..n).rev() {
            insts.swap(i, (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) % (i as u64 + 1)) as usize);
        }
        let shuffled = Dataset::new(insts);
        let params = DriverParams::Shared(p);
        let a = dataset_rmse(&params, &data).unwrap();
        let b = dataset_rmse(&params, &shuffled).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn rmse_matches_brute_force(pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..40)) {
        let (pred, obs): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let mut sq = 0.0;
        for i in 0..pred.len() {
            sq += (pred[i] - obs[i]) * (pred[i] - obs[i]);
        }
        prop_assert_eq!(rmse(&pred, &obs).unwrap(), (sq / pred.len() as f64).sqrt());
    }

    #[test]
    fn instance_stats_match_brute_force(inst in instance(0, 0)) {
        let n = inst.a_obs.len() as f64;
        let mut sum = 0.0;
        for x in &inst.a_obs { sum += x; }
        let mean = sum / n;
        let mut ss = 0.0;
        for x in &inst.a_obs { ss += (x - mean) * (x - mean); }
        let st = instance_stats(&inst);
        prop_assert_eq!(st.mean_a, mean);
        prop_assert_eq!(st.std_a, (ss / (n - 1.0)).sqrt());
    }
}
