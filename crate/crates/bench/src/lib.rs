//! Shared fixtures for the benchmarks.

use cfcal_core::data::{generate_synthetic, random_leader_profiles, sample_driver_params};
use cfcal_core::{Dataset, IdmParams};

/// Synthetic dataset of `n_drivers` drivers with `n_instances` episodes of
/// `n_steps` samples each.
pub fn dataset(n_drivers: usize, n_instances: usize, n_steps: usize) -> Dataset {
    let truth = sample_driver_params(n_drivers, &IdmParams::LITERATURE, 0.25, 1);
    let leaders = random_leader_profiles(n_drivers * n_instances, n_steps, 0.1, 8.0, 1);
    generate_synthetic(&truth, &leaders, 0.1, n_instances, 0.1, 1)
        .expect("benchmark scenario is collision free")
        .dataset
}
