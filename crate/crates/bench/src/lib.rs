//! Benchmark fixtures shared by the criterion targets.

use catstream_core::data::{generate_synthetic, inject_anomalies, split_sequential, AnomalyMode, SyntheticParams, SYNTHETIC_DIMENSION};
use catstream_core::{Instance, ModelDims};

pub const DIMS: ModelDims = ModelDims { dimension: SYNTHETIC_DIMENSION, attributes: 3 };

/// 1000 training instances and 500 test instances with 100 anomalies.
pub fn fixture() -> (Vec<Instance>, Vec<Instance>) {
    let all = generate_synthetic(&SyntheticParams { n_periods: 30, period: 50, noise_frac: 0.1 }, 0);
    let (train, test) = split_sequential(&all, 1000).expect("split");
    let test = inject_anomalies(&test, &train, AnomalyMode::RandomIds, 100, SYNTHETIC_DIMENSION, 0).expect("inject");
    (train, test)
}
