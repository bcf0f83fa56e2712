use serde::{Deserialize, Serialize};

use super::{Instance, Label};
use crate::tensor::RngState;

/// Vocabulary size of the zigzag recipe; ids wrap modulo this value.
pub const SYNTHETIC_DIMENSION: usize = 30;

const STARTS: [usize; 3] = [0, 10, 20];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub n_periods: usize,
    pub period: usize,
    /// Fraction of all (instance, attribute) slots that receive a +-1 jolt.
    pub noise_frac: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            n_periods: 220,
            period: 50,
            noise_frac: 0.10,
        }
    }
}

impl SyntheticParams {
    pub fn total(&self) -> usize {
        self.n_periods * self.period
    }
}

/// Zigzag id signal `((t mod period) + start) mod 30` for starts 0, 10, 20,
/// with a `noise_frac` share of id slots moved by +-1 (wrapping).
///
/// Instances are labeled normal and timestamped by position.
pub fn generate_synthetic(params: &SyntheticParams, seed: u64) -> Vec<Instance> {
    let total = params.total();
    let mut instances: Vec<Instance> = (0..total)
        .map(|t| {
            let phase = t % params.period;
            let attributes = STARTS
                .iter()
                .map(|s| vec![(s + phase) % SYNTHETIC_DIMENSION])
                .collect();
            Instance::new(attributes, Label::Normal, t as u64)
        })
        .collect();

    let mut rng = RngState::new(seed).derive("synthetic-noise");
    let slots = total * STARTS.len();
    let amount = ((params.noise_frac * slots as f64).round() as usize).min(slots);
    for slot in rng.sample_indices(slots, amount) {
        let delta: i64 = if rng.coin() { 1 } else { -1 };
        let id = &mut instances[slot / STARTS.len()].attributes[slot % STARTS.len()][0];
        *id = (*id as i64 + delta).rem_euclid(SYNTHETIC_DIMENSION as i64) as usize;
    }
    instances
}
