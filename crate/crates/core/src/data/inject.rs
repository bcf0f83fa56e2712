use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DataError, FeatureId, Instance, Label};
use crate::tensor::RngState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnomalyMode {
    /// Every id redrawn uniformly; attribute lengths kept.
    RandomIds,
    /// A training instance copied verbatim into the test position.
    CopyTrain,
    /// One attribute emptied.
    DeleteAttribute,
    /// One attribute's ids redrawn uniformly.
    ReplaceAttribute,
}

impl AnomalyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyMode::RandomIds => "random_ids",
            AnomalyMode::CopyTrain => "copy_train",
            AnomalyMode::DeleteAttribute => "delete_attribute",
            AnomalyMode::ReplaceAttribute => "replace_attribute",
        }
    }
}

impl fmt::Display for AnomalyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnomalyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random_ids" => Ok(AnomalyMode::RandomIds),
            "copy_train" => Ok(AnomalyMode::CopyTrain),
            "delete_attribute" => Ok(AnomalyMode::DeleteAttribute),
            "replace_attribute" => Ok(AnomalyMode::ReplaceAttribute),
            other => Err(format!("unknown anomaly mode {other:?}")),
        }
    }
}

fn random_ids(rng: &mut RngState, len: usize, dimension: usize) -> Vec<FeatureId> {
    (0..len.max(1)).map(|_| rng.below(dimension)).collect()
}

fn corrupt(
    original: &Instance,
    train_pool: &[Instance],
    mode: AnomalyMode,
    dimension: usize,
    rng: &mut RngState,
) -> Instance {
    let mut out = original.clone();
    match mode {
        AnomalyMode::RandomIds => {
            for attr in &mut out.attributes {
                *attr = random_ids(rng, attr.len(), dimension);
            }
        }
        AnomalyMode::CopyTrain => {
            let donor = &train_pool[rng.below(train_pool.len())];
            out.attributes = donor.attributes.clone();
        }
        AnomalyMode::DeleteAttribute => {
            let a = rng.below(out.attributes.len());
            out.attributes[a].clear();
        }
        AnomalyMode::ReplaceAttribute => {
            let a = rng.below(out.attributes.len());
            let len = out.attributes[a].len();
            out.attributes[a] = random_ids(rng, len, dimension);
        }
    }
    out.label = Label::Anomalous;
    out
}

/// Replaces `count` uniformly chosen positions of `test` with anomalies of a
/// single `mode`. Replaced instances keep their timestamp.
pub fn inject_anomalies(
    test: &[Instance],
    train_pool: &[Instance],
    mode: AnomalyMode,
    count: usize,
    dimension: usize,
    seed: u64,
) -> Result<Vec<Instance>, DataError> {
    inject_mixed(test, train_pool, &[mode], count, dimension, seed)
}

/// Like [`inject_anomalies`], but each replaced position draws its mode
/// uniformly from `modes`.
pub fn inject_mixed(
    test: &[Instance],
    train_pool: &[Instance],
    modes: &[AnomalyMode],
    count: usize,
    dimension: usize,
    seed: u64,
) -> Result<Vec<Instance>, DataError> {
    if count > test.len() {
        return Err(DataError::Config(format!(
            "cannot inject {count} anomalies into {} test instances",
            test.len()
        )));
    }
    if modes.is_empty() {
        return Err(DataError::Config("no anomaly mode given".into()));
    }
    if modes.contains(&AnomalyMode::CopyTrain) && train_pool.is_empty() {
        return Err(DataError::Config(
            "copy_train anomalies need a non-empty training pool".into(),
        ));
    }
    if dimension == 0 {
        return Err(DataError::Config("dimension must be positive".into()));
    }
    let mut rng = RngState::new(seed).derive("inject");
    let mut out = test.to_vec();
    let mut positions = rng.sample_indices(test.len(), count);
    positions.sort_unstable();
    for pos in positions {
        let mode = modes[rng.below(modes.len())];
        out[pos] = corrupt(&test[pos], train_pool, mode, dimension, &mut rng);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticParams};

    fn sample() -> (Vec<Instance>, Vec<Instance>) {
        let all = generate_synthetic(&SyntheticParams::default(), 1);
        let (train, test) = all.split_at(9000);
        (train.to_vec(), test.to_vec())
    }

    #[test]
    fn zero_count_is_identity() {
        let (train, test) = sample();
        let out = inject_anomalies(&test, &train, AnomalyMode::RandomIds, 0, 30, 4).unwrap();
        assert_eq!(out, test);
    }

    #[test]
    fn synthetic_protocol_counts() {
        let (train, test) = sample();
        let modes = [AnomalyMode::RandomIds, AnomalyMode::CopyTrain];
        let out = inject_mixed(&test, &train, &modes, 1000, 30, 4).unwrap();
        assert_eq!(out.len(), 2000);
        let anomalous = out.iter().filter(|i| i.label.is_anomalous()).count();
        assert_eq!(anomalous, 1000);
        assert_eq!(out.len() - anomalous, 1000);
        for (a, b) in out.iter().zip(&test) {
            assert_eq!(a.timestamp, b.timestamp);
        }
    }

    #[test]
    fn delete_attribute_empties_exactly_one() {
        let (train, test) = sample();
        let out = inject_anomalies(&test[..1], &train, AnomalyMode::DeleteAttribute, 1, 30, 9)
            .unwrap();
        let empties = out[0].attributes.iter().filter(|a| a.is_empty()).count();
        assert_eq!(empties, 1);
        let unchanged = out[0]
            .attributes
            .iter()
            .zip(&test[0].attributes)
            .filter(|(a, b)| a == b)
            .count();
        assert_eq!(unchanged, 2);
        assert_eq!(out[0].label, Label::Anomalous);
    }

    #[test]
    fn copy_train_uses_training_rows() {
        let (train, test) = sample();
        let out = inject_anomalies(&test, &train, AnomalyMode::CopyTrain, 50, 30, 2).unwrap();
        for inst in out.iter().filter(|i| i.label.is_anomalous()) {
            assert!(train.iter().any(|t| t.attributes == inst.attributes));
        }
    }

    #[test]
    fn copy_train_without_pool_is_config_error() {
        let (_, test) = sample();
        let err = inject_anomalies(&test, &[], AnomalyMode::CopyTrain, 3, 30, 2).unwrap_err();
        assert!(matches!(err, DataError::Config(_)));
    }

    #[test]
    fn too_many_anomalies_rejected() {
        let (train, test) = sample();
        assert!(inject_anomalies(&test[..5], &train, AnomalyMode::RandomIds, 6, 30, 0).is_err());
    }

    #[test]
    fn replace_attribute_keeps_other_attributes() {
        let (train, test) = sample();
        let out = inject_anomalies(&test, &train, AnomalyMode::ReplaceAttribute, 2000, 30, 8)
            .unwrap();
        for (a, b) in out.iter().zip(&test) {
            let same = a.attributes.iter().zip(&b.attributes).filter(|(x, y)| x == y).count();
            assert!(same >= 2);
            assert!(a.attributes.iter().all(|attr| attr.len() == 1 && attr[0] < 30));
        }
    }
}
