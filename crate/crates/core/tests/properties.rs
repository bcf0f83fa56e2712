use proptest::prelude::*;

use catstream_core::data::{
    blockify, format_dataset, generate_synthetic, inject_mixed, label_blocks, parse_dataset, AnomalyMode,
    SyntheticParams, SYNTHETIC_DIMENSION,
};
use catstream_core::scoring::{auroc, roc_area, score_block, score_instance};
use catstream_core::{Instance, Label};

fn stream(periods: usize, seed: u64) -> Vec<Instance> {
    let params = SyntheticParams { n_periods: periods, period: 10, noise_frac: 0.1 };
    generate_synthetic(&params, seed)
}

fn mode_set() -> impl Strategy<Value = Vec<AnomalyMode>> {
    proptest::sample::subsequence(
        vec![AnomalyMode::RandomIds, AnomalyMode::CopyTrain, AnomalyMode::DeleteAttribute, AnomalyMode::ReplaceAttribute],
        1..=4,
    )
}

/// Scores with some forced ties, and at least one member of each class.
fn labeled() -> impl Strategy<Value = Vec<(f64, bool)>> {
    proptest::collection::vec((0u8..12, any::<bool>()), 2..60).prop_map(|mut v| {
        v[0].1 = true;
        v[1].1 = false;
        v.into_iter().map(|(s, l)| (f64::from(s) / 4.0 - 1.0, l)).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn synthetic_is_pure(periods in 1usize..6, seed in any::<u64>()) {
        prop_assert_eq!(stream(periods, seed), stream(periods, seed));
    }

    #[test]
    fn injection_keeps_length_and_marks_count(seed in any::<u64>(), frac in 0.0f64..=1.0, modes in mode_set()) {
        let all = stream(4, seed);
        let (train, test) = all.split_at(25);
        let count = (frac * test.len() as f64) as usize;
        let out = inject_mixed(test, train, &modes, count, SYNTHETIC_DIMENSION, seed).unwrap();
        prop_assert_eq!(out.len(), test.len());
        prop_assert_eq!(out.iter().filter(|i| i.label == Label::Anomalous).count(), count);
        for (before, after) in test.iter().zip(&out) {
            prop_assert_eq!(before.timestamp, after.timestamp);
            if after.label == Label::Normal {
                prop_assert_eq!(before, after);
            }
        }
    }

    #[test]
    fn relabeling_blocks_is_idempotent(seed in any::<u64>(), size in 1usize..12) {
        let all = stream(3, seed);
        let test = inject_mixed(&all, &[], &[AnomalyMode::RandomIds], 11, SYNTHETIC_DIMENSION, seed).unwrap();
        let once = blockify(&test, size).unwrap();
        let twice = label_blocks(once.clone());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn dataset_text_round_trips(seed in any::<u64>()) {
        let all = stream(2, seed);
        let test = inject_mixed(&all, &all, &[AnomalyMode::DeleteAttribute, AnomalyMode::CopyTrain], 7, SYNTHETIC_DIMENSION, seed).unwrap();
        prop_assert_eq!(parse_dataset(&format_dataset(&test)).unwrap(), test);
    }

    #[test]
    fn auroc_ignores_monotone_transforms(scores in labeled(), scale in 0.01f64..100.0, shift in -10.0f64..10.0) {
        let base = auroc(&scores).unwrap();
        let affine: Vec<(f64, bool)> = scores.iter().map(|&(s, l)| (scale * s + shift, l)).collect();
        let cubed: Vec<(f64, bool)> = scores.iter().map(|&(s, l)| (s.powi(3) + s.exp(), l)).collect();
        prop_assert_eq!(auroc(&affine).unwrap(), base);
        prop_assert_eq!(auroc(&cubed).unwrap(), base);
    }

    #[test]
    fn rank_and_curve_areas_agree(scores in labeled()) {
        prop_assert!((auroc(&scores).unwrap() - roc_area(&scores).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn scores_are_nonnegative(
        g in 0.0f64..50.0,
        d in 0.0f64..50.0,
        instances in proptest::collection::vec(0.0f64..50.0, 1..20),
        beta in 0.0f64..5.0,
        gamma in 0.0f64..5.0,
        no_blockloss in any::<bool>(),
    ) {
        prop_assert!(score_instance(g, d, beta) >= 0.0);
        prop_assert!(score_block(g, d, &instances, beta, gamma, no_blockloss) >= 0.0);
    }
}
