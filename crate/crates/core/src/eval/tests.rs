use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::cohort::{generate_cohort, GeneratorConfig};
use crate::model::ModelConfig;
use crate::pipeline::{extract_dataset, stratified_kfold};
use crate::train::{FinetuneConfig, PretrainConfig, TrainConfig};

fn brute_force(scores: &[Scored]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for p in scores.iter().filter(|s| s.1 == 1) {
        for n in scores.iter().filter(|s| s.1 == 0) {
            pairs += 1.0;
            if p.0 > n.0 {
                wins += 1.0;
            } else if p.0 == n.0 {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[test]
fn auroc_examples() {
    assert_eq!(auroc(&[(0.9, 1), (0.8, 1), (0.1, 0)]).unwrap(), 1.0);
    assert_eq!(auroc(&[(0.3, 1), (0.3, 0), (0.3, 0)]).unwrap(), 0.5);
    let hand = [(0.9, 1), (0.4, 1), (0.5, 0), (0.1, 0), (0.3, 0)];
    assert!((auroc(&hand).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    assert!(matches!(auroc(&[(0.2, 1)]), Err(crate::Error::UndefinedMetric(_))));
}

#[test]
fn auroc_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let n = rng.random_range(2..=200);
        let mut scores: Vec<Scored> = (0..n)
            .map(|_| ((rng.random_range(0..20) as f64) / 20.0, u8::from(rng.random_bool(0.4))))
            .collect();
        scores[0].1 = 1;
        scores[1].1 = 0;
        assert!((auroc(&scores).unwrap() - brute_force(&scores)).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn auroc_ignores_monotone_transforms(
        raw in prop::collection::vec((-3.0f64..3.0, any::<bool>()), 2..60),
    ) {
        let mut scores: Vec<Scored> = raw.iter().map(|&(s, y)| (s, u8::from(y))).collect();
        scores[0].1 = 1;
        scores[1].1 = 0;
        let warped: Vec<Scored> = scores.iter().map(|&(s, y)| ((2.0 * s).exp() + 7.0, y)).collect();
        prop_assert!((auroc(&scores).unwrap() - auroc(&warped).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn confusion_and_rates() {
    let c = Confusion { tp: 390, tn: 15_602, fp: 25_481 - 15_602, fn_: 471 - 390 };
    assert!((c.sensitivity().unwrap() - 0.8280).abs() < 5e-4);
    assert!((c.specificity().unwrap() - 0.6123).abs() < 5e-4);
    let only_neg = confusion(&[(0.7, 0), (0.2, 0)], 0.5);
    assert_eq!(only_neg, Confusion { tp: 0, tn: 1, fp: 1, fn_: 0 });
    assert_eq!(only_neg.sensitivity(), None);
    // Ties at the threshold predict positive.
    assert_eq!(confusion(&[(0.5, 1)], 0.5).tp, 1);
}

#[test]
fn roc_runs_corner_to_corner() {
    let pts = roc_points(&[(0.9, 1), (0.4, 1), (0.5, 0), (0.1, 0), (0.3, 0), (0.4, 0)]).unwrap();
    assert_eq!(pts.first(), Some(&(0.0, 0.0)));
    assert_eq!(pts.last(), Some(&(1.0, 1.0)));
    assert!(pts.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    // Area under the step curve (trapezoids handle ties) equals AUROC.
    let area: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum();
    assert!((area - auroc(&[(0.9, 1), (0.4, 1), (0.5, 0), (0.1, 0), (0.3, 0), (0.4, 0)]).unwrap()).abs() < 1e-12);
}

#[test]
fn sample_standard_deviation() {
    let (m, s) = mean_std(&[Some(1.0), Some(3.0), None]);
    assert_eq!(m, Some(2.0));
    assert!((s.unwrap() - 2.0_f64.sqrt()).abs() < 1e-15);
    assert_eq!(mean_std(&[Some(1.0)]), (Some(1.0), None));
}

fn tiny_cv() -> CvConfig {
    let short = |lr| TrainConfig {
        epochs: 2,
        batch_size: 32,
        learning_rate: lr,
        seed: 0,
        ..TrainConfig::default()
    };
    CvConfig {
        model: ModelConfig {
            gru_hidden: 4,
            static_widths: vec![4, 1],
            trunk_widths: vec![8],
            head_classes: 2,
            normalize_representation: false,
        },
        baseline: short(1e-3),
        pretrain: PretrainConfig {
            epochs: 2,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
        },
        finetune: FinetuneConfig {
            train: short(1e-4),
            ..FinetuneConfig::default()
        },
        target_per_class: 60,
        undersample_target: 60,
        ..CvConfig::default()
    }
}

#[test]
fn cross_validation_sums_and_repeats() {
    let records = generate_cohort(&GeneratorConfig {
        n_patients: 40,
        seed: 3,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let (ds, _) = extract_dataset(&records).unwrap();
    let split = stratified_kfold(&ds.instances, 3, 1).unwrap();
    let config = tiny_cv();
    let mut reports = Vec::new();
    for arm in Arm::ALL {
        let r = cross_validate(&ds, &split, arm, &config, 9).unwrap();
        assert_eq!(r.folds.len(), 3);
        assert_eq!(r.counts.tp, r.folds.iter().map(|f| f.counts.tp).sum::<usize>());
        assert_eq!(r.counts.total(), ds.instances.len());
        let positives: usize = r.folds.iter().map(|f| f.counts.tp + f.counts.fn_).sum();
        assert_eq!(positives, ds.class_stats().n_pos);
        reports.push((arm, r));
    }
    let again = cross_validate(&ds, &split, Arm::Nprl, &config, 9).unwrap();
    assert_eq!(again, reports[1].1);

    let parallel = CvConfig { workers: 3, ..config.clone() };
    assert_eq!(cross_validate(&ds, &split, Arm::Baseline, &parallel, 9).unwrap(), reports[0].1);

    let csv = report_csv(&reports, Some("config=t seed=9"));
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], REPORT_COLUMNS.join(","));
    assert_eq!(rows.len(), 1 + 4 * (3 + 1));
    assert!(rows.iter().filter(|r| r.split(',').nth(1) == Some("ALL")).count() == 4);
    assert!(rows.iter().all(|r| r.split(',').count() == REPORT_COLUMNS.len()));

    let dir = tempfile::tempdir().unwrap();
    emit_report(&reports, dir.path(), None).unwrap();
    let roc = std::fs::read_to_string(dir.path().join(ROC_FILE)).unwrap();
    assert!(roc.starts_with("[baseline]\n0.000000 0.000000\n"));
    assert_eq!(roc.lines().filter(|l| l.starts_with('[')).count(), 4);
}

#[test]
fn mismatched_split_is_rejected() {
    let records = generate_cohort(&GeneratorConfig {
        n_patients: 30,
        seed: 3,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let (ds, _) = extract_dataset(&records).unwrap();
    let mut split = stratified_kfold(&ds.instances, 2, 1).unwrap();
    split.folds.pop();
    assert!(cross_validate(&ds, &split, Arm::Baseline, &tiny_cv(), 1).is_err());
}
