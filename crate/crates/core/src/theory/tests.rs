use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::{Architecture, ModelConfig, ParamSet};
use crate::numgrad::Tensor;
use crate::pipeline::NightInstance;
use crate::train::{PretrainConfig, TrainConfig};
use crate::Error;

fn scalar_params(w: f64) -> ParamSet<f64> {
    let mut p = ParamSet::new();
    p.insert("w", Tensor::vector(vec![w]));
    p.insert("head.w", Tensor::vector(vec![0.3]));
    p
}

#[test]
fn linear_representation_has_slope_two() {
    let rep = |p: &ParamSet<f64>, xs: &[f64]| -> crate::Result<Vec<Vec<f64>>> {
        let w = p.get("w").unwrap().data()[0];
        Ok(xs.iter().map(|x| vec![w * x]).collect())
    };
    let est = estimate_lipschitz_with(rep, &scalar_params(0.7), &[2.0], 5, 1e-3, 1).unwrap();
    assert!((est.l_hat - 2.0).abs() < 1e-9, "{est:?}");
    assert_eq!(est.ratios.len(), 5);
}

#[test]
fn head_only_dependence_is_degenerate() {
    let rep = |p: &ParamSet<f64>, xs: &[f64]| -> crate::Result<Vec<Vec<f64>>> {
        let h = p.get("head.w").unwrap().data()[0];
        Ok(xs.iter().map(|x| vec![h * x]).collect())
    };
    let err = estimate_lipschitz_with(rep, &scalar_params(0.7), &[2.0], 3, 1e-3, 1).unwrap_err();
    assert!(matches!(err, Error::Numeric(_)), "{err}");
}

#[test]
fn non_finite_representation_is_numeric_error() {
    let rep = |p: &ParamSet<f64>, xs: &[f64]| -> crate::Result<Vec<Vec<f64>>> {
        let w = p.get("w").unwrap().data()[0];
        Ok(xs.iter().map(|x| vec![(w * x).exp()]).collect())
    };
    let err = estimate_lipschitz_with(rep, &scalar_params(0.0), &[1.0], 3, 1e6, 1).unwrap_err();
    assert!(matches!(err, Error::Numeric(_)), "{err}");
    assert!(estimate_lipschitz_with(rep, &scalar_params(0.0), &[1.0], 3, 0.0, 1).is_err());
}

fn tiny_arch(heads: usize) -> Architecture {
    Architecture::from_dims(
        ModelConfig {
            gru_hidden: 3,
            static_widths: vec![3, 1],
            trunk_widths: vec![],
            head_classes: heads,
            normalize_representation: true,
        },
        2,
        2,
    )
    .unwrap()
}

fn random_instances(n: usize, seed: u64) -> Vec<NightInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| NightInstance {
            patient_id: format!("p{i}"),
            day_index: 3,
            instance_index: i,
            temporal: Tensor::new(vec![9, 2], (0..18).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap(),
            statics: vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
            label: u8::from(i % 3 == 0),
        })
        .collect()
}

#[test]
fn estimate_grows_with_instances_and_probes() {
    let arch = tiny_arch(2);
    let params = arch.init_params::<f64>(4);
    let xs = random_instances(24, 2);
    let mut prev = 0.0;
    for n in [1, 4, 12, 24] {
        let est = estimate_lipschitz(&arch, &params, &xs[..n], 8, 1e-4, 9).unwrap();
        assert!(est.l_hat >= prev);
        prev = est.l_hat;
    }
    let few = estimate_lipschitz(&arch, &params, &xs, 4, 1e-4, 9).unwrap();
    let many = estimate_lipschitz(&arch, &params, &xs, 12, 1e-4, 9).unwrap();
    assert!(many.l_hat >= few.l_hat);
    assert_eq!(&many.ratios[..4], &few.ratios[..]);
    assert_eq!(few, estimate_lipschitz(&arch, &params, &xs, 4, 1e-4, 9).unwrap());
}

#[test]
fn unchanged_parameters_never_violate() {
    let arch = tiny_arch(2);
    let params = arch.init_params::<f64>(1);
    let xs = random_instances(30, 3);
    let all = check_theorem1(&arch, &params, &params, &xs, PairPlan::All, 0).unwrap();
    assert_eq!(all.pairs_checked, 30 * 29 / 2);
    assert_eq!(all.violations, 0);
    // margin reduces to d0/2 + 1/32, smallest for the closest pair
    assert!(all.worst_margin >= THEOREM_SLACK);
    let sampled = check_theorem1(&arch, &params, &params, &xs, PairPlan::Sample(1000), 5).unwrap();
    assert_eq!((sampled.pairs_checked, sampled.violations), (1000, 0));
}

#[test]
fn duplicate_points_satisfy_the_bound_vacuously() {
    let r = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
    let moved = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
    let c = check_theorem1_reps(&r, &moved, PairPlan::All, 0).unwrap();
    assert_eq!(c.violations, 0);
    assert!((c.worst_margin - THEOREM_SLACK).abs() < 1e-15);
}

#[test]
fn collapse_is_reported_as_violation() {
    let r = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
    let collapsed = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
    let c = check_theorem1_reps(&r, &collapsed, PairPlan::All, 0).unwrap();
    assert_eq!(c.violations, 1);
    // 0 - (4 - 1 - 1/32)
    assert!((c.worst_margin + 3.0 - THEOREM_SLACK).abs() < 1e-12);
}

#[test]
fn corollary_constant_and_orthonormal_case() {
    assert!((corollary_bound_constant() - (2f64.sqrt() / 4.0 + 1.0 / 64.0)).abs() < 1e-12);
    assert!(corollary_bound_constant() <= COROLLARY_LIMIT);
    let basis: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let c = check_corollary1_reps(&basis, &basis, 0.0).unwrap();
    assert_eq!((c.m0, c.m_star), (0.0, 0.0));
    assert!(c.bound_ok);

    // collapsing orthogonal points onto one direction breaks the bound
    let same4 = vec![vec![1.0, 0.0, 0.0, 0.0]; 4];
    let c = check_corollary1_reps(&basis, &same4, 0.0).unwrap();
    assert!((c.m_star - 1.0).abs() < 1e-15 && !c.bound_ok);
    // a correlated start widens the budget by |m0|
    let c = check_corollary1_reps(&same4, &same4, 0.0).unwrap();
    assert!((c.m0 - 1.0).abs() < 1e-15 && c.bound_ok);
}

#[test]
fn corollary_requires_unit_norm() {
    let r = vec![vec![2.0, 0.0], vec![0.0, 1.0]];
    let err = check_corollary1_reps(&r, &r, 0.02).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn mean_inner_product_matches_pair_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let v: Vec<Vec<f64>> = (0..9).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut acc = 0.0;
    for i in 0..9 {
        for j in 0..9 {
            if i != j {
                acc += v[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
    assert!((mean_pairwise_inner(&v).unwrap() - acc / 72.0).abs() < 1e-12);
}

#[test]
fn protocol_end_to_end_on_toy_set() {
    let xs = random_instances(40, 11);
    let config = TheoryConfig {
        model: ModelConfig {
            gru_hidden: 4,
            static_widths: vec![3, 1],
            trunk_widths: vec![],
            head_classes: 2,
            normalize_representation: true,
        },
        pretrain: PretrainConfig {
            epochs: 40,
            batch_size: 16,
            learning_rate: 1e-2,
            seed: 0,
        },
        finetune: TrainConfig {
            epochs: 5,
            batch_size: 16,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        },
        n_probes: 8,
        probe_instances: 40,
        ..TheoryConfig::default()
    };
    let run = theory_protocol(&xs, 2, 2, &config, 3).unwrap();
    let r = &run.report;
    assert!((r.gamma * 16.0 * r.lipschitz.l_hat - 1.0).abs() < 1e-12);
    assert!(r.final_distance <= r.gamma + 1e-9);
    assert_eq!(r.theorem.pairs_checked, 40 * 39 / 2);
    assert_eq!(r.theorem.violations, 0, "{r:?}");
    assert!(r.corollary.bound_ok);
    let text = r.to_text(Some("run test"));
    for key in ["L_hat", "gamma", "pairs", "violations", "worst_margin", "m0", "m_star", "bound_ok"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{key} = "))), "{key} missing");
    }
    assert!(text.starts_with("# run test\n"));
    let again = theory_protocol(&xs, 2, 2, &config, 3).unwrap();
    assert_eq!(again.report.to_text(None), r.to_text(None));
}

#[test]
fn protocol_tags_failing_stage() {
    let xs = random_instances(5, 1);
    let config = TheoryConfig {
        finetune: TrainConfig {
            learning_rate: 1.0,
            epochs: 1,
            ..TrainConfig::default()
        },
        model: ModelConfig {
            gru_hidden: 2,
            static_widths: vec![1],
            trunk_widths: vec![],
            head_classes: 2,
            normalize_representation: true,
        },
        pretrain: PretrainConfig {
            epochs: 1,
            ..PretrainConfig::default()
        },
        ..TheoryConfig::default()
    };
    let err = theory_protocol(&xs, 2, 2, &config, 0).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "finetune", .. }), "{err}");
}
