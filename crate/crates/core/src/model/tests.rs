use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numgrad::{grad_check, GradCheckConfig, NamedTensors, Tape, Tensor};

struct Toy {
    temporal: Tensor<f64>,
    statics: Vec<f64>,
}

impl ModelInput for Toy {
    fn temporal(&self) -> &Tensor<f64> {
        &self.temporal
    }
    fn statics(&self) -> &[f64] {
        &self.statics
    }
}

fn toy(rng: &mut ChaCha8Rng, t: usize, s: usize) -> Toy {
    Toy {
        temporal: Tensor::matrix(WINDOW_LEN, t, (0..WINDOW_LEN * t).map(|_| rng.random_range(0.0..1.0)).collect())
            .unwrap(),
        statics: (0..s).map(|_| rng.random_range(0.0..1.0)).collect(),
    }
}

fn small_config() -> ModelConfig {
    ModelConfig {
        gru_hidden: 3,
        static_widths: vec![4, 2, 1],
        trunk_widths: vec![5],
        head_classes: 2,
        normalize_representation: false,
    }
}

#[test]
fn paper_default_dimensions() {
    let with_statics = Architecture::from_dims(ModelConfig::default(), 11, 15).unwrap();
    assert_eq!(with_statics.rep_dim(), 4609);
    let temporal_only = Architecture::from_dims(ModelConfig::default(), 11, 0).unwrap();
    assert_eq!(temporal_only.rep_dim(), 4608);
    assert!(!temporal_only.layout().iter().any(|(n, _)| n.starts_with("static.")));
}

#[test]
fn init_is_deterministic_per_seed() {
    let arch = Architecture::from_dims(small_config(), 4, 3).unwrap();
    let a: ParamSet<f64> = arch.init_params(17);
    let b: ParamSet<f64> = arch.init_params(17);
    let c: ParamSet<f64> = arch.init_params(18);
    assert_eq!(a, b);
    assert_ne!(a, c);
    arch.check_params(&a).unwrap();
    let limit = (6.0_f64 / (4 + 3) as f64).sqrt();
    assert!(a.get("gru.fwd.w_z").unwrap().data().iter().all(|v| v.abs() <= limit));
    assert!(a.get("gru.fwd.b_z").unwrap().data().iter().all(|&v| v == 0.0));
}

fn zero_params(arch: &Architecture) -> ParamSet<f64> {
    let p: ParamSet<f64> = arch.init_params(0);
    p.zeros_like()
}

#[test]
fn gru_cell_zero_parameters_stay_zero() {
    let arch = Architecture::from_dims(small_config(), 2, 0).unwrap();
    let params = zero_params(&arch);
    let h = gru_cell(&[0.4, -0.2], &[0.0; 3], &params, "fwd").unwrap();
    assert_eq!(h, vec![0.0; 3]);
}

#[test]
fn gru_cell_saturated_update_gate_carries_state() {
    let arch = Architecture::from_dims(small_config(), 2, 0).unwrap();
    let mut params: ParamSet<f64> = arch.init_params(4);
    params.insert("gru.fwd.b_z", Tensor::vector(vec![-50.0; 3]));
    let h_prev = [0.3, -0.7, 0.1];
    let h = gru_cell(&[0.9, 0.5], &h_prev, &params, "fwd").unwrap();
    for (a, b) in h.iter().zip(h_prev) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn gru_cell_scalar_hand_evaluation() {
    let cfg = ModelConfig {
        gru_hidden: 1,
        ..small_config()
    };
    let arch = Architecture::from_dims(cfg, 1, 0).unwrap();
    let mut params = zero_params(&arch);
    params.insert("gru.fwd.w_h", Tensor::matrix(1, 1, vec![1.0]).unwrap());
    let h = gru_cell(&[1.0], &[0.0], &params, "fwd").unwrap();
    // z = r = 0.5, candidate = tanh(1), h = 0.5 * tanh(1)
    let oracle = 0.5 * 1.0_f64.tanh();
    assert!((h[0] - oracle).abs() < 1e-15);
    assert!((h[0] - 0.380797).abs() < 1e-6);
}

#[test]
fn bigru_output_shape_and_zero_params() {
    let cfg = ModelConfig {
        gru_hidden: 256,
        ..ModelConfig::default()
    };
    let arch = Architecture::from_dims(cfg, 11, 0).unwrap();
    let params: ParamSet<f64> = arch.init_params(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = toy(&mut rng, 11, 0);
    let out = bigru_forward(&x.temporal, &params).unwrap();
    assert_eq!(out.dims(), &[9, 512]);
    assert_eq!(out.len(), 4608);

    let zero = bigru_forward(&x.temporal, &params.zeros_like()).unwrap();
    assert!(zero.data().iter().all(|&v| v == 0.0));

    let short = Tensor::<f64>::zeros(&[8, 11]);
    assert!(matches!(bigru_forward(&short, &params), Err(crate::Error::Shape(_))));
}

#[test]
fn time_reversal_swaps_directions_with_tied_weights() {
    let arch = Architecture::from_dims(small_config(), 3, 0).unwrap();
    let mut params: ParamSet<f64> = arch.init_params(8);
    let forward: Vec<(String, Tensor<f64>)> = params
        .iter()
        .filter(|(n, _)| n.starts_with("gru.fwd."))
        .map(|(n, t)| (n.replace("gru.fwd.", "gru.bwd."), t.clone()))
        .collect();
    for (n, t) in forward {
        params.insert(n, t);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = toy(&mut rng, 3, 0).temporal;
    let reversed_rows: Vec<f64> = (0..WINDOW_LEN).rev().flat_map(|i| x.row(i).to_vec()).collect();
    let reversed = Tensor::matrix(WINDOW_LEN, 3, reversed_rows).unwrap();

    let a = bigru_forward(&x, &params).unwrap();
    let b = bigru_forward(&reversed, &params).unwrap();
    let h = 3;
    for t in 0..WINDOW_LEN {
        let rt = WINDOW_LEN - 1 - t;
        assert_eq!(&a.row(t)[..h], &b.row(rt)[h..]);
        assert_eq!(&a.row(t)[h..], &b.row(rt)[..h]);
    }
}

#[test]
fn forward_shapes_and_determinism() {
    let cfg = ModelConfig {
        gru_hidden: 256,
        head_classes: 3,
        ..ModelConfig::default()
    };
    let arch = Architecture::from_dims(cfg, 11, 15).unwrap();
    let params: ParamSet<f64> = arch.init_params(5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = toy(&mut rng, 11, 15);
    let (logits, rep) = arch.forward(&x, &params).unwrap();
    assert_eq!(logits.len(), 3);
    assert_eq!(rep.len(), 4609);
    let (again, _) = arch.forward(&x, &params).unwrap();
    assert_eq!(logits, again);

    let wrong = toy(&mut rng, 10, 15);
    assert!(arch.forward(&wrong, &params).is_err());
}

#[test]
fn normalized_representation_has_unit_norm() {
    let cfg = ModelConfig {
        normalize_representation: true,
        ..small_config()
    };
    let arch = Architecture::from_dims(cfg, 4, 2).unwrap();
    let params: ParamSet<f64> = arch.init_params(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let inputs: Vec<Toy> = (0..7).map(|_| toy(&mut rng, 4, 2)).collect();
    for inf in arch.infer(&params, &inputs, 3).unwrap() {
        let norm: f64 = inf.representation.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }
}

fn batch_loss(arch: &Architecture, params: &ParamSet<f64>, inputs: &[Toy], labels: &[usize]) -> (f64, NamedTensors<f64>) {
    let refs: Vec<&Toy> = inputs.iter().collect();
    let batch = Batch::from_inputs(&refs, arch).unwrap();
    let mut tape = Tape::new();
    let bound = bind(&mut tape, params, true);
    let out = arch.build(&mut tape, &bound, &batch).unwrap();
    let loss = tape.softmax_xent(out.logits, labels, None).unwrap();
    let adj = tape.backward(loss).unwrap();
    let grads = bound
        .iter()
        .map(|(n, v)| (n.to_owned(), adj.get(v).cloned().unwrap_or_else(|| Tensor::zeros(params.get(n).unwrap().dims()))))
        .collect();
    (tape.value(loss).data()[0], grads)
}

fn jitter_biases(mut params: ParamSet<f64>, rng: &mut ChaCha8Rng) -> ParamSet<f64> {
    for (_, t) in params.iter_mut().filter(|(_, t)| t.dims().len() == 1) {
        for v in t.data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    params
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    for normalize in [false, true] {
        let cfg = ModelConfig {
            normalize_representation: normalize,
            ..small_config()
        };
        let arch = Architecture::from_dims(cfg, 3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        // Zero biases behind a fully dead relu layer put later units exactly on the kink.
        let params = jitter_biases(arch.init_params(21), &mut rng);
        let inputs: Vec<Toy> = (0..4).map(|_| toy(&mut rng, 3, 2)).collect();
        let labels = [0, 1, 1, 0];
        let (_, grads) = batch_loss(&arch, &params, &inputs, &labels);
        let report = grad_check(
            |p| Ok(batch_loss(&arch, p, &inputs, &labels).0),
            &params,
            &grads,
            GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "normalize={normalize}: {report:?}");
    }
}

#[test]
fn replace_head_preserves_body() {
    let cfg = ModelConfig {
        head_classes: 7,
        trunk_widths: vec![],
        ..small_config()
    };
    let arch = Architecture::from_dims(cfg, 3, 2).unwrap();
    let params: ParamSet<f64> = arch.init_params(1);
    let swapped = replace_head(&params, 2, 99).unwrap();
    for (name, t) in params.iter().filter(|(n, _)| !is_head(n)) {
        assert_eq!(swapped.get(name).unwrap(), t);
    }
    assert_eq!(swapped.get(HEAD_WEIGHT).unwrap().dims(), &[arch.rep_dim(), 2]);
    assert_eq!(swapped.get(HEAD_BIAS).unwrap().dims(), &[2]);
    assert!(replace_head(&params, 1, 0).is_err());

    // geometry is undefined across different head widths, so compare bodies only
    let mut same_head = swapped.clone();
    let head = replace_head(&params, 2, 5).unwrap();
    same_head.insert(HEAD_WEIGHT, head.get(HEAD_WEIGHT).unwrap().clone());
    assert_eq!(frobenius_distance(&swapped, &same_head, true).unwrap(), 0.0);
    arch.with_head_classes(2).unwrap().check_params(&swapped).unwrap();
}

fn pair(rng: &mut ChaCha8Rng) -> (ParamSet<f64>, ParamSet<f64>) {
    let arch = Architecture::from_dims(small_config(), 2, 2).unwrap();
    let a: ParamSet<f64> = arch.init_params(rng.random());
    let b: ParamSet<f64> = arch.init_params(rng.random());
    (a, b)
}

#[test]
fn frobenius_distance_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (a, b) = pair(&mut rng);
    assert_eq!(frobenius_distance(&a, &a, false).unwrap(), 0.0);

    let mut shifted = a.clone();
    shifted.get_mut("trunk.0.b").unwrap().data_mut()[1] += 3.0;
    assert!((frobenius_distance(&a, &shifted, false).unwrap() - 3.0).abs() < 1e-15);

    let mut oracle = 0.0;
    for ((_, ta), (_, tb)) in a.iter().zip(b.iter()) {
        for i in 0..ta.len() {
            oracle += (ta.data()[i] - tb.data()[i]).powi(2);
        }
    }
    let d = frobenius_distance(&a, &b, false).unwrap();
    assert!((d - oracle.sqrt()).abs() < 1e-12);

    let mut missing = b.clone();
    missing.remove("trunk.0.b");
    assert!(frobenius_distance(&a, &missing, false).is_err());
}

#[test]
fn projection_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (theta0, theta) = pair(&mut rng);
    let d = frobenius_distance(&theta, &theta0, true).unwrap();

    let projected = project_to_ball(&theta, &theta0, d / 2.0, true).unwrap();
    let post = frobenius_distance(&projected, &theta0, true).unwrap();
    assert!((post - d / 2.0).abs() < 1e-9);
    assert_eq!(projected.get(HEAD_WEIGHT), theta.get(HEAD_WEIGHT));

    let untouched = project_to_ball(&theta, &theta0, 2.0 * d, true).unwrap();
    assert_eq!(untouched, theta);

    assert!(project_to_ball(&theta, &theta0, 0.0, true).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), frac in 0.01f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (theta0, theta) = pair(&mut rng);
        let gamma = frac * frobenius_distance(&theta, &theta0, true).unwrap();
        let once = project_to_ball(&theta, &theta0, gamma, true).unwrap();
        let twice = project_to_ball(&once, &theta0, gamma, true).unwrap();
        prop_assert!(frobenius_distance(&once, &twice, false).unwrap() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (params, _) = pair(&mut rng);
        let bytes = encode_checkpoint(&params).unwrap();
        let back: ParamSet<f64> = decode_checkpoint(&bytes).unwrap();
        prop_assert_eq!(&back, &params);
        prop_assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
    }
}

#[test]
fn checkpoint_file_size_and_corruption() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (params, _) = pair(&mut rng);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&params, &path).unwrap();

    let expected: usize = 5
        + 4
        + params
            .iter()
            .map(|(name, t)| 4 + name.len() + 4 + 4 * t.dims().len() + 8 * t.len())
            .sum::<usize>();
    assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, expected);

    let back: ParamSet<f64> = load_checkpoint(&path).unwrap();
    assert_eq!(back, params);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    assert!(matches!(decode_checkpoint::<f64>(&bytes), Err(crate::Error::Format(_))));
    bytes[0] = b'N';
    assert!(matches!(
        decode_checkpoint::<f64>(&bytes[..bytes.len() - 3]),
        Err(crate::Error::Format(_))
    ));

    // a rank-2 tensor claiming u32::MAX × u32::MAX elements
    let mut huge = b"NPRL1".to_vec();
    huge.extend_from_slice(&1u32.to_le_bytes());
    huge.extend_from_slice(&1u32.to_le_bytes());
    huge.push(b'w');
    huge.extend_from_slice(&2u32.to_le_bytes());
    huge.extend_from_slice(&u32::MAX.to_le_bytes());
    huge.extend_from_slice(&u32::MAX.to_le_bytes());
    assert!(matches!(decode_checkpoint::<f64>(&huge), Err(crate::Error::Format(_))));
}

#[test]
fn f32_checkpoints_widen_to_f64_payloads() {
    let arch = Architecture::from_dims(small_config(), 2, 0).unwrap();
    let params: ParamSet<f32> = arch.init_params(9);
    let bytes = encode_checkpoint(&params).unwrap();
    let back: ParamSet<f32> = decode_checkpoint(&bytes).unwrap();
    assert_eq!(back, params);
}

