use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> Tensor<f64> {
    let len = dims.iter().product();
    Tensor::new(dims.to_vec(), (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn naive_matmul(a: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
    let (m, k) = (a.dims()[0], a.dims()[1]);
    let p = b.dims()[1];
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        for j in 0..p {
            let mut acc = 0.0;
            for l in 0..k {
                acc += a.get2(i, l) * b.get2(l, j);
            }
            out[i * p + j] = acc;
        }
    }
    out
}

fn affine_value(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    let mut tape = Tape::new();
    let (x, w, b) = (tape.constant_ref(x), tape.constant_ref(w), tape.constant_ref(b));
    let y = tape.affine(x, w, Some(b)).unwrap();
    tape.value(y).clone()
}

#[test]
fn affine_identity_and_arithmetic() {
    let x = Tensor::from_rows(&[&[1.0, 2.0]]).unwrap();
    let w = Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
    let b = Tensor::vector(vec![0.0, 0.0]);
    assert_eq!(affine_value(&x, &w, &b).data(), &[1.0, 2.0]);

    let x = Tensor::from_rows(&[&[1.0, 1.0]]).unwrap();
    let w = Tensor::from_rows(&[&[2.0], &[3.0]]).unwrap();
    let b = Tensor::vector(vec![1.0]);
    assert_eq!(affine_value(&x, &w, &b).data(), &[6.0]);
}

#[test]
fn affine_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_tensor(&mut rng, &[3, 4]);
    let w = random_tensor(&mut rng, &[4, 2]);
    let b = Tensor::vector(vec![0.0, 0.0]);
    let fast = affine_value(&x, &w, &b);
    for (f, n) in fast.data().iter().zip(naive_matmul(&x, &w)) {
        assert!((f - n).abs() < 1e-12);
    }
}

#[test]
fn affine_shape_mismatch() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::zeros(&[2, 3]));
    let w = tape.constant(Tensor::zeros(&[4, 2]));
    assert!(matches!(tape.affine(x, w, None), Err(crate::Error::Shape(_))));
}

#[test]
fn activation_values() {
    assert_eq!(Activation::Sigmoid.apply(0.0_f64), 0.5);
    assert_eq!(Activation::Tanh.apply(0.0_f64), 0.0);
    assert_eq!(Activation::Relu.apply(-3.0_f64), 0.0);
    // 1 / (1 + e^-2)
    assert!((Activation::Sigmoid.apply(2.0_f64) - 0.880_797_077_977_882_3).abs() < 1e-12);
}

#[test]
fn softmax_xent_examples() {
    let uniform = Tensor::from_rows(&[&[0.3, 0.3, 0.3, 0.3]]).unwrap();
    let (loss, _) = softmax_xent(&uniform, &[2], None).unwrap();
    assert!((loss - 4.0_f64.ln()).abs() < 1e-12);

    let peaked = Tensor::from_rows(&[&[10.0, -10.0]]).unwrap();
    let (loss, _) = softmax_xent(&peaked, &[0], None).unwrap();
    // ln(1 + e^-20)
    let oracle = (-20.0_f64).exp().ln_1p();
    assert!((loss - oracle).abs() < 1e-20);
    assert!((loss - 2.06e-9).abs() < 1e-11);

    let flat = Tensor::from_rows(&[&[0.0, 0.0]]).unwrap();
    let (loss, _) = softmax_xent(&flat, &[0], Some(&[2.0, 0.0])).unwrap();
    assert!((loss - 2.0 * 2.0_f64.ln()).abs() < 1e-12);

    assert!(matches!(
        softmax_xent(&flat, &[2], None),
        Err(crate::Error::Input(_))
    ));
}

#[test]
fn softmax_xent_clamps_log() {
    let hopeless = Tensor::from_rows(&[&[0.0, 100.0]]).unwrap();
    let (loss, grad) = softmax_xent(&hopeless, &[0], None).unwrap();
    assert!((loss - (-LOG_CLAMP.ln())).abs() < 1e-12);
    assert!(grad.data().iter().all(|&g| g == 0.0));
}

proptest! {
    #[test]
    fn softmax_xent_shift_invariant(
        row in prop::collection::vec(-20.0f64..20.0, 2..6),
        shift in -50.0f64..50.0,
        label_seed in 0usize..100,
    ) {
        let label = label_seed % row.len();
        let a = Tensor::from_rows(&[&row]).unwrap();
        let shifted: Vec<f64> = row.iter().map(|v| v + shift).collect();
        let b = Tensor::from_rows(&[&shifted]).unwrap();
        let (la, _) = softmax_xent(&a, &[label], None).unwrap();
        let (lb, _) = softmax_xent(&b, &[label], None).unwrap();
        prop_assert!((la - lb).abs() < 1e-10);
    }
}

/// Builds a small graph exercising every tape op and returns the loss leaf.
fn exercise_all_ops<'a>(
    tape: &mut Tape<'a, f64>,
    params: &'a NamedTensors<f64>,
    x: &'a Tensor<f64>,
) -> (Var, [Var; 3]) {
    let x = tape.constant_ref(x);
    let w = tape.param(params.get("w").unwrap());
    let b = tape.param(params.get("b").unwrap());
    let u = tape.param(params.get("u").unwrap());
    let a = tape.affine(x, w, Some(b)).unwrap();
    let s = tape.sigmoid(a).unwrap();
    let t = tape.tanh(a).unwrap();
    let r = tape.relu(a).unwrap();
    let m = tape.mul(s, t).unwrap();
    let d = tape.sub(r, m).unwrap();
    let e = tape.add(d, s).unwrap();
    let c = tape.concat_cols(&[e, t]).unwrap();
    let n = tape.normalize_rows(c).unwrap();
    let logits = tape.matmul(n, u).unwrap();
    let ce = tape.softmax_xent(logits, &[0, 2, 1], Some(&[1.0, 2.0, 0.5])).unwrap();
    let sq = tape.sum_squares(e).unwrap();
    (tape.add(ce, sq).unwrap(), [w, b, u])
}

fn op_params(rng: &mut ChaCha8Rng) -> NamedTensors<f64> {
    let mut p = NamedTensors::new();
    p.insert("w", random_tensor(rng, &[4, 5]));
    p.insert("b", random_tensor(rng, &[5]));
    p.insert("u", random_tensor(rng, &[10, 3]));
    p
}

fn analytic_grads(params: &NamedTensors<f64>, x: &Tensor<f64>) -> NamedTensors<f64> {
    let mut tape = Tape::new();
    let (loss, leaves) = exercise_all_ops(&mut tape, params, x);
    let adj = tape.backward(loss).unwrap();
    ["w", "b", "u"]
        .into_iter()
        .zip(leaves)
        .map(|(name, v)| (name.to_owned(), adj.get(v).unwrap().clone()))
        .collect()
}

fn op_loss(params: &NamedTensors<f64>, x: &Tensor<f64>) -> f64 {
    let mut tape = Tape::new();
    let (loss, _) = exercise_all_ops(&mut tape, params, x);
    tape.value(loss).data()[0]
}

#[test]
fn every_op_backward_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = op_params(&mut rng);
    let x = random_tensor(&mut rng, &[3, 4]);
    let grads = analytic_grads(&params, &x);
    let report = grad_check(
        |p| Ok(op_loss(p, &x)),
        &params,
        &grads,
        GradCheckConfig::default(),
    )
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
    assert_eq!(report.coords_checked, 20 + 5 + 24);
}

#[test]
fn sum_of_squares_is_exact_under_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut params = NamedTensors::new();
    params.insert("v", random_tensor(&mut rng, &[6]));
    let grads: NamedTensors<f64> = params.iter().map(|(k, v)| (k.to_owned(), v.map(|x| 2.0 * x))).collect();
    let report = grad_check(
        |p| Ok(p.get("v").unwrap().squared_norm()),
        &params,
        &grads,
        GradCheckConfig::default(),
    )
    .unwrap();
    assert!(report.max_rel_error < 1e-8, "{report:?}");
}

#[test]
fn planted_gradient_fault_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params = op_params(&mut rng);
    let x = random_tensor(&mut rng, &[3, 4]);
    let mut doubled = analytic_grads(&params, &x);
    for (_, g) in doubled.iter_mut() {
        g.scale(2.0);
    }
    let report = grad_check(|p| Ok(op_loss(p, &x)), &params, &doubled, GradCheckConfig::default()).unwrap();
    assert!((report.max_rel_error - 0.5).abs() < 1e-3, "{report:?}");
}

#[test]
fn grad_check_rejects_non_finite_objective() {
    let mut params = NamedTensors::new();
    params.insert("v", Tensor::vector(vec![1.0]));
    let grads = params.zeros_like();
    let err = grad_check(|_| Ok(f64::NAN), &params, &grads, GradCheckConfig::default()).unwrap_err();
    assert!(matches!(err, crate::Error::Numeric(_)));
}

#[test]
fn constants_receive_no_gradient() {
    let w = Tensor::from_rows(&[&[1.0], &[2.0]]).unwrap();
    let x = Tensor::from_rows(&[&[3.0, 4.0]]).unwrap();
    let mut tape = Tape::new();
    let xv = tape.constant_ref(&x);
    let wv = tape.param(&w);
    let y = tape.matmul(xv, wv).unwrap();
    let l = tape.sum_squares(y).unwrap();
    let adj = tape.backward(l).unwrap();
    assert!(adj.get(xv).is_none());
    // d/dw (x·w)^2 = 2 (x·w) x
    assert_eq!(adj.get(wv).unwrap().data(), &[66.0, 88.0]);
}

#[test]
fn generic_over_f32() {
    let w = Tensor::<f32>::from_rows(&[&[0.5, -0.5]]).unwrap();
    let x = Tensor::<f32>::from_rows(&[&[2.0]]).unwrap();
    let mut tape = Tape::new();
    let xv = tape.constant_ref(&x);
    let wv = tape.param(&w);
    let logits = tape.matmul(xv, wv).unwrap();
    let loss = tape.softmax_xent(logits, &[0], None).unwrap();
    let adj = tape.backward(loss).unwrap();
    let g = adj.get(wv).unwrap().data();
    assert!((g[0] + g[1]).abs() < 1e-6);
}
