use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_core::{Graph, Tensor, TensorError};

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let mut g = Graph::inference();
    let x = Tensor::from_vec(&[3], vec![1.0, 1.0, 1.0]).unwrap();
    let y = g.softmax(&x).unwrap();
    for v in y.data().iter() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn sigmoid_at_zero_is_half() {
    let mut g = Graph::inference();
    let x = Tensor::from_vec(&[1], vec![0.0]).unwrap();
    let y = g.sigmoid(&x).unwrap();
    assert_eq!(y.data()[0], 0.5);
}

#[test]
fn conv2d_identity_kernel_preserves_input() {
    let mut g = Graph::inference();
    let x = Tensor::from_vec(&[1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
    let k = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap();
    let y = g.conv2d(&x, &k, None, 1, 0).unwrap();
    assert_eq!(y.shape(), vec![1, 3, 3]);
    assert_eq!(y.to_vec(), x.to_vec());
}

#[test]
fn factored_linear_identity_preserves_input() {
    let mut g = Graph::inference();
    let x = Tensor::from_vec(&[3], vec![0.5, -1.0, 2.0]).unwrap();
    let eye = Tensor::from_vec(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    let ones = Tensor::from_vec(&[3], vec![1.0; 3]).unwrap();
    let zero_b = Tensor::from_vec(&[3], vec![0.0; 3]).unwrap();
    let y = g.factored_linear(&x, &eye, &ones, &eye, Some(&zero_b)).unwrap();
    assert_eq!(y.to_vec(), x.to_vec());
}

#[test]
fn lstm_cell_all_zero_yields_zero_hidden() {
    let mut g = Graph::inference();
    let h = 4;
    let x = Tensor::zeros(&[3]);
    let hid = Tensor::zeros(&[h]);
    let cell = Tensor::zeros(&[h]);
    let wx = Tensor::zeros(&[4 * h, 3]);
    let wh = Tensor::zeros(&[4 * h, h]);
    let b = Tensor::zeros(&[4 * h]);
    let (h_new, c_new) = g.lstm_cell(&x, &hid, &cell, &wx, &wh, &b).unwrap();
    assert!(h_new.data().iter().all(|v| *v == 0.0));
    assert!(c_new.data().iter().all(|v| *v == 0.0));
}

#[test]
fn backward_of_weighted_sum_returns_the_weights() {
    // loss = sum(w ⊙ x) with w trainable: grad(w) = x.
    let mut g = Graph::new();
    let w = Tensor::param(&[3], vec![0.1, 0.2, 0.3]).unwrap();
    let x = Tensor::from_vec(&[3], vec![4.0, -5.0, 6.0]).unwrap();
    let prod = g.mul(&w, &x).unwrap();
    let loss = g.sum_all(&prod).unwrap();
    let grads = g.backward(&loss).unwrap();
    assert_eq!(grads.get(&w).unwrap(), x.to_vec().as_slice());
}

#[test]
fn sigmoid_gradient_at_zero_is_quarter_of_scale() {
    let mut g = Graph::new();
    let z = Tensor::param(&[1], vec![0.0]).unwrap();
    let s = g.sigmoid(&z).unwrap();
    let loss = g.scale(&s, 3.0).unwrap();
    let grads = g.backward(&loss).unwrap();
    assert!((grads.get(&z).unwrap()[0] - 0.25 * 3.0).abs() < 1e-15);
}

#[test]
fn random_mlp_matches_finite_differences() {
    for seed in 0..5 {
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let rand = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let x = Tensor::param(&[6], rand(rng, 6)).unwrap();
        let w1 = Tensor::param(&[5, 6], rand(rng, 30)).unwrap();
        let b1 = Tensor::param(&[5], rand(rng, 5)).unwrap();
        let w2 = Tensor::param(&[1, 5], rand(rng, 5)).unwrap();
        let leaves = vec![
            ("x".to_string(), x.clone()),
            ("w1".to_string(), w1.clone()),
            ("b1".to_string(), b1.clone()),
            ("w2".to_string(), w2.clone()),
        ];
        let build = move |g: &mut Graph| -> Result<Tensor, TensorError> {
            let h = g.linear(&x, &w1, Some(&b1))?;
            let a = g.tanh(&h)?;
            let out = g.linear(&a, &w2, None)?;
            g.sum_all(&out)
        };
        let report = tensor_core::grad_check(&leaves, build, 1e-5, 1e-5).unwrap();
        assert!(report.all_pass(), "seed {seed}: {:?}", report);
    }
}

#[test]
fn backward_is_deterministic() {
    let run = || {
        let rng = &mut ChaCha8Rng::seed_from_u64(99);
        let x = Tensor::param(&[4], (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let w = Tensor::param(&[4, 4], (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let mut g = Graph::new();
        let h = g.linear(&x, &w, None).unwrap();
        let s = g.softmax(&h).unwrap();
        let c = g.clamp_min(&s, 1e-12).unwrap();
        let l = g.log(&c).unwrap();
        let loss = g.sum_all(&l).unwrap();
        let grads = g.backward(&loss).unwrap();
        (grads.get(&x).unwrap().to_vec(), grads.get(&w).unwrap().to_vec())
    };
    let a = run();
    let b = run();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}

#[test]
fn unreachable_leaf_gets_zero_grad() {
    let mut g = Graph::new();
    let used = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
    let dead = Tensor::param(&[2], vec![3.0, 4.0]).unwrap();
    let _side = g.scale(&dead, 2.0).unwrap();
    let loss = g.sum_all(&used).unwrap();
    let grads = g.backward(&loss).unwrap();
    assert_eq!(grads.get(&used).unwrap(), &[1.0, 1.0]);
    assert_eq!(grads.get(&dead).unwrap(), &[0.0, 0.0]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut g = Graph::new();
    let x = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
    let y = g.scale(&x, 2.0).unwrap();
    assert!(matches!(g.backward(&y), Err(TensorError::NotScalar { .. })));
}

#[test]
fn shape_mismatch_errors_name_the_op() {
    let mut g = Graph::inference();
    let x = Tensor::from_vec(&[3], vec![1.0; 3]).unwrap();
    let w = Tensor::from_vec(&[2, 4], vec![0.0; 8]).unwrap();
    let err = g.linear(&x, &w, None).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("linear"), "message was {msg:?}");
    assert!(msg.contains('3') && msg.contains('4'), "message was {msg:?}");
}

#[test]
fn non_finite_inputs_are_rejected() {
    assert!(matches!(
        Tensor::from_vec(&[2], vec![1.0, f64::NAN]),
        Err(TensorError::NonFinite { .. })
    ));
    // log of a negative value produces NaN and must error rather than propagate
    let mut g = Graph::inference();
    let x = Tensor::from_vec(&[1], vec![-1.0]).unwrap();
    assert!(matches!(g.log(&x), Err(TensorError::NonFinite { .. })));
}

proptest! {
    #[test]
    fn softmax_output_is_a_simplex(values in proptest::collection::vec(-30.0f64..30.0, 1..12)) {
        let mut g = Graph::inference();
        let x = Tensor::from_vec(&[values.len()], values).unwrap();
        let y = g.softmax(&x).unwrap();
        let sum: f64 = y.data().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(y.data().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn scalar_mul_matches_scale(v in -5.0f64..5.0, xs in proptest::collection::vec(-5.0f64..5.0, 1..8)) {
        let mut g = Graph::inference();
        let s = Tensor::scalar(v).unwrap();
        let x = Tensor::from_vec(&[xs.len()], xs).unwrap();
        let a = g.scalar_mul(&s, &x).unwrap();
        let b = g.scale(&x, v).unwrap();
        prop_assert_eq!(a.to_vec(), b.to_vec());
    }
}
