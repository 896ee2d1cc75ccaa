mod common;

use common::{check_instance, labels, normal, opts};
use mmlab_core::nn::{Dense, GradCheckOptions, Matrix, Objective, grad_check, mse, relu_backward, relu_forward, softmax_xent};
use mmlab_core::rng::Rng;
use mmlab_core::train::{LinearObjective, UniNet, UniObjective};
use proptest::prelude::*;

const TOL: f64 = 1e-4;

#[test]
fn fifty_random_networks_match_finite_differences() {
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let (kind, r) = check_instance(i);
        assert!(r.checked > 0, "instance {i} ({kind}) checked nothing");
        assert!(r.max_rel_err < TOL, "instance {i} ({kind}): {r:?}");
        assert!(r.f32_max_dev < 1e-3, "instance {i} ({kind}): {r:?}");
        worst = worst.max(r.max_rel_err);
    }
    println!("worst relative error over 50 instances: {worst:.3e}");
}

#[test]
fn linear_classifier_matches_tightly() {
    for seed in 0..10 {
        let mut rng = Rng::new(seed);
        let x = normal(20, 6, &mut rng);
        let y = labels(20, 3, &mut rng);
        let mut obj = LinearObjective::new(Dense::glorot(6, 3, &mut rng), x, y).unwrap();
        let o = GradCheckOptions {
            step: 1e-5,
            ..opts(seed)
        };
        let r = grad_check(&mut obj, &o).unwrap();
        assert_eq!(r.skipped_kinks, 0);
        assert!(r.max_rel_err < 1e-5, "{r:?}");
    }
}

#[test]
fn zero_initialized_network_skips_kinks() {
    let mut rng = Rng::new(3);
    let enc = Dense::<f32>::zeros(4, 5);
    let head = Dense::glorot(5, 3, &mut rng);
    let net = UniNet::from_layers(enc, head).unwrap();
    let mut obj = UniObjective::new(net, normal(8, 4, &mut rng), labels(8, 3, &mut rng)).unwrap();
    let r = grad_check(
        &mut obj,
        &GradCheckOptions {
            max_coords: 1000,
            ..GradCheckOptions::default()
        },
    )
    .unwrap();
    assert!(r.skipped_kinks > 0);
    assert!(r.checked > 0);
    assert!(r.max_rel_err < TOL, "{r:?}");
}

#[test]
fn gradient_descent_lowers_the_loss() {
    let mut rng = Rng::new(5);
    let net = UniNet::new(3, 6, 2, &mut rng);
    let mut obj = UniObjective::new(net, normal(30, 3, &mut rng), labels(30, 2, &mut rng)).unwrap();
    let before = obj.loss_and_grad().unwrap();
    obj.sgd(1e-2).unwrap();
    assert!(obj.loss().unwrap() < before);
}

fn fd<F: Fn(&Matrix<f64>) -> f64>(f: F, at: &Matrix<f64>, r: usize, c: usize) -> f64 {
    let h = 1e-5;
    let mut p = at.clone();
    p.set(r, c, at.get(r, c) + h);
    let mut m = at.clone();
    m.set(r, c, at.get(r, c) - h);
    (f(&p) - f(&m)) / (2.0 * h)
}

fn close(a: f64, n: f64) -> bool {
    (a - n).abs() <= 1e-6 * (1.0 + a.abs().max(n.abs()))
}

fn mat(rows: usize, cols: usize, v: &[f64]) -> Matrix<f64> {
    Matrix::new(rows, cols, v[..rows * cols].to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn affine_gradients(x in prop::collection::vec(-2.0f64..2.0, 12), w in prop::collection::vec(-2.0f64..2.0, 6),
                        g in prop::collection::vec(-1.0f64..1.0, 8)) {
        // Loss = sum(G .* (X W^T + b)) with X 4x3, W 2x3, G 4x2.
        let x = mat(4, 3, &x);
        let g = mat(4, 2, &g);
        let mut layer = Dense::from_params(mat(2, 3, &w), mat(1, 2, &[0.1, -0.2])).unwrap();
        layer.forward(&x).unwrap();
        let dx = layer.backward(&g, true).unwrap().unwrap();
        let loss_w = |wm: &Matrix<f64>| {
            let l = Dense::from_params(wm.clone(), mat(1, 2, &[0.1, -0.2])).unwrap();
            let y = l.apply(&x).unwrap();
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        for r in 0..2 { for c in 0..3 {
            prop_assert!(close(layer.grad_weight.get(r, c), fd(loss_w, &layer.weight, r, c)));
        }}
        let loss_x = |xm: &Matrix<f64>| {
            let y = layer.apply(xm).unwrap();
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        for r in 0..4 { for c in 0..3 {
            prop_assert!(close(dx.get(r, c), fd(loss_x, &x, r, c)));
        }}
        let sums: Vec<f64> = (0..2).map(|c| (0..4).map(|r| g.get(r, c)).sum()).collect();
        for c in 0..2 {
            prop_assert!(close(layer.grad_bias.get(0, c), sums[c]));
        }
    }

    #[test]
    fn relu_gradients(x in prop::collection::vec(-2.0f64..2.0, 6), g in prop::collection::vec(-1.0f64..1.0, 6)) {
        let x = mat(2, 3, &x);
        let g = mat(2, 3, &g);
        let dx = relu_backward(&x, &g).unwrap();
        let loss = |xm: &Matrix<f64>| relu_forward(xm).data().iter().zip(g.data()).map(|(a, b)| a * b).sum::<f64>();
        for r in 0..2 { for c in 0..3 {
            prop_assume!(x.get(r, c).abs() > 1e-3);
            prop_assert!(close(dx.get(r, c), fd(loss, &x, r, c)));
        }}
    }

    #[test]
    fn softmax_xent_gradients(z in prop::collection::vec(-4.0f64..4.0, 9), y in prop::collection::vec(0usize..3, 3)) {
        let z = mat(3, 3, &z);
        let (_, dz) = softmax_xent(&z, &y).unwrap();
        let loss = |zm: &Matrix<f64>| softmax_xent(zm, &y).unwrap().0;
        for r in 0..3 { for c in 0..3 {
            prop_assert!(close(dz.get(r, c), fd(loss, &z, r, c)));
        }}
    }

    #[test]
    fn mse_gradients(p in prop::collection::vec(-3.0f64..3.0, 8), t in prop::collection::vec(-3.0f64..3.0, 8)) {
        let p = mat(2, 4, &p);
        let t = mat(2, 4, &t);
        let (_, dp) = mse(&p, &t).unwrap();
        let loss = |pm: &Matrix<f64>| mse(pm, &t).unwrap().0;
        for r in 0..2 { for c in 0..4 {
            prop_assert!(close(dp.get(r, c), fd(loss, &p, r, c)));
        }}
    }
}
