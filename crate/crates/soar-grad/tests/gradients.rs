//! Finite-difference verification of every adjoint rule: each op's reverse
//! gradient must match central differences at f64 within 1e-6 relative
//! error, and full composite blocks within 1e-5.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use soar_grad::{concat, grad_check, Graph, Tensor, GRAD_CHECK_EPS};

const OP_TOL: f64 = 1e-6;
const COMPOSITE_TOL: f64 = 1e-5;

fn randv(rng: &mut ChaCha12Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Random values kept at least `margin` away from every point in `kinks`,
/// so finite differences never straddle a non-smooth point.
fn randv_off(rng: &mut ChaCha12Rng, n: usize, lo: f64, hi: f64, kinks: &[f64], margin: f64) -> Vec<f64> {
    (0..n)
        .map(|_| loop {
            let x = rng.gen_range(lo..hi);
            if kinks.iter().all(|k| (x - k).abs() > margin) {
                break x;
            }
        })
        .collect()
}

/// Reduces an arbitrary tensor to a scalar through fixed random weights so
/// every output coordinate influences the loss.
fn weighted_sum(g: &Graph<f64>, t: &Tensor<f64>, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = t.len();
    let w = g.constant(&[n], randv(&mut rng, n, -1.0, 1.0));
    t.reshape(&[n]).mul(&w).sum_all()
}

#[test]
fn elementwise_and_scalar_ops() {
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let a = (vec![2, 3], randv(&mut rng, 6, -2.0, 2.0));
    let b = (vec![2, 3], randv(&mut rng, 6, -2.0, 2.0));

    for (name, f) in [
        ("add", 0usize),
        ("sub", 1),
        ("mul", 2),
    ] {
        let op = f;
        let err = grad_check(
            move |g, xs| {
                let y = match op {
                    0 => xs[0].add(&xs[1]),
                    1 => xs[0].sub(&xs[1]),
                    _ => xs[0].mul(&xs[1]),
                };
                weighted_sum(g, &y, 7)
            },
            &[a.clone(), b.clone()],
            GRAD_CHECK_EPS,
        );
        assert!(err < OP_TOL, "{name}: {err:.3e}");
    }

    let err = grad_check(
        |g, xs| weighted_sum(g, &xs[0].add_scalar(1.7).scale(-2.3), 8),
        &[a.clone()],
        GRAD_CHECK_EPS,
    );
    assert!(err < OP_TOL, "add_scalar/scale: {err:.3e}");
}

#[test]
fn smooth_unary_ops() {
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let signed = (vec![7], randv(&mut rng, 7, -2.0, 2.0));
    let positive = (vec![7], randv(&mut rng, 7, 0.4, 3.0));

    let err = grad_check(
        |g, xs| weighted_sum(g, &xs[0].exp(), 3),
        &[signed],
        GRAD_CHECK_EPS,
    );
    assert!(err < OP_TOL, "exp: {err:.3e}");

    for (name, which) in [("log", 0usize), ("sqrt", 1)] {
        let err = grad_check(
            move |g, xs| {
                let y = if which == 0 { xs[0].log() } else { xs[0].sqrt() };
                weighted_sum(g, &y, 4)
            },
            &[positive.clone()],
            GRAD_CHECK_EPS,
        );
        assert!(err < OP_TOL, "{name}: {err:.3e}");
    }
}

#[test]
fn kinked_unary_ops_off_kinks() {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let relu_in = (vec![9], randv_off(&mut rng, 9, -2.0, 2.0, &[0.0], 0.05));
    let err = grad_check(
        |g, xs| weighted_sum(g, &xs[0].relu(), 5),
        &[relu_in],
        GRAD_CHECK_EPS,
    );
    assert!(err < OP_TOL, "relu: {err:.3e}");

    let hs_in = (vec![9], randv_off(&mut rng, 9, -5.0, 5.0, &[-3.0, 3.0], 0.05));
    let err = grad_check(
        |g, xs| weighted_sum(g, &xs[0].hardswish(), 6),
        &[hs_in],
        GRAD_CHECK_EPS,
    );
    assert!(err < OP_TOL, "hardswish: {err:.3e}");
}

#[test]
fn matmul_transpose_reshape() {
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let a = (vec![3, 4], randv(&mut rng, 12, -1.5, 1.5));
    let b = (vec![4, 2], randv(&mut rng, 8, -1.5, 1.5));
    let err = grad_check(
        |g, xs| weighted_sum(g, &xs[0].matmul(&xs[1]), 9),
        &[a.clone(), b],
        GRAD_CHECK_EPS,
    );
    assert!(err < OP_TOL, "matmul: {err:.3e}");

    let err = grad_check(
        |g, xs| weighted_sum(g, &xs[0].transpose().reshape(&[2, 6]), 10),
        &[a],
        GRAD_CHECK_EPS,
    );
    assert!(err < OP_TOL, "transpose/reshape: {err:.3e}");
}

#[test]
fn concat_and_reductions() {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let a = (vec![2, 3], randv(&mut rng, 6, -2.0, 2.0));
    let b = (vec![2, 3], randv(&mut rng, 6, -2.0, 2.0));
    for axis in [0usize, 1] {
        let err = grad_check(
            move |g, xs| weighted_sum(g, &concat(&[xs[0].clone(), xs[1].clone()], axis), 11),
            &[a.clone(), b.clone()],
            GRAD_CHECK_EPS,
        );
        assert!(err < OP_TOL, "concat axis {axis}: {err:.3e}");
    }

    let x3 = (vec![2, 3, 2], randv(&mut rng, 12, -2.0, 2.0));
    for axis in [0usize, 1, 2] {
        let err = grad_check(
            move |g, xs| weighted_sum(g, &xs[0].mean_axis(axis), 12),
            &[x3.clone()],
            GRAD_CHECK_EPS,
        );
        assert!(err < OP_TOL, "mean_axis {axis}: {err:.3e}");
    }

    let err = grad_check(|_, xs| xs[0].sum_all(), &[a.clone()], GRAD_CHECK_EPS);
    assert!(err < OP_TOL, "sum_all: {err:.3e}");
    let err = grad_check(|_, xs| xs[0].mean_all(), &[a], GRAD_CHECK_EPS);
    assert!(err < OP_TOL, "mean_all: {err:.3e}");
}

#[test]
fn softmax_both_axes() {
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let x = (vec![3, 4], randv(&mut rng, 12, -3.0, 3.0));
    for axis in [0usize, 1] {
        let err = grad_check(
            move |g, xs| weighted_sum(g, &xs[0].softmax(axis), 13),
            &[x.clone()],
            GRAD_CHECK_EPS,
        );
        assert!(err < OP_TOL, "softmax axis {axis}: {err:.3e}");
    }
}

#[test]
fn layer_norm_full_jacobian() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let x = (vec![3, 5], randv(&mut rng, 15, -2.0, 2.0));
    let gain = (vec![5], randv(&mut rng, 5, 0.5, 1.5));
    let bias = (vec![5], randv(&mut rng, 5, -0.5, 0.5));
    let err = grad_check(
        |g, xs| weighted_sum(g, &xs[0].layer_norm(&xs[1], &xs[2]), 14),
        &[x, gain, bias],
        GRAD_CHECK_EPS,
    );
    assert!(err < OP_TOL, "layer_norm: {err:.3e}");
}

#[test]
fn batch_norm_train_and_eval() {
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    let x = (vec![6, 4], randv(&mut rng, 24, -2.0, 2.0));
    let gain = (vec![4], randv(&mut rng, 4, 0.5, 1.5));
    let bias = (vec![4], randv(&mut rng, 4, -0.5, 0.5));
    for ch_axis in [1usize, 0] {
        let (xs, gs) = if ch_axis == 1 {
            (x.clone(), gain.clone())
        } else {
            // Channels along rows: reuse shapes with 4 channels of 6.
            ((vec![4, 6], x.1.clone()), gain.clone())
        };
        let err = grad_check(
            move |g, inp| {
                let (y, _, _) = inp[0].batch_norm_train(&inp[1], &inp[2], ch_axis);
                weighted_sum(g, &y, 15)
            },
            &[xs, gs, bias.clone()],
            GRAD_CHECK_EPS,
        );
        assert!(err < OP_TOL, "batch_norm_train ch_axis {ch_axis}: {err:.3e}");
    }

    let rmean = randv(&mut rng, 4, -0.5, 0.5);
    let rvar = randv(&mut rng, 4, 0.5, 2.0);
    let err = grad_check(
        move |g, inp| {
            let y = inp[0].batch_norm_eval(&inp[1], &inp[2], &rmean, &rvar, 1);
            weighted_sum(g, &y, 16)
        },
        &[x, gain, bias],
        GRAD_CHECK_EPS,
    );
    assert!(err < OP_TOL, "batch_norm_eval: {err:.3e}");
}

#[test]
fn conv2d_strides_and_bias() {
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let x = (vec![2, 5, 4], randv(&mut rng, 40, -1.0, 1.0));
    let k = (vec![3, 2, 3, 3], randv(&mut rng, 54, -0.6, 0.6));
    let b = (vec![3], randv(&mut rng, 3, -0.3, 0.3));
    for stride in [1usize, 2] {
        let err = grad_check(
            move |g, xs| weighted_sum(g, &xs[0].conv2d(&xs[1], Some(&xs[2]), stride), 17),
            &[x.clone(), k.clone(), b.clone()],
            GRAD_CHECK_EPS,
        );
        assert!(err < OP_TOL, "conv2d stride {stride}: {err:.3e}");
    }
}

#[test]
fn gather_and_row_broadcasts() {
    let mut rng = ChaCha12Rng::seed_from_u64(10);
    let x = (vec![4, 3], randv(&mut rng, 12, -2.0, 2.0));
    let row = (vec![3], randv(&mut rng, 3, -1.0, 1.0));

    let err = grad_check(
        |g, xs| weighted_sum(g, &xs[0].gather_rows(&[3, 1, 3, 0]), 18),
        &[x.clone()],
        GRAD_CHECK_EPS,
    );
    assert!(err < OP_TOL, "gather_rows with repeats: {err:.3e}");

    let err = grad_check(
        |g, xs| weighted_sum(g, &xs[0].add_row(&xs[1]), 19),
        &[x.clone(), row.clone()],
        GRAD_CHECK_EPS,
    );
    assert!(err < OP_TOL, "add_row: {err:.3e}");

    let err = grad_check(
        |g, xs| weighted_sum(g, &xs[0].mul_row(&xs[1]), 20),
        &[x, row],
        GRAD_CHECK_EPS,
    );
    assert!(err < OP_TOL, "mul_row: {err:.3e}");
}

#[test]
fn drop_path_scales_gradient_of_survivors() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    let x = (vec![5], randv(&mut rng, 5, -1.0, 1.0));
    // Fixed seed inside the closure keeps the mask identical across the
    // finite-difference re-evaluations.
    for seed in 0..6u64 {
        let err = grad_check(
            move |g, xs| {
                let mut r = ChaCha12Rng::seed_from_u64(seed);
                weighted_sum(g, &xs[0].drop_path(0.5, true, &mut r), 21)
            },
            &[x.clone()],
            GRAD_CHECK_EPS,
        );
        assert!(err < OP_TOL, "drop_path seed {seed}: {err:.3e}");
    }
}

#[test]
fn cosine_similarity_both_sides() {
    let mut rng = ChaCha12Rng::seed_from_u64(12);
    let u = (vec![6], randv(&mut rng, 6, -2.0, 2.0));
    let v = (vec![6], randv(&mut rng, 6, -2.0, 2.0));
    let err = grad_check(
        |_, xs| xs[0].cosine_similarity(&xs[1]),
        &[u, v],
        GRAD_CHECK_EPS,
    );
    assert!(err < OP_TOL, "cosine_similarity: {err:.3e}");
}

#[test]
fn cross_entropy_matches_softmax_minus_onehot() {
    let mut rng = ChaCha12Rng::seed_from_u64(13);
    let logits = (vec![4, 5], randv(&mut rng, 20, -2.0, 2.0));
    let labels = [2usize, 0, 4, 4];
    let err = grad_check(
        move |_, xs| xs[0].cross_entropy_logits(&labels),
        &[logits.clone()],
        GRAD_CHECK_EPS,
    );
    assert!(err < OP_TOL, "cross_entropy_logits: {err:.3e}");

    // Closed form: d/dlogits = (softmax - onehot) / N.
    let g: Graph<f64> = Graph::new();
    let x = g.leaf(&[4, 5], logits.1.clone());
    x.cross_entropy_logits(&labels).backward();
    let grad = x.grad().unwrap();
    let probs = x.softmax(1).values();
    for r in 0..4 {
        for c in 0..5 {
            let onehot = if labels[r] == c { 1.0 } else { 0.0 };
            let expect = (probs[r * 5 + c] - onehot) / 4.0;
            assert!((grad[r * 5 + c] - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn composite_attention_head() {
    let mut rng = ChaCha12Rng::seed_from_u64(14);
    let q = (vec![4, 3], randv(&mut rng, 12, -1.0, 1.0));
    let k = (vec![4, 3], randv(&mut rng, 12, -1.0, 1.0));
    let v = (vec![4, 5], randv(&mut rng, 20, -1.0, 1.0));
    let err = grad_check(
        |g, xs| {
            let scale = 1.0 / (3.0f64).sqrt();
            let scores = xs[0].matmul(&xs[1].transpose()).scale(scale).softmax(1);
            weighted_sum(g, &scores.matmul(&xs[2]), 22)
        },
        &[q, k, v],
        GRAD_CHECK_EPS,
    );
    assert!(err < COMPOSITE_TOL, "attention head: {err:.3e}");
}

#[test]
fn composite_norm_mlp_residual() {
    let mut rng = ChaCha12Rng::seed_from_u64(15);
    let x = (vec![3, 6], randv(&mut rng, 18, -1.0, 1.0));
    let w1 = (vec![6, 8], randv(&mut rng, 48, -0.5, 0.5));
    let w2 = (vec![8, 6], randv(&mut rng, 48, -0.5, 0.5));
    let gain = (vec![6], randv(&mut rng, 6, 0.8, 1.2));
    let bias = (vec![6], randv(&mut rng, 6, -0.2, 0.2));
    let err = grad_check(
        |g, xs| {
            let h = xs[0]
                .layer_norm(&xs[3], &xs[4])
                .matmul(&xs[1])
                .hardswish()
                .matmul(&xs[2]);
            weighted_sum(g, &xs[0].add(&h), 23)
        },
        &[x, w1, w2, gain, bias],
        GRAD_CHECK_EPS,
    );
    assert!(err < COMPOSITE_TOL, "norm-mlp residual: {err:.3e}");
}

#[test]
fn composite_conv_bn_stem() {
    let mut rng = ChaCha12Rng::seed_from_u64(16);
    let x = (vec![2, 6, 6], randv(&mut rng, 72, -1.0, 1.0));
    let k = (vec![4, 2, 3, 3], randv(&mut rng, 72, -0.4, 0.4));
    let gain = (vec![4], randv(&mut rng, 4, 0.8, 1.2));
    let bias = (vec![4], randv(&mut rng, 4, -0.2, 0.2));
    let err = grad_check(
        |g, xs| {
            let y = xs[0].conv2d(&xs[1], None, 2); // [4, 3, 3]
            let tokens = y.reshape(&[4, 9]).transpose(); // [9, 4]
            let (norm, _, _) = tokens.batch_norm_train(&xs[2], &xs[3], 1);
            weighted_sum(g, &norm.hardswish(), 24)
        },
        &[x, k, gain, bias],
        GRAD_CHECK_EPS,
    );
    assert!(err < COMPOSITE_TOL, "conv-bn stem: {err:.3e}");
}
