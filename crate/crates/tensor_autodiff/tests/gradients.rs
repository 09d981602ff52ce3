//! Finite-difference validation and engine-level properties.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_autodiff::{grad_check, kernels, ParamStore, Tape, Tensor};

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-scale..scale)).collect())
}

#[test]
fn two_layer_conv_net_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::new();
    let w1 = store.register("conv1.weight", random_tensor(&mut rng, &[3, 2, 3, 3], 0.5));
    let w2 = store.register("conv2.weight", random_tensor(&mut rng, &[2, 3, 3, 3], 0.5));
    let x = random_tensor(&mut rng, &[2, 2, 5, 5], 1.0);

    let report = grad_check(&mut store, 1e-5, 64, |store, tape| {
        let xn = tape.input(x.clone());
        let w1n = tape.param(store, w1);
        let h = tape.conv2d(xn, w1n, 1, 1).unwrap();
        let h = tape.relu(h);
        let w2n = tape.param(store, w2);
        let y = tape.conv2d(h, w2n, 2, 1).unwrap();
        let y = tape.relu(y);
        tape.sum(y)
    });
    assert!(report.passes(1e-4), "max rel err {}", report.max_rel_error);
}

#[test]
fn batch_norm_train_mode_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut store = ParamStore::new();
    let gamma = store.register("bn.gamma", random_tensor(&mut rng, &[3], 1.0));
    let beta = store.register("bn.beta", random_tensor(&mut rng, &[3], 1.0));
    let x = random_tensor(&mut rng, &[4, 3, 3, 3], 1.0);

    let report = grad_check(&mut store, 1e-5, 64, |store, tape| {
        let xn = tape.input(x.clone());
        let g = tape.param(store, gamma);
        let b = tape.param(store, beta);
        let (y, _) = tape.batch_norm_train(xn, g, b, 1e-5).unwrap();
        let y = tape.relu(y);
        tape.sum(y)
    });
    // Statistics coupling amplifies rounding; the spec allows 1e-3 here.
    assert!(report.passes(1e-3), "max rel err {}", report.max_rel_error);
}

#[test]
fn linear_and_loss_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut store = ParamStore::new();
    let w = store.register("head.weight", random_tensor(&mut rng, &[4, 6], 0.6));
    let b = store.register("head.bias", random_tensor(&mut rng, &[4], 0.2));
    let x = random_tensor(&mut rng, &[3, 6], 1.0);
    let labels = vec![0, 2, 3];

    let report = grad_check(&mut store, 1e-5, 64, |store, tape| {
        let xn = tape.input(x.clone());
        let wn = tape.param(store, w);
        let bn = tape.param(store, b);
        let logits = tape.linear(xn, wn, bn).unwrap();
        tape.softmax_cross_entropy(logits, &labels).unwrap()
    });
    assert!(report.passes(1e-4), "max rel err {}", report.max_rel_error);
}

#[test]
fn composed_residual_fragment_matches_finite_differences() {
    // BN → ReLU → conv → BN → ReLU → conv added back onto its input,
    // pooled into a cross-entropy loss: the full path a residual block uses.
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut store = ParamStore::new();
    let g1 = store.register("bn1.gamma", random_tensor(&mut rng, &[2], 0.8));
    let b1 = store.register("bn1.beta", random_tensor(&mut rng, &[2], 0.3));
    let w1 = store.register("conv1.weight", random_tensor(&mut rng, &[2, 2, 3, 3], 0.5));
    let g2 = store.register("bn2.gamma", random_tensor(&mut rng, &[2], 0.8));
    let b2 = store.register("bn2.beta", random_tensor(&mut rng, &[2], 0.3));
    let w2 = store.register("conv2.weight", random_tensor(&mut rng, &[2, 2, 3, 3], 0.5));
    let wh = store.register("head.weight", random_tensor(&mut rng, &[3, 2], 0.6));
    let bh = store.register("head.bias", random_tensor(&mut rng, &[3], 0.1));
    let x = random_tensor(&mut rng, &[2, 2, 4, 4], 1.0);
    let labels = vec![1, 2];

    let report = grad_check(&mut store, 1e-5, 48, |store, tape| {
        let xn = tape.input(x.clone());
        let g1n = tape.param(store, g1);
        let b1n = tape.param(store, b1);
        let (h, _) = tape.batch_norm_train(xn, g1n, b1n, 1e-5).unwrap();
        let h = tape.relu(h);
        let w1n = tape.param(store, w1);
        let h = tape.conv2d(h, w1n, 1, 1).unwrap();
        let g2n = tape.param(store, g2);
        let b2n = tape.param(store, b2);
        let (h, _) = tape.batch_norm_train(h, g2n, b2n, 1e-5).unwrap();
        let h = tape.relu(h);
        let w2n = tape.param(store, w2);
        let f = tape.conv2d(h, w2n, 1, 1).unwrap();
        let out = tape.add(xn, f).unwrap();
        let pooled = tape.global_avg_pool(out).unwrap();
        let whn = tape.param(store, wh);
        let bhn = tape.param(store, bh);
        let logits = tape.linear(pooled, whn, bhn).unwrap();
        tape.softmax_cross_entropy(logits, &labels).unwrap()
    });
    assert!(report.passes(1e-3), "max rel err {}", report.max_rel_error);
}

#[test]
fn backward_is_linear_in_the_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut store = ParamStore::new();
    let w = store.register("w", random_tensor(&mut rng, &[2, 1, 3, 3], 0.5));
    let x = random_tensor(&mut rng, &[1, 1, 4, 4], 1.0);

    let build = |store: &ParamStore<f64>, tape: &mut Tape<f64>| {
        let xn = tape.input(x.clone());
        let wn = tape.param(store, w);
        let y = tape.conv2d(xn, wn, 1, 1).unwrap();
        let l1 = tape.sum(y);
        let r = tape.relu(y);
        let l2 = tape.sum(r);
        (l1, l2)
    };

    let grads_of = |store: &mut ParamStore<f64>, which: usize| -> Vec<f64> {
        store.zero_grads();
        let mut tape = Tape::new();
        let (l1, l2) = build(store, &mut tape);
        let loss = match which {
            0 => l1,
            1 => l2,
            _ => tape.add(l1, l2).unwrap(),
        };
        tape.backward(loss, store).unwrap();
        store.get(w).grad.data().to_vec()
    };

    let ga = grads_of(&mut store, 0);
    let gb = grads_of(&mut store, 1);
    let gsum = grads_of(&mut store, 2);
    for i in 0..ga.len() {
        let expect = ga[i] + gb[i];
        assert!(
            (gsum[i] - expect).abs() <= 1e-12 * expect.abs().max(1.0),
            "coord {i}: {} vs {}",
            gsum[i],
            expect
        );
    }
}

#[test]
fn forward_backward_bitwise_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mut store = ParamStore::new();
        let w = store.register("w", random_tensor(&mut rng, &[3, 2, 3, 3], 0.5));
        let x = random_tensor(&mut rng, &[2, 2, 6, 6], 1.0);
        let mut tape = Tape::new();
        let xn = tape.input(x);
        let wn = tape.param(&store, w);
        let y = tape.conv2d(xn, wn, 2, 1).unwrap();
        let loss = tape.sum(y);
        tape.backward(loss, &mut store).unwrap();
        (
            tape.value(loss).scalar_value(),
            store.get(w).grad.data().to_vec(),
        )
    };
    let (la, ga) = run();
    let (lb, gb) = run();
    assert_eq!(la.to_bits(), lb.to_bits());
    assert_eq!(ga.len(), gb.len());
    for (a, b) in ga.iter().zip(&gb) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_output_shape_formula_holds(
        n in 1usize..=8, c in 1usize..=8, h in 3usize..=8, w in 3usize..=8,
        o in 1usize..=8, k in prop::sample::select(vec![1usize, 3]),
        stride in 1usize..=2, padding in 0usize..=1,
    ) {
        let x = Tensor::<f32>::zeros(&[n, c, h, w]);
        let wt = Tensor::<f32>::zeros(&[o, c, k, k]);
        if h + 2 * padding >= k && w + 2 * padding >= k {
            let y = kernels::conv2d_forward(&x, &wt, stride, padding).unwrap();
            let oh = (h + 2 * padding - k) / stride + 1;
            let ow = (w + 2 * padding - k) / stride + 1;
            prop_assert_eq!(y.shape(), &[n, o, oh, ow]);
        }
    }

    #[test]
    fn conv_matches_padded_reference(
        n in 1usize..=2, c in 1usize..=3, h in 3usize..=6, w in 3usize..=6,
        o in 1usize..=3, stride in 1usize..=2, padding in 0usize..=1, seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, &[n, c, h, w], 1.0);
        let wt = random_tensor(&mut rng, &[o, c, 3, 3], 1.0);
        if h + 2 * padding >= 3 && w + 2 * padding >= 3 {
            let fast = kernels::conv2d_forward(&x, &wt, stride, padding).unwrap();
            let slow = reference_conv(&x, &wt, stride, padding);
            prop_assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pool_then_shape(n in 1usize..=8, c in 1usize..=8, h in 1usize..=8, w in 1usize..=8) {
        let x = Tensor::<f32>::zeros(&[n, c, h, w]);
        let y = kernels::global_avg_pool_forward(&x).unwrap();
        prop_assert_eq!(y.shape(), &[n, c]);
    }
}

/// Independent oracle: materializes the zero-padded input, then runs the
/// textbook quadruple loop.
fn reference_conv(
    x: &Tensor<f64>,
    wt: &Tensor<f64>,
    stride: usize,
    padding: usize,
) -> Tensor<f64> {
    let [n, c, h, w] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let [o, _, k, _] = [wt.shape()[0], wt.shape()[1], wt.shape()[2], wt.shape()[3]];
    let (ph, pw) = (h + 2 * padding, w + 2 * padding);
    let mut padded = vec![0.0; n * c * ph * pw];
    for ni in 0..n {
        for ci in 0..c {
            for hi in 0..h {
                for wi in 0..w {
                    padded[((ni * c + ci) * ph + hi + padding) * pw + wi + padding] =
                        x.data()[((ni * c + ci) * h + hi) * w + wi];
                }
            }
        }
    }
    let oh = (ph - k) / stride + 1;
    let ow = (pw - k) / stride + 1;
    let mut out = Tensor::zeros(&[n, o, oh, ow]);
    for ni in 0..n {
        for oi in 0..o {
            for ohi in 0..oh {
                for owi in 0..ow {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for kr in 0..k {
                            for kc in 0..k {
                                let ih = ohi * stride + kr;
                                let iw = owi * stride + kc;
                                acc += padded[((ni * c + ci) * ph + ih) * pw + iw]
                                    * wt.data()[((oi * c + ci) * k + kr) * k + kc];
                            }
                        }
                    }
                    out.data_mut()[((ni * o + oi) * oh + ohi) * ow + owi] = acc;
                }
            }
        }
    }
    out
}
