//! Randomized kernel suites shared by the kernel tests and the acceptance
//! gate. Each panics with a description on the first disagreement.

use gdcnn::kernels::*;
use gdcnn::model::{loss_bce, loss_bce_grad, loss_ce, loss_ce_grad};
use gdcnn::Tensor;
use rand::Rng;

use super::*;

pub const TRIALS: u64 = 100;
const RTOL: f64 = 1e-3;
const ATOL: f64 = 1e-5;

fn assert_grad(analytic: &[f32], x: &[f64], f: &dyn Fn(&[f64]) -> f64, what: &str) {
    for i in 0..x.len() {
        let n = central_diff(x, i, f);
        let a = analytic[i] as f64;
        assert!(close(a, n, RTOL, ATOL), "{what}[{i}]: analytic {a} vs numeric {n}");
    }
}

pub fn conv_matches_nested_loops() {
    let mut r = rng(1);
    for _ in 0..TRIALS {
        let (c_in, c_out) = (r.random_range(1..=4), r.random_range(1..=4));
        let (h, w) = (r.random_range(3..=8), r.random_range(3..=8));
        let x = random_tensor(&mut r, &[c_in, h, w], 1.0);
        let k = random_tensor(&mut r, &[c_out, c_in, 3, 3], 1.0);
        let b = random_tensor(&mut r, &[c_out], 1.0);
        let out = conv2d_forward(&x, &k, &b).unwrap();
        let expect = conv_ref(&to_f64(&x), (c_in, h, w), &to_f64(&k), &to_f64(&b), c_out);
        assert_eq!(out.shape(), &[c_out, h - 2, w - 2]);
        for (a, e) in out.data().iter().zip(&expect) {
            assert!((*a as f64 - e).abs() <= 1e-5, "{a} vs {e}");
        }
    }
}

pub fn conv_reference_six_channel_case() {
    let mut r = rng(2);
    let x = random_tensor(&mut r, &[2, 6, 6], 1.0);
    let k = random_tensor(&mut r, &[3, 2, 3, 3], 1.0);
    let b = random_tensor(&mut r, &[3], 1.0);
    let out = conv2d_forward(&x, &k, &b).unwrap();
    let expect = conv_ref(&to_f64(&x), (2, 6, 6), &to_f64(&k), &to_f64(&b), 3);
    for (a, e) in out.data().iter().zip(&expect) {
        assert!((*a as f64 - e).abs() <= 1e-5);
    }
}

pub fn maxpool_matches_window_scan() {
    let mut r = rng(3);
    for _ in 0..TRIALS {
        let c = r.random_range(1..=4);
        let (h, w) = (r.random_range(2..=8), r.random_range(2..=8));
        let x = random_tensor(&mut r, &[c, h, w], 1.0);
        let (out, _) = maxpool2d_forward(&x).unwrap();
        let expect = pool_ref(&to_f64(&x), (c, h, w));
        assert_eq!(out.shape(), &[c, h / 2, w / 2]);
        for (a, e) in out.data().iter().zip(&expect) {
            assert!((*a as f64 - e).abs() <= 1e-5);
        }
    }
}

pub fn conv_backward_finite_differences() {
    let mut r = rng(4);
    for _ in 0..TRIALS {
        let (c_in, c_out) = (r.random_range(1..=3), r.random_range(1..=3));
        let (h, w) = (r.random_range(3..=6), r.random_range(3..=6));
        let x = random_tensor(&mut r, &[c_in, h, w], 1.0);
        let k = random_tensor(&mut r, &[c_out, c_in, 3, 3], 1.0);
        let b = random_tensor(&mut r, &[c_out], 1.0);
        let g = random_tensor(&mut r, &[c_out, h - 2, w - 2], 1.0);
        let grads = conv2d_backward(&x, &k, &g).unwrap();
        let (xf, kf, bf, gf) = (to_f64(&x), to_f64(&k), to_f64(&b), to_f64(&g));
        let dot = |o: Vec<f64>| o.iter().zip(&gf).map(|(a, b)| a * b).sum::<f64>();
        assert_grad(grads.input.data(), &xf, &|v| dot(conv_ref(v, (c_in, h, w), &kf, &bf, c_out)), "dx");
        assert_grad(grads.weights.data(), &kf, &|v| dot(conv_ref(&xf, (c_in, h, w), v, &bf, c_out)), "dw");
        assert_grad(grads.bias.data(), &bf, &|v| dot(conv_ref(&xf, (c_in, h, w), &kf, v, c_out)), "db");
    }
}

pub fn maxpool_backward_finite_differences() {
    let mut r = rng(5);
    for _ in 0..TRIALS {
        let c = r.random_range(1..=3);
        let (h, w) = (r.random_range(2..=7), r.random_range(2..=7));
        // Distinct values on a 0.01 grid: no window has a tie within the FD step.
        let mut vals: Vec<usize> = (0..c * h * w).collect();
        for i in (1..vals.len()).rev() {
            vals.swap(i, r.random_range(0..=i));
        }
        let x = Tensor::new(vec![c, h, w], vals.iter().map(|&v| v as f32 * 0.01).collect()).unwrap();
        let g = random_tensor(&mut r, &[c, h / 2, w / 2], 1.0);
        let (_, idx) = maxpool2d_forward(&x).unwrap();
        let dx = maxpool2d_backward(&idx, &g).unwrap();
        let gf = to_f64(&g);
        let f = |v: &[f64]| pool_ref(v, (c, h, w)).iter().zip(&gf).map(|(a, b)| a * b).sum::<f64>();
        assert_grad(dx.data(), &to_f64(&x), &f, "pool dx");
    }
}

pub fn relu_backward_finite_differences() {
    let mut r = rng(6);
    for _ in 0..TRIALS {
        let n = r.random_range(1..=20);
        let x = Tensor::from_fn(&[n], |_| {
            let v: f32 = r.random_range(0.01..2.0);
            if r.random_bool(0.5) { v } else { -v }
        });
        let g = random_tensor(&mut r, &[n], 1.0);
        let dx = relu_backward(&x, &g).unwrap();
        let gf = to_f64(&g);
        let f = |v: &[f64]| relu_ref(v).iter().zip(&gf).map(|(a, b)| a * b).sum::<f64>();
        assert_grad(dx.data(), &to_f64(&x), &f, "relu dx");
    }
}

pub fn sigmoid_derivative_finite_differences() {
    let mut r = rng(7);
    for _ in 0..TRIALS {
        let x = random_tensor(&mut r, &[8], 6.0);
        let s = sigmoid(&x);
        let ones = Tensor::full(&[8], 1.0);
        let d = sigmoid_backward(&s, &ones).unwrap();
        for (i, &xi) in x.data().iter().enumerate() {
            let n = central_diff(&[xi as f64], 0, &|v| sigmoid_ref(v[0]));
            assert!(close(d.data()[i] as f64, n, RTOL, ATOL), "x={xi}");
            assert!((s.data()[i] as f64 - sigmoid_ref(xi as f64)).abs() < 1e-6);
        }
    }
}

pub fn softmax_backward_finite_differences() {
    let mut r = rng(8);
    for _ in 0..TRIALS {
        let n = r.random_range(1..=6);
        let s = random_tensor(&mut r, &[n], 4.0);
        let g = random_tensor(&mut r, &[n], 1.0);
        let p = softmax(&s).unwrap();
        let ds = softmax_backward(&p, &g).unwrap();
        let gf = to_f64(&g);
        let f = |v: &[f64]| softmax_ref(v).iter().zip(&gf).map(|(a, b)| a * b).sum::<f64>();
        assert_grad(ds.data(), &to_f64(&s), &f, "softmax ds");
    }
}

pub fn dense_backward_finite_differences() {
    let mut r = rng(9);
    for _ in 0..TRIALS {
        let (n_in, n_out) = (r.random_range(1..=8), r.random_range(1..=5));
        let x = random_tensor(&mut r, &[n_in], 1.0);
        let w = random_tensor(&mut r, &[n_out, n_in], 1.0);
        let b = random_tensor(&mut r, &[n_out], 1.0);
        let g = random_tensor(&mut r, &[n_out], 1.0);
        let out = dense_forward(&x, &w, &b).unwrap();
        let (xf, wf, bf, gf) = (to_f64(&x), to_f64(&w), to_f64(&b), to_f64(&g));
        for (a, e) in out.data().iter().zip(dense_ref(&xf, &wf, Some(&bf), n_out)) {
            assert!((*a as f64 - e).abs() < 1e-5);
        }
        let grads = dense_backward(&x, &w, &g).unwrap();
        let dot = |o: Vec<f64>| o.iter().zip(&gf).map(|(a, b)| a * b).sum::<f64>();
        assert_grad(grads.input.data(), &xf, &|v| dot(dense_ref(v, &wf, Some(&bf), n_out)), "dx");
        assert_grad(grads.weights.data(), &wf, &|v| dot(dense_ref(&xf, v, Some(&bf), n_out)), "dw");
        assert_grad(grads.bias.data(), &bf, &|v| dot(dense_ref(&xf, &wf, Some(v), n_out)), "db");
    }
}

pub fn gap_matches_direct_sum_and_backward() {
    let mut r = rng(10);
    let x = random_tensor(&mut r, &[3, 5, 5], 1.0);
    let out = gap(&x).unwrap();
    let expect = gap_ref(&to_f64(&x), (3, 5, 5));
    for (a, e) in out.data().iter().zip(&expect) {
        assert!((*a as f64 - e).abs() < 1e-5);
    }
    for _ in 0..TRIALS {
        let (k, h, w) = (r.random_range(1..=3), r.random_range(1..=5), r.random_range(1..=5));
        let x = random_tensor(&mut r, &[k, h, w], 1.0);
        let g = random_tensor(&mut r, &[k], 1.0);
        let dx = gap_backward(&g, h, w).unwrap();
        let gf = to_f64(&g);
        let f = |v: &[f64]| gap_ref(v, (k, h, w)).iter().zip(&gf).map(|(a, b)| a * b).sum::<f64>();
        assert_grad(dx.data(), &to_f64(&x), &f, "gap dx");
    }
}

pub fn bce_gradient_finite_differences() {
    let mut r = rng(11);
    for _ in 0..TRIALS {
        let p: f32 = r.random_range(0.02..0.98);
        let y = r.random_range(0..2) as f32;
        // Curvature near the clamp makes a 1e-3 step too coarse for the loss itself.
        let n = central_diff_step(&[p as f64], 0, 1e-6, &|v| bce_ref(v[0], y as f64));
        let a = loss_bce_grad(p, y) as f64;
        assert!(close(a, n, 1e-4, 1e-6), "p={p} y={y}: {a} vs {n}");
        assert!((loss_bce(p, y) as f64 - bce_ref(p as f64, y as f64)).abs() < 1e-6);
    }
}

pub fn ce_gradient_finite_differences() {
    let mut r = rng(12);
    for _ in 0..TRIALS {
        let p1: f32 = r.random_range(0.02..0.98);
        let probs = [1.0 - p1, p1];
        let label = r.random_range(0..2);
        let g = loss_ce_grad(&probs, label);
        for j in 0..2 {
            let x = [probs[0] as f64, probs[1] as f64];
            let n = central_diff_step(&x, j, 1e-6, &|v| -v[label].ln());
            assert!(close(g[j] as f64, n, 1e-4, 1e-6), "j={j}: {} vs {n}", g[j]);
        }
        assert!((loss_ce(&probs, label) - loss_bce(p1, label as f32)).abs() < 1e-6);
    }
}

pub fn dropout_is_seed_reproducible_and_mass_preserving() {
    let x = Tensor::from_fn(&[200_000], |i| (i % 10) as f32 / 10.0);
    let (a, ma) = dropout_forward(&x, 0.5, 77).unwrap();
    let (b, mb) = dropout_forward(&x, 0.5, 77).unwrap();
    assert_eq!(a.data(), b.data());
    assert_eq!(ma, mb);
    let mean_in = x.sum() / x.numel() as f64;
    let mean_out = a.sum() / a.numel() as f64;
    assert!((mean_in - mean_out).abs() < 0.01, "{mean_in} vs {mean_out}");
    let g = dropout_backward(&ma, &Tensor::full(&[200_000], 1.0)).unwrap();
    for (&k, &v) in ma.keep().iter().zip(g.data()) {
        assert_eq!(v, if k { 2.0 } else { 0.0 });
    }
}
