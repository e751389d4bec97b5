//! Test-only f64 reference implementations written as plain nested loops,
//! independent of the production kernels, plus finite-difference helpers.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod gradcheck;
pub mod suites;

use gdcnn::model::{Head, ModelConfig, Parameters};
use gdcnn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize], scale: f32) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-scale..scale))
}

pub fn to_f64(t: &Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_diff(x: &[f64], i: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    central_diff_step(x, i, FD_STEP, f)
}

pub fn central_diff_step(x: &[f64], i: usize, step: f64, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[i] += step;
    minus[i] -= step;
    (f(&plus) - f(&minus)) / (2.0 * step)
}

/// `|a - n| <= rtol * max(|a|, |n|) + atol`.
pub fn close(analytic: f64, numeric: f64, rtol: f64, atol: f64) -> bool {
    (analytic - numeric).abs() <= rtol * analytic.abs().max(numeric.abs()) + atol
}

pub fn conv_ref(
    x: &[f64],
    (c_in, h, w): (usize, usize, usize),
    k: &[f64],
    b: &[f64],
    c_out: usize,
) -> Vec<f64> {
    let (oh, ow) = (h - 2, w - 2);
    let mut out = vec![0.0; c_out * oh * ow];
    for o in 0..c_out {
        for y in 0..oh {
            for xx in 0..ow {
                let mut acc = b[o];
                for c in 0..c_in {
                    for dy in 0..3 {
                        for dx in 0..3 {
                            acc += x[(c * h + y + dy) * w + xx + dx] * k[((o * c_in + c) * 3 + dy) * 3 + dx];
                        }
                    }
                }
                out[(o * oh + y) * ow + xx] = acc;
            }
        }
    }
    out
}

pub fn pool_ref(x: &[f64], (c, h, w): (usize, usize, usize)) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                let mut m = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        m = m.max(x[(ch * h + 2 * y + dy) * w + 2 * xx + dx]);
                    }
                }
                out.push(m);
            }
        }
    }
    out
}

pub fn relu_ref(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

pub fn sigmoid_ref(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn softmax_ref(s: &[f64]) -> Vec<f64> {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|&v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

pub fn dense_ref(x: &[f64], w: &[f64], b: Option<&[f64]>, n_out: usize) -> Vec<f64> {
    let n_in = x.len();
    (0..n_out)
        .map(|o| {
            let dot: f64 = (0..n_in).map(|i| w[o * n_in + i] * x[i]).sum();
            dot + b.map_or(0.0, |b| b[o])
        })
        .collect()
}

pub fn gap_ref(x: &[f64], (k, h, w): (usize, usize, usize)) -> Vec<f64> {
    (0..k).map(|c| x[c * h * w..(c + 1) * h * w].iter().sum()).collect()
}

pub fn bce_ref(p: f64, y: f64) -> f64 {
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Full-model loss in f64, given flattened parameters in layout order.
/// `mask` is the per-element keep/scale factor of the head dropout, if any.
pub fn model_loss_ref(
    config: &ModelConfig,
    shapes: &[Vec<usize>],
    flat: &[f64],
    image: &[f64],
    label: usize,
    mask: Option<&[f64]>,
) -> f64 {
    model_eval_ref(config, shapes, flat, image, label, mask).0
}

/// Loss plus the piecewise-linear pattern at this point: the sign of every
/// ReLU input and the argmax of every pooling window. Two points with the same
/// pattern lie on the same smooth piece of the loss.
pub fn model_eval_ref(
    config: &ModelConfig,
    shapes: &[Vec<usize>],
    flat: &[f64],
    image: &[f64],
    label: usize,
    mask: Option<&[f64]>,
) -> (f64, Vec<u32>) {
    let mut offsets = vec![0];
    for s in shapes {
        offsets.push(offsets.last().unwrap() + s.iter().product::<usize>());
    }
    let p = |i: usize| &flat[offsets[i]..offsets[i + 1]];
    let mut pattern = Vec::new();
    let relu_tracked = |v: Vec<f64>, pattern: &mut Vec<u32>| {
        pattern.extend(v.iter().map(|&a| (a > 0.0) as u32));
        relu_ref(&v)
    };

    let mut x = image.to_vec();
    let (mut c, mut side) = (1usize, config.input_size);
    for stage in 0..4 {
        let c_out = config.conv_filters[stage];
        let y = relu_tracked(conv_ref(&x, (c, side, side), p(2 * stage), p(2 * stage + 1), c_out), &mut pattern);
        side -= 2;
        c = c_out;
        x = y;
        if !(stage == 3 && config.head == Head::Gap) {
            pattern.extend(pool_argmax_ref(&x, (c, side, side)));
            x = pool_ref(&x, (c, side, side));
            side /= 2;
        }
    }
    let apply = |v: Vec<f64>| match mask {
        Some(m) => v.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => v,
    };
    let loss = match config.head {
        Head::Gap => {
            let pooled = apply(gap_ref(&x, (c, side, side)));
            let scores = dense_ref(&pooled, p(8), None, 2);
            -softmax_ref(&scores)[label].ln()
        }
        Head::Dense => {
            let pre = dense_ref(&x, p(8), Some(p(9)), config.dense_hidden);
            let h = apply(relu_tracked(pre, &mut pattern));
            let logit = dense_ref(&h, p(10), Some(p(11)), 1)[0];
            bce_ref(sigmoid_ref(logit), label as f64)
        }
    };
    (loss, pattern)
}

/// Row-major position of the first maximum in every 2x2 window.
pub fn pool_argmax_ref(x: &[f64], (c, h, w): (usize, usize, usize)) -> Vec<u32> {
    let mut out = Vec::new();
    for ch in 0..c {
        for y in 0..h / 2 {
            for xx in 0..w / 2 {
                let mut best = (0u32, f64::NEG_INFINITY);
                for (j, (dy, dx)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                    let v = x[(ch * h + 2 * y + dy) * w + 2 * xx + dx];
                    if v > best.1 {
                        best = (j as u32, v);
                    }
                }
                out.push(best.0);
            }
        }
    }
    out
}

pub fn flatten(params: &Parameters) -> (Vec<Vec<usize>>, Vec<f64>) {
    let shapes = params.iter().map(|(_, t)| t.shape().to_vec()).collect();
    let flat = params.iter().flat_map(|(_, t)| t.data().iter().map(|&v| v as f64)).collect();
    (shapes, flat)
}
