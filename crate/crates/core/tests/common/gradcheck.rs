//! End-to-end gradient check: production backward pass against central
//! differences of the independent f64 forward pass.

use gdcnn::model::{backward, forward, init_params, Head, HeadTrace, ModelConfig, Mode};
use gdcnn::{Label, Tensor};
use rand::Rng;

use super::*;

pub const RTOL: f64 = 1e-3;
/// Floor for entries whose true gradient is at the f32 noise level.
pub const ATOL: f64 = 1e-6;

/// Tally over all parameters. A parameter is `kinked` when the +/- step moves
/// the loss onto a different ReLU/argmax piece, where a central difference of
/// width 2e-3 is not a derivative; those are rechecked with a 1e-6 step instead.
#[derive(Debug)]
pub struct Outcome {
    pub total: usize,
    pub smooth: usize,
    pub smooth_passed: usize,
    pub kinked_passed: usize,
    pub worst: Option<(usize, f64, f64)>,
}

impl Outcome {
    pub fn smooth_fraction(&self) -> f64 {
        self.smooth_passed as f64 / self.smooth as f64
    }
}

pub fn run(config: &ModelConfig, seed: u64, label: Label, train: bool) -> Outcome {
    let params = init_params(config, seed).unwrap();
    let mut r = rng(seed ^ 0xABCD);
    let s = config.input_size;
    let image = Tensor::from_fn(&[1, s, s], |_| r.random_range(0.0..1.0));
    let mode = if train { Mode::Train { seed: seed + 100 } } else { Mode::Eval };
    let (_, trace) = forward(&params, config, &image, mode).unwrap();
    let grads = backward(&params, config, &trace, label).unwrap();

    let mask: Option<Vec<f64>> = match &trace.head {
        HeadTrace::Gap { dropout, .. } | HeadTrace::Dense { dropout, .. } => dropout.as_ref().map(|m| {
            m.keep().iter().map(|&k| if k { m.scale() as f64 } else { 0.0 }).collect()
        }),
    };
    let (shapes, flat) = flatten(&params);
    let (_, analytic) = flatten(&grads);
    let img = to_f64(&image);
    let eval = |v: &[f64]| model_eval_ref(config, &shapes, v, &img, label.index(), mask.as_deref());
    let (_, center) = eval(&flat);

    let mut out = Outcome { total: flat.len(), smooth: 0, smooth_passed: 0, kinked_passed: 0, worst: None };
    let mut worst_err = -1.0;
    for i in 0..flat.len() {
        let a = analytic[i];
        let mut v = flat.clone();
        v[i] = flat[i] + FD_STEP;
        let (lp, pp) = eval(&v);
        v[i] = flat[i] - FD_STEP;
        let (lm, pm) = eval(&v);
        if pp == center && pm == center {
            out.smooth += 1;
            let n = (lp - lm) / (2.0 * FD_STEP);
            if close(a, n, RTOL, ATOL) {
                out.smooth_passed += 1;
            }
            let err = (a - n).abs() / (a.abs().max(n.abs()) + ATOL / RTOL);
            if err > worst_err {
                worst_err = err;
                out.worst = Some((i, a, n));
            }
        } else {
            let n = central_diff_step(&flat, i, 1e-6, &|v| eval(v).0);
            if close(a, n, RTOL, ATOL) {
                out.kinked_passed += 1;
            }
        }
    }
    out
}

pub fn config(filters: [usize; 4], size: usize, head: Head, dropout: f32) -> ModelConfig {
    ModelConfig {
        input_size: size,
        conv_filters: filters,
        head,
        dense_hidden: 6,
        dropout_rate: dropout,
    }
}


/// Filters [2,2,2,2] on both heads, with and without head dropout.
pub fn reduced_cases() -> [ModelConfig; 4] {
    [
        config([2, 2, 2, 2], 38, Head::Gap, 0.0),
        config([2, 2, 2, 2], 46, Head::Dense, 0.0),
        config([2, 2, 2, 2], 38, Head::Gap, 0.5),
        config([2, 2, 2, 2], 46, Head::Dense, 0.5),
    ]
}

/// The reduced-config criterion for one case and seed.
pub fn reduced_passes(o: &Outcome) -> bool {
    o.smooth_fraction() >= 0.99 && o.smooth * 2 >= o.total && o.kinked_passed == o.total - o.smooth
}
