//! Binary and categorical cross entropy on probabilities.

pub const PROB_CLAMP: f32 = 1e-7;

fn clamp_prob(p: f32) -> f32 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `-[y ln p + (1-y) ln(1-p)]` with `p` clamped away from 0 and 1.
pub fn loss_bce(p: f32, y: f32) -> f32 {
    let p = clamp_prob(p) as f64;
    let y = y as f64;
    (-(y * p.ln() + (1.0 - y) * (1.0 - p).ln())) as f32
}

/// `dL/dp` at the clamped probability.
pub fn loss_bce_grad(p: f32, y: f32) -> f32 {
    let p = clamp_prob(p) as f64;
    let y = y as f64;
    (-y / p + (1.0 - y) / (1.0 - p)) as f32
}

/// `-ln P[label]` with clamping.
pub fn loss_ce(probs: &[f32], label: usize) -> f32 {
    -(clamp_prob(probs[label]) as f64).ln() as f32
}

/// `dL/dP`: `-1/P[label]` at the label, zero elsewhere.
pub fn loss_ce_grad(probs: &[f32], label: usize) -> Vec<f32> {
    let mut g = vec![0.0; probs.len()];
    g[label] = (-1.0 / clamp_prob(probs[label]) as f64) as f32;
    g
}
