//! Forward and backward passes of the four-stage network.

use super::config::{Head, ModelConfig, CONV_STAGES, NUM_CLASSES};
use super::loss::{loss_bce, loss_ce};
use super::params::{Gradients, Parameters};
use crate::error::{Error, Result};
use crate::kernels::{
    self, conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout_backward,
    dropout_forward, gap, gap_backward, matvec, maxpool2d_backward, maxpool2d_forward, relu,
    relu_backward, DropoutMask, PoolIndices,
};
use crate::label::Label;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, seeded per call.
    Train { seed: u64 },
    Eval,
}

#[derive(Debug, Clone)]
pub struct StageTrace {
    pub input: Tensor,
    /// Conv output before ReLU.
    pub preact: Tensor,
    /// Conv output after ReLU.
    pub activation: Tensor,
    pub pool: Option<PoolIndices>,
}

#[derive(Debug, Clone)]
pub enum HeadTrace {
    Dense {
        flat: Tensor,
        hidden_pre: Tensor,
        hidden: Tensor,
        dropout: Option<DropoutMask>,
        dropped: Tensor,
        logit: f32,
        prob: f32,
    },
    Gap {
        /// `F_k`, the spatial sum of each featuremap.
        pooled: Tensor,
        dropout: Option<DropoutMask>,
        dropped: Tensor,
        /// Class scores `S_c`.
        scores: Tensor,
        probs: Tensor,
    },
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub stages: Vec<StageTrace>,
    pub head: HeadTrace,
}

impl ForwardTrace {
    /// Post-ReLU output of the last conv layer.
    pub fn featuremaps(&self) -> &Tensor {
        &self.stages[CONV_STAGES - 1].activation
    }

    pub fn class_scores(&self) -> Option<&Tensor> {
        match &self.head {
            HeadTrace::Gap { scores, .. } => Some(scores),
            HeadTrace::Dense { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    /// Probability of class 1 (female).
    Sigmoid { prob: f32 },
    Softmax { scores: [f32; NUM_CLASSES], probs: [f32; NUM_CLASSES] },
}

impl Prediction {
    /// Threshold 0.5 (inclusive, towards class 1) for the sigmoid head; argmax,
    /// ties to class 0, for the softmax head.
    pub fn class(&self) -> Label {
        match *self {
            Prediction::Sigmoid { prob } => {
                if prob >= 0.5 {
                    Label::Female
                } else {
                    Label::Male
                }
            }
            Prediction::Softmax { probs, .. } => {
                if probs[1] > probs[0] {
                    Label::Female
                } else {
                    Label::Male
                }
            }
        }
    }

    pub fn probability(&self, label: Label) -> f32 {
        match *self {
            Prediction::Sigmoid { prob } => match label {
                Label::Female => prob,
                Label::Male => 1.0 - prob,
            },
            Prediction::Softmax { probs, .. } => probs[label.index()],
        }
    }

    pub fn loss(&self, label: Label) -> f32 {
        match self {
            Prediction::Sigmoid { prob } => loss_bce(*prob, label.target()),
            Prediction::Softmax { probs, .. } => loss_ce(probs, label.index()),
        }
    }
}

fn finite(t: Tensor, layer: impl FnOnce() -> String) -> Result<Tensor> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::NonFinite { layer: layer() })
    }
}

fn check_image(config: &ModelConfig, image: &Tensor) -> Result<()> {
    let s = config.input_size;
    image.expect_shape(&[1, s, s], "forward")?;
    if let Some(v) = image.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("pixel value {v} outside [0, 1]")));
    }
    Ok(())
}

fn maybe_dropout(
    input: &Tensor,
    rate: f32,
    mode: Mode,
) -> Result<(Tensor, Option<DropoutMask>)> {
    match mode {
        Mode::Train { seed } if rate > 0.0 => {
            let (out, mask) = dropout_forward(input, rate, seed)?;
            Ok((out, Some(mask)))
        }
        _ => Ok((input.clone(), None)),
    }
}

pub fn forward(
    params: &Parameters,
    config: &ModelConfig,
    image: &Tensor,
    mode: Mode,
) -> Result<(Prediction, ForwardTrace)> {
    check_image(config, image)?;
    params.check_config(config)?;

    let mut stages = Vec::with_capacity(CONV_STAGES);
    let mut x = image.clone();
    for stage in 0..CONV_STAGES {
        let w = params.tensor(2 * stage);
        let b = params.tensor(2 * stage + 1);
        let preact = finite(conv2d_forward(&x, w, b)?, || format!("conv{}", stage + 1))?;
        let activation = relu(&preact);
        let pooled = if stage + 1 == CONV_STAGES && config.head == Head::Gap {
            None
        } else {
            Some(maxpool2d_forward(&activation)?)
        };
        let (next, pool) = match pooled {
            Some((out, idx)) => (out, Some(idx)),
            None => (activation.clone(), None),
        };
        stages.push(StageTrace { input: x, preact, activation, pool });
        x = next;
    }

    let head_base = 2 * CONV_STAGES;
    let (prediction, head) = match config.head {
        Head::Gap => {
            let pooled = finite(gap(&x)?, || "gap".into())?;
            let (dropped, dropout) = maybe_dropout(&pooled, config.dropout_rate, mode)?;
            let scores = finite(matvec(&dropped, params.tensor(head_base))?, || "class_weights".into())?;
            let probs = kernels::softmax(&scores)?;
            let pred = Prediction::Softmax {
                scores: [scores.data()[0], scores.data()[1]],
                probs: [probs.data()[0], probs.data()[1]],
            };
            (pred, HeadTrace::Gap { pooled, dropout, dropped, scores, probs })
        }
        Head::Dense => {
            let flat = x.clone().reshape(&[x.numel()])?;
            let hidden_pre = finite(
                dense_forward(&flat, params.tensor(head_base), params.tensor(head_base + 1))?,
                || "fc1".into(),
            )?;
            let hidden = relu(&hidden_pre);
            let (dropped, dropout) = maybe_dropout(&hidden, config.dropout_rate, mode)?;
            let out = finite(
                dense_forward(&dropped, params.tensor(head_base + 2), params.tensor(head_base + 3))?,
                || "fc2".into(),
            )?;
            let logit = out.data()[0];
            let prob = kernels::sigmoid_scalar(logit);
            (
                Prediction::Sigmoid { prob },
                HeadTrace::Dense { flat, hidden_pre, hidden, dropout, dropped, logit, prob },
            )
        }
    };
    Ok((prediction, ForwardTrace { stages, head }))
}

/// Forward pass in eval mode without keeping the trace.
pub fn predict(params: &Parameters, config: &ModelConfig, image: &Tensor) -> Result<Prediction> {
    forward(params, config, image, Mode::Eval).map(|(p, _)| p)
}

/// Gradient of the sample loss with respect to every parameter.
///
/// The loss/output-activation pair is differentiated jointly: sigmoid + BCE gives
/// `p - y` at the logit, softmax + CE gives `P - onehot(y)` at the scores.
pub fn backward(
    params: &Parameters,
    config: &ModelConfig,
    trace: &ForwardTrace,
    label: Label,
) -> Result<Gradients> {
    params.check_config(config)?;
    if trace.stages.len() != CONV_STAGES {
        return Err(Error::InvalidArgument(format!(
            "trace has {} stages, expected {CONV_STAGES}",
            trace.stages.len()
        )));
    }
    let mut grads = params.zeros_like();
    let head_base = 2 * CONV_STAGES;

    let mut grad = match (&trace.head, config.head) {
        (HeadTrace::Gap { dropout, dropped, probs, .. }, Head::Gap) => {
            let mut d_scores = probs.clone();
            d_scores.data_mut()[label.index()] -= 1.0;
            let w = params.tensor(head_base);
            let g = dense_backward(dropped, w, &d_scores)?;
            *grads.tensor_mut(head_base) = g.weights;
            let d_pooled = match dropout {
                Some(mask) => dropout_backward(mask, &g.input)?,
                None => g.input,
            };
            let side = trace.featuremaps().shape()[1];
            gap_backward(&d_pooled, side, side)?
        }
        (HeadTrace::Dense { flat, hidden_pre, dropout, dropped, prob, .. }, Head::Dense) => {
            let d_logit = Tensor::new(vec![1], vec![prob - label.target()])?;
            let g2 = dense_backward(dropped, params.tensor(head_base + 2), &d_logit)?;
            *grads.tensor_mut(head_base + 2) = g2.weights;
            *grads.tensor_mut(head_base + 3) = g2.bias;
            let d_hidden = match dropout {
                Some(mask) => dropout_backward(mask, &g2.input)?,
                None => g2.input,
            };
            let d_hidden_pre = relu_backward(hidden_pre, &d_hidden)?;
            let g1 = dense_backward(flat, params.tensor(head_base), &d_hidden_pre)?;
            *grads.tensor_mut(head_base) = g1.weights;
            *grads.tensor_mut(head_base + 1) = g1.bias;
            let last = &trace.stages[CONV_STAGES - 1];
            let pooled_shape = last
                .pool
                .as_ref()
                .map(|p| {
                    let s = p.input_shape();
                    vec![s[0], s[1] / 2, s[2] / 2]
                })
                .ok_or_else(|| Error::InvalidArgument("dense trace lacks final pool".into()))?;
            g1.input.reshape(&pooled_shape)?
        }
        _ => return Err(Error::InvalidArgument("trace head does not match config head".into())),
    };

    for stage in (0..CONV_STAGES).rev() {
        let st = &trace.stages[stage];
        let d_act = match &st.pool {
            Some(idx) => maxpool2d_backward(idx, &grad)?,
            None => grad,
        };
        let d_pre = relu_backward(&st.preact, &d_act)?;
        let g = conv2d_backward(&st.input, params.tensor(2 * stage), &d_pre)?;
        *grads.tensor_mut(2 * stage) = g.weights;
        *grads.tensor_mut(2 * stage + 1) = g.bias;
        grad = g.input;
    }
    Ok(grads)
}
