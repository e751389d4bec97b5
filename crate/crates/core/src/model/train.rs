//! Mini-batch training and evaluation.

use rayon::prelude::*;

use super::adam::{AdamState, DEFAULT_LEARNING_RATE};
use super::config::ModelConfig;
use super::network::{backward, forward, predict, Mode};
use super::params::{init_params, Gradients, Parameters};
use crate::analysis::ConfusionCounts;
use crate::data::{batches, NoiseSpec, Sample};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::seed::{derive_seed, STREAM_DROPOUT, STREAM_NOISE, STREAM_SHUFFLE};

/// Samples per gradient chunk. Chunks are reduced in order, so results do not
/// depend on the rayon thread count.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHyper {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub seed: u64,
    /// Per-epoch Gaussian augmentation; 0 disables it.
    pub noise_sigma: f32,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            batch_size: 50,
            epochs: 40,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: 0,
            noise_sigma: NoiseSpec::DEFAULT_SIGMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean train-mode loss over the epoch's samples.
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

/// `history.csv` text: 3-decimal floats, empty cells for absent validation.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.3}")).unwrap_or_default();
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in history {
        out.push_str(&format!(
            "{},{:.3},{:.3},{},{}\n",
            r.epoch,
            r.train_loss,
            r.train_acc,
            opt(r.val_loss),
            opt(r.val_acc)
        ));
    }
    out
}

struct ChunkResult {
    grads: Gradients,
    loss: f64,
    correct: usize,
}

fn sample_gradients(
    params: &Parameters,
    config: &ModelConfig,
    sample: &Sample,
    dropout_seed: u64,
) -> Result<(Gradients, f32, bool)> {
    let (pred, trace) = forward(params, config, &sample.image, Mode::Train { seed: dropout_seed })?;
    let grads = backward(params, config, &trace, sample.label)?;
    Ok((grads, pred.loss(sample.label), pred.class() == sample.label))
}

/// Mean gradient over a batch plus the summed loss and correct count.
pub fn batch_gradients(
    params: &Parameters,
    config: &ModelConfig,
    samples: &[Sample],
    dropout_seeds: &[u64],
) -> Result<(Gradients, f64, usize)> {
    assert_eq!(samples.len(), dropout_seeds.len());
    let chunks: Vec<ChunkResult> = samples
        .par_chunks(GRAD_CHUNK)
        .zip(dropout_seeds.par_chunks(GRAD_CHUNK))
        .map(|(chunk, seeds)| {
            let mut acc = params.zeros_like();
            let mut loss = 0.0;
            let mut correct = 0;
            for (s, &seed) in chunk.iter().zip(seeds) {
                let (g, l, ok) = sample_gradients(params, config, s, seed)?;
                acc.add_scaled(&g, 1.0)?;
                loss += l as f64;
                correct += ok as usize;
            }
            Ok(ChunkResult { grads: acc, loss, correct })
        })
        .collect::<Result<_>>()?;
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    let mut correct = 0;
    for c in chunks {
        total.add_scaled(&c.grads, 1.0)?;
        loss += c.loss;
        correct += c.correct;
    }
    total.scale(1.0 / samples.len() as f32);
    Ok((total, loss, correct))
}

pub fn train(
    config: &ModelConfig,
    train_set: &[Sample],
    val_set: &[Sample],
    hyper: &TrainHyper,
) -> Result<(Parameters, Vec<EpochRecord>)> {
    train_with_callback(config, train_set, val_set, hyper, |_| {})
}

/// Trains from a fresh seeded init; `on_epoch` sees each record as it is produced.
pub fn train_with_callback(
    config: &ModelConfig,
    train_set: &[Sample],
    val_set: &[Sample],
    hyper: &TrainHyper,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Parameters, Vec<EpochRecord>)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if hyper.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
    }
    let noise = (hyper.noise_sigma > 0.0)
        .then(|| NoiseSpec::new(hyper.noise_sigma, derive_seed(hyper.seed, &[STREAM_NOISE])))
        .transpose()?;

    let mut params = init_params(config, hyper.seed)?;
    let mut adam = AdamState::new(&params, hyper.learning_rate);
    let mut history = Vec::with_capacity(hyper.epochs);

    for epoch in 1..=hyper.epochs {
        let epoch_seed = derive_seed(hyper.seed, &[STREAM_SHUFFLE, epoch as u64]);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (b, batch) in batches(train_set, hyper.batch_size, epoch_seed, noise).enumerate() {
            let batch = batch?;
            let seeds: Vec<u64> = batch
                .indices
                .iter()
                .map(|&i| derive_seed(hyper.seed, &[STREAM_DROPOUT, epoch as u64, i as u64]))
                .collect();
            let (grads, loss, ok) = batch_gradients(&params, config, &batch.samples, &seeds)?;
            let mean = (loss / batch.samples.len() as f64) as f32;
            if !mean.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged { epoch, batch: b + 1, loss: mean });
            }
            adam.step(&mut params, &grads)?;
            loss_sum += loss;
            correct += ok;
        }
        let n = train_set.len() as f64;
        let (val_loss, val_acc) = if val_set.is_empty() {
            (None, None)
        } else {
            let e = evaluate(&params, config, val_set)?;
            (Some(e.mean_loss), Some(e.accuracy()))
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_loss,
            val_acc,
        };
        on_epoch(&record);
        history.push(record);
    }
    Ok((params, history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Indexed by class; each treats that class as positive.
    pub counts: [ConfusionCounts; 2],
    pub predictions: Vec<Label>,
    pub mean_loss: f64,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        let c = &self.counts[0];
        (c.tp + c.tn) as f64 / c.total() as f64
    }
}

/// Eval-mode predictions with per-class confusion counts.
pub fn evaluate(params: &Parameters, config: &ModelConfig, samples: &[Sample]) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("evaluation set is empty".into()));
    }
    let results: Vec<(Label, f32)> = samples
        .par_iter()
        .map(|s| predict(params, config, &s.image).map(|p| (p.class(), p.loss(s.label))))
        .collect::<Result<_>>()?;
    let predictions: Vec<Label> = results.iter().map(|&(p, _)| p).collect();
    let actual: Vec<Label> = samples.iter().map(|s| s.label).collect();
    let counts = [
        ConfusionCounts::from_predictions(&actual, &predictions, Label::Male)?,
        ConfusionCounts::from_predictions(&actual, &predictions, Label::Female)?,
    ];
    let mean_loss = results.iter().map(|&(_, l)| l as f64).sum::<f64>() / samples.len() as f64;
    Ok(Evaluation { counts, predictions, mean_loss })
}
