use rand::Rng;

use super::config::{Head, ModelConfig, CONV_STAGES, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::kernels::KERNEL_SIZE;
use crate::seed::{rng_from, STREAM_INIT};
use crate::tensor::Tensor;

/// Name, shape, and He fan-in of one learnable tensor. Biases carry `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSlot {
    pub name: String,
    pub shape: Vec<usize>,
    pub fan_in: Option<usize>,
}

pub const CLASS_WEIGHTS: &str = "class_weights";

pub fn conv_weight_name(stage: usize) -> String {
    format!("conv{}.weight", stage + 1)
}

pub fn conv_bias_name(stage: usize) -> String {
    format!("conv{}.bias", stage + 1)
}

/// Parameter layout in storage order: conv1..conv4 (weight, bias), then the head.
pub fn param_layout(config: &ModelConfig) -> Result<Vec<ParamSlot>> {
    let trace = config.size_trace()?;
    let mut slots = Vec::new();
    for stage in 0..CONV_STAGES {
        let (c_in, c_out) = config.stage_channels(stage);
        slots.push(ParamSlot {
            name: conv_weight_name(stage),
            shape: vec![c_out, c_in, KERNEL_SIZE, KERNEL_SIZE],
            fan_in: Some(c_in * KERNEL_SIZE * KERNEL_SIZE),
        });
        slots.push(ParamSlot { name: conv_bias_name(stage), shape: vec![c_out], fan_in: None });
    }
    let k = config.conv_filters[CONV_STAGES - 1];
    let side = trace.head_input();
    match config.head {
        Head::Gap => {
            // Each pooled unit sums side*side activations, so the class scores are
            // linear in k*side*side inputs; that is the fan-in the init scales by.
            slots.push(ParamSlot {
                name: CLASS_WEIGHTS.into(),
                shape: vec![NUM_CLASSES, k],
                fan_in: Some(k * side * side),
            });
        }
        Head::Dense => {
            let flat = k * side * side;
            slots.push(ParamSlot {
                name: "fc1.weight".into(),
                shape: vec![config.dense_hidden, flat],
                fan_in: Some(flat),
            });
            slots.push(ParamSlot { name: "fc1.bias".into(), shape: vec![config.dense_hidden], fan_in: None });
            slots.push(ParamSlot {
                name: "fc2.weight".into(),
                shape: vec![1, config.dense_hidden],
                fan_in: Some(config.dense_hidden),
            });
            slots.push(ParamSlot { name: "fc2.bias".into(), shape: vec![1], fan_in: None });
        }
    }
    Ok(slots)
}

/// Ordered named tensors. Also used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    entries: Vec<(String, Tensor)>,
}

pub type Gradients = Parameters;

impl Parameters {
    pub fn from_entries(entries: Vec<(String, Tensor)>) -> Self {
        Parameters { entries }
    }

    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        let entries = param_layout(config)?
            .into_iter()
            .map(|slot| {
                let t = Tensor::zeros(&slot.shape);
                (slot.name, t)
            })
            .collect();
        Ok(Parameters { entries })
    }

    pub fn zeros_like(&self) -> Self {
        Parameters {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape())))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    pub fn tensor(&self, index: usize) -> &Tensor {
        &self.entries[index].1
    }

    pub fn tensor_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.entries[index].1
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|(_, t)| t.data())
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    }

    pub fn add_scaled(&mut self, other: &Parameters, alpha: f32) -> Result<()> {
        self.check_aligned(other)?;
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(&other.entries) {
            a.add_scaled(b, alpha)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f32) {
        self.entries.iter_mut().for_each(|(_, t)| t.scale(alpha));
    }

    pub(crate) fn check_aligned(&self, other: &Parameters) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::shape(
                "Parameters",
                format!("{} tensors vs {}", self.entries.len(), other.entries.len()),
            ));
        }
        for ((na, a), (nb, b)) in self.entries.iter().zip(&other.entries) {
            if na != nb || a.shape() != b.shape() {
                return Err(Error::shape(
                    "Parameters",
                    format!("{na}{:?} vs {nb}{:?}", a.shape(), b.shape()),
                ));
            }
        }
        Ok(())
    }

    /// Checks names and shapes against the layout `config` implies.
    pub fn check_config(&self, config: &ModelConfig) -> Result<()> {
        let layout = param_layout(config)?;
        if layout.len() != self.entries.len() {
            return Err(Error::shape(
                "Parameters",
                format!("config needs {} tensors, have {}", layout.len(), self.entries.len()),
            ));
        }
        for (slot, (name, t)) in layout.iter().zip(&self.entries) {
            if &slot.name != name || slot.shape != t.shape() {
                return Err(Error::shape(
                    "Parameters",
                    format!("expected {}{:?}, found {name}{:?}", slot.name, slot.shape, t.shape()),
                ));
            }
        }
        Ok(())
    }
}

/// He-uniform weights, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
/// Each tensor draws from its own stream so layouts of different heads share conv init.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<Parameters> {
    config.validate()?;
    let entries = param_layout(config)?
        .into_iter()
        .enumerate()
        .map(|(i, slot)| {
            let mut t = Tensor::zeros(&slot.shape);
            if let Some(fan_in) = slot.fan_in {
                let bound = (6.0 / fan_in as f64).sqrt() as f32;
                let mut rng = rng_from(seed, &[STREAM_INIT, i as u64]);
                for v in t.data_mut() {
                    *v = rng.random_range(-bound..bound);
                }
            }
            (slot.name, t)
        })
        .collect();
    Ok(Parameters { entries })
}
