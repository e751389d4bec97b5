//! A from-scratch convolutional network for binary classification of hand
//! radiographs, with class activation mapping and attention-region analysis.
//!
//! Modules, bottom up:
//!
//! - [`tensor`] and [`kernels`]: the dense `f32` tensor and its forward and
//!   backward kernels (valid 3x3 convolution, 2x2 max pooling, ReLU, sigmoid,
//!   softmax, dense, inverted dropout, sum pooling).
//! - [`model`]: four conv stages followed by either a dense + sigmoid head or a
//!   sum-pool + class-weight + softmax head, trained with Adam.
//! - [`cam`]: class activation maps over the last conv featuremaps.
//! - [`data`]: manifests, graymap loading, noise augmentation, splits, batches,
//!   and a synthetic dataset generator.
//! - [`analysis`]: confusion-count metrics and per-region attention histograms.
//!
//! All randomness is derived from explicit seeds; the same seed reproduces
//! every artifact bit for bit.

pub mod analysis;
pub mod cam;
pub mod data;
mod error;
pub mod kernels;
mod label;
pub mod model;
pub mod pgm;
pub mod resample;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};
pub use label::Label;
pub use tensor::Tensor;
