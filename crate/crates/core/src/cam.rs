//! Class activation maps for the gap head.
//!
//! For featuremaps `f_k` and class weights `w_k^c` the map is
//! `M_c(x, y) = sum_k w_k^c f_k(x, y)`. Because the head pools by summation,
//! the class score equals the spatial sum of the map:
//! `S_c = sum_k w_k^c sum_xy f_k = sum_xy M_c`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kernels::gap;
use crate::model::{ForwardTrace, Parameters, CLASS_WEIGHTS};
use crate::pgm::Graymap;
use crate::resample::{resample, Interpolation};
use crate::tensor::Tensor;

pub const CAM_SUFFIX: &str = "_cam.pgm";
pub const OVERLAY_SUFFIX: &str = "_overlay.pgm";

/// Relative and absolute tolerance of the score identity.
pub const IDENTITY_RTOL: f64 = 1e-4;
pub const IDENTITY_ATOL: f64 = 1e-6;

/// Normalized attention map; values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

fn check_weights(featuremaps: &Tensor, class_weights: &[f32]) -> Result<(usize, usize, usize)> {
    featuremaps.expect_rank(3, "cam")?;
    let s = featuremaps.shape();
    if s[0] != class_weights.len() {
        return Err(Error::shape(
            "cam",
            format!("{} featuremaps but {} class weights", s[0], class_weights.len()),
        ));
    }
    Ok((s[0], s[1], s[2]))
}

/// Raw map `[H, W]`; negative values are kept.
pub fn compute_cam(featuremaps: &Tensor, class_weights: &[f32]) -> Result<Tensor> {
    let (k, h, w) = check_weights(featuremaps, class_weights)?;
    let f = featuremaps.data();
    let mut acc = vec![0.0f64; h * w];
    for (ch, &wk) in class_weights.iter().enumerate().take(k) {
        let plane = &f[ch * h * w..(ch + 1) * h * w];
        for (a, &v) in acc.iter_mut().zip(plane) {
            *a += wk as f64 * v as f64;
        }
    }
    Tensor::new(vec![h, w], acc.into_iter().map(|v| v as f32).collect())
}

/// Both sides of the score identity, computed along independent routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreIdentity {
    /// `sum_k w_k F_k` with `F_k` from the pooling kernel.
    pub score: f64,
    /// Spatial sum of the raw class activation map.
    pub cam_sum: f64,
}

impl ScoreIdentity {
    pub fn error(&self) -> f64 {
        (self.cam_sum - self.score).abs()
    }

    pub fn tolerance(&self) -> f64 {
        IDENTITY_RTOL * self.score.abs() + IDENTITY_ATOL
    }

    pub fn holds(&self) -> bool {
        self.error() <= self.tolerance()
    }
}

pub fn cam_score_identity(featuremaps: &Tensor, class_weights: &[f32]) -> Result<ScoreIdentity> {
    check_weights(featuremaps, class_weights)?;
    let pooled = gap(featuremaps)?;
    let score = pooled.data().iter().zip(class_weights).map(|(&f, &w)| f as f64 * w as f64).sum();
    let cam_sum = compute_cam(featuremaps, class_weights)?.sum();
    Ok(ScoreIdentity { score, cam_sum })
}

/// Column `class` of the gap-head class weights, i.e. `w_k^c` for all `k`.
pub fn class_weights(params: &Parameters, class: usize) -> Result<Vec<f32>> {
    let w = params
        .get(CLASS_WEIGHTS)
        .ok_or_else(|| Error::InvalidArgument("CAM requires gap head".into()))?;
    let (classes, k) = (w.shape()[0], w.shape()[1]);
    if class >= classes {
        return Err(Error::InvalidArgument(format!("class {class} out of range ({classes} classes)")));
    }
    Ok(w.data()[class * k..(class + 1) * k].to_vec())
}

/// Raw map for `class` from an eval-mode gap-head trace, plus the identity check
/// against the score the head actually produced.
pub fn cam_from_trace(
    params: &Parameters,
    trace: &ForwardTrace,
    class: usize,
) -> Result<(Tensor, ScoreIdentity)> {
    let weights = class_weights(params, class)?;
    let scores = trace
        .class_scores()
        .ok_or_else(|| Error::InvalidArgument("CAM requires gap head".into()))?;
    let raw = compute_cam(trace.featuremaps(), &weights)?;
    let identity = ScoreIdentity { score: scores.data()[class] as f64, cam_sum: raw.sum() };
    Ok((raw, identity))
}

pub fn upsample(raw: &Tensor, height: usize, width: usize, mode: Interpolation) -> Result<Tensor> {
    raw.expect_rank(2, "upsample")?;
    let (h, w) = (raw.shape()[0], raw.shape()[1]);
    Tensor::new(vec![height, width], resample(raw.data(), h, w, height, width, mode)?)
}

/// Corner-aligned bilinear upsampling of `[H, W]` to `[height, width]`.
pub fn upsample_bilinear(raw: &Tensor, height: usize, width: usize) -> Result<Tensor> {
    upsample(raw, height, width, Interpolation::Bilinear)
}

/// `(v - min) / (max - min)`; a constant map normalizes to all zeros.
pub fn normalize_heatmap(raw: &Tensor) -> Result<Heatmap> {
    raw.expect_rank(2, "normalize_heatmap")?;
    let (h, w) = (raw.shape()[0], raw.shape()[1]);
    let (min, max) = (raw.min() as f64, raw.max() as f64);
    let range = max - min;
    let values = if range > 0.0 {
        raw.data().iter().map(|&v| (((v as f64 - min) / range) as f32).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; h * w]
    };
    Ok(Heatmap { width: w, height: h, values })
}

fn image_plane(image: &Tensor, heatmap: &Heatmap) -> Result<Vec<f32>> {
    let s = image.shape();
    if s.len() != 3 || s[0] != 1 || s[1] != heatmap.height || s[2] != heatmap.width {
        return Err(Error::shape(
            "render_overlay",
            format!("image {s:?} vs heatmap {}x{}", heatmap.height, heatmap.width),
        ));
    }
    Ok(image.data().to_vec())
}

/// Original on the left, heatmap on the right: `H x 2W`.
pub fn side_by_side(image: &Tensor, heatmap: &Heatmap) -> Result<Graymap> {
    let img = image_plane(image, heatmap)?;
    let (h, w) = (heatmap.height, heatmap.width);
    let mut values = Vec::with_capacity(h * 2 * w);
    for y in 0..h {
        values.extend_from_slice(&img[y * w..(y + 1) * w]);
        values.extend_from_slice(&heatmap.values[y * w..(y + 1) * w]);
    }
    Graymap::from_unit(2 * w, h, &values)
}

/// `0.5 * image + 0.5 * heat` per pixel.
pub fn blend(image: &Tensor, heatmap: &Heatmap) -> Result<Graymap> {
    let img = image_plane(image, heatmap)?;
    let values: Vec<f32> = img.iter().zip(&heatmap.values).map(|(&i, &m)| 0.5 * i + 0.5 * m).collect();
    Graymap::from_unit(heatmap.width, heatmap.height, &values)
}

/// Writes `<dir>/<id>_cam.pgm` (side by side) and `<dir>/<id>_overlay.pgm` (blend).
pub fn render_overlay(
    image: &Tensor,
    heatmap: &Heatmap,
    dir: &Path,
    id: &str,
) -> Result<(PathBuf, PathBuf)> {
    let cam_path = dir.join(format!("{id}{CAM_SUFFIX}"));
    let overlay_path = dir.join(format!("{id}{OVERLAY_SUFFIX}"));
    side_by_side(image, heatmap)?.write(&cam_path)?;
    blend(image, heatmap)?.write(&overlay_path)?;
    Ok((cam_path, overlay_path))
}
