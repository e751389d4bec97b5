use std::path::Path;

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::pgm::Graymap;
use crate::resample::{resample, Interpolation};
use crate::seed::{rng_from, STREAM_NOISE};
use crate::tensor::Tensor;

use super::manifest::DatasetManifest;

/// One preprocessed `1 x S x S` image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Tensor,
    pub label: Label,
}

/// Additive Gaussian pixel noise, standard deviation on the `[0, 1]` scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f32,
    pub seed: u64,
}

impl NoiseSpec {
    pub const DEFAULT_SIGMA: f32 = 0.05;

    pub fn new(sigma: f32, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise sigma {sigma} must be >= 0")));
        }
        Ok(NoiseSpec { sigma, seed })
    }
}

/// Reads a P5 graymap as an `[H, W]` tensor scaled by 1/255.
pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let g = Graymap::read(path)?;
    Tensor::new(vec![g.height, g.width], g.to_unit())
}

/// Bilinear resampling of an `[H, W]` grid to `[1, size, size]`.
pub fn resize_to_input(grid: &Tensor, size: usize) -> Result<Tensor> {
    grid.expect_rank(2, "resize_to_input")?;
    let (h, w) = (grid.shape()[0], grid.shape()[1]);
    let data = resample(grid.data(), h, w, size, size, Interpolation::Bilinear)?;
    Tensor::new(vec![1, size, size], data)
}

/// `clamp(x + N(0, sigma^2), 0, 1)` elementwise.
pub fn add_gaussian_noise(image: &Tensor, spec: &NoiseSpec) -> Result<Tensor> {
    if spec.sigma == 0.0 {
        return Ok(image.clone());
    }
    let normal = Normal::new(0.0f32, spec.sigma)
        .map_err(|e| Error::InvalidArgument(format!("noise sigma {}: {e}", spec.sigma)))?;
    let mut rng = rng_from(spec.seed, &[STREAM_NOISE]);
    let mut out = image.clone();
    for v in out.data_mut() {
        *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Loads and resizes every manifest row, in manifest order.
pub fn load_samples(manifest: &DatasetManifest, size: usize) -> Result<Vec<Sample>> {
    manifest
        .rows
        .iter()
        .map(|row| {
            let grid = load_image(&row.path)?;
            Ok(Sample { id: row.id.clone(), image: resize_to_input(&grid, size)?, label: row.label })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_and_white_images() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.pgm");
        Graymap::new(4, 4, vec![0; 16]).unwrap().write(&p).unwrap();
        assert!(load_image(&p).unwrap().data().iter().all(|&v| v == 0.0));
        Graymap::new(4, 4, vec![255; 16]).unwrap().write(&p).unwrap();
        assert!(load_image(&p).unwrap().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn resize_identity_and_constant() {
        let grid = Tensor::from_fn(&[137, 137], |i| (i % 251) as f32 / 250.0);
        let out = resize_to_input(&grid, 137).unwrap();
        assert_eq!(out.data(), grid.data());
        let c = resize_to_input(&Tensor::full(&[40, 90], 0.625), 137).unwrap();
        assert!(c.data().iter().all(|&v| (v - 0.625).abs() < 1e-6));
    }

    #[test]
    fn resize_checkerboard_preserves_mean() {
        let grid = Tensor::from_fn(&[274, 274], |i| ((i / 274 + i % 274) % 2) as f32);
        let out = resize_to_input(&grid, 137).unwrap();
        let mean = out.sum() / out.numel() as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn noise_properties() {
        let img = Tensor::full(&[1, 137, 137], 0.5);
        let zero = add_gaussian_noise(&img, &NoiseSpec::new(0.0, 1).unwrap()).unwrap();
        assert_eq!(zero, img);
        let spec = NoiseSpec::new(0.05, 42).unwrap();
        let a = add_gaussian_noise(&img, &spec).unwrap();
        assert_eq!(a, add_gaussian_noise(&img, &spec).unwrap());
        let n = a.numel() as f64;
        let mean = a.sum() / n;
        let std = (a.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 0.05).abs() < 0.003, "std {std}");
        assert!(NoiseSpec::new(-0.1, 0).is_err());
    }
}
