//! Synthetic stand-in for left-hand radiographs.
//!
//! Every image is a stylized hand: five fingers, five palm bones, a carpal
//! cluster, and the two forearm bones. Only the carpal cluster depends on the
//! class. Class 0 gets one thick fused blob, class 1 four thin blobs with gaps,
//! so the mean intensity of the carpal band separates the classes.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::manifest::{DatasetManifest, ManifestRow};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::model::INPUT_SIZE;
use crate::pgm::Graymap;
use crate::seed::{rng_from, STREAM_SYNTH};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const IMAGE_DIR: &str = "images";

/// Row band, as fractions of the height, in which the class signal lives.
pub const CARPAL_BAND: (f64, f64) = (0.65, 0.82);

const BACKGROUND: f32 = 0.08;
const FINGER_X: [f64; 5] = [30.0, 48.0, 66.0, 84.0, 102.0];

struct Canvas {
    side: usize,
    px: Vec<f32>,
}

impl Canvas {
    fn new(side: usize) -> Self {
        Canvas { side, px: vec![BACKGROUND; side * side] }
    }

    fn paint(&mut self, inside: impl Fn(f64, f64) -> bool, value: f32) {
        for y in 0..self.side {
            for x in 0..self.side {
                if inside(x as f64 + 0.5, y as f64 + 0.5) {
                    let p = &mut self.px[y * self.side + x];
                    *p = p.max(value);
                }
            }
        }
    }

    fn ellipse(&mut self, cx: f64, cy: f64, ax: f64, ay: f64, value: f32) {
        self.paint(|x, y| ((x - cx) / ax).powi(2) + ((y - cy) / ay).powi(2) <= 1.0, value);
    }

    fn rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, value: f32) {
        self.paint(|x, y| x >= x0 && x < x1 && y >= y0 && y < y1, value);
    }
}

/// Renders one `INPUT_SIZE x INPUT_SIZE` image with values in `[0, 1]`.
pub fn render_hand(label: Label, rng: &mut impl Rng) -> Vec<f32> {
    let side = INPUT_SIZE;
    let mut c = Canvas::new(side);
    let dx: f64 = rng.random_range(-2.0..=2.0);
    let dy: f64 = rng.random_range(-1.0..=1.0);
    let gain: f32 = rng.random_range(0.85..=1.0);

    for &fx in &FINGER_X {
        let tip: f64 = rng.random_range(6.0..20.0);
        c.rect(fx + dx - 3.5, tip + dy, fx + dx + 3.5, 60.0 + dy, 0.75 * gain);
    }
    for &fx in &FINGER_X {
        let mx = 68.0 + (fx - 66.0) * 0.8 + dx;
        c.rect(mx - 3.0, 64.0 + dy, mx + 3.0, 87.0 + dy, 0.7 * gain);
    }
    let (cx, cy) = (68.0 + dx, 100.5 + dy);
    match label {
        Label::Male => c.ellipse(cx, cy, 26.0, 9.0, 0.85 * gain),
        Label::Female => {
            for off in [-19.5, -6.5, 6.5, 19.5] {
                c.ellipse(cx + off, cy, 2.5, 7.0, 0.85 * gain);
            }
        }
    }
    c.rect(42.0 + dx, 114.0 + dy, 58.0 + dx, side as f64, 0.65 * gain);
    c.rect(80.0 + dx, 114.0 + dy, 92.0 + dx, side as f64, 0.65 * gain);

    let texture = Normal::new(0.0f32, 0.02).expect("valid sigma");
    c.px.iter_mut().for_each(|p| *p = (*p + texture.sample(rng)).clamp(0.0, 1.0));
    c.px
}

/// Mean of rows whose centers fall in `[start, end)` (fractions of the height).
pub fn band_mean(values: &[f32], height: usize, width: usize, band: (f64, f64)) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..height {
        let f = (y as f64 + 0.5) / height as f64;
        if f >= band.0 && f < band.1 {
            sum += values[y * width..(y + 1) * width].iter().map(|&v| v as f64).sum::<f64>();
            n += width;
        }
    }
    sum / n as f64
}

/// Writes `2 * n_per_class` graymaps under `out_dir/images/` and the manifest
/// `out_dir/manifest.csv`. Rows alternate class 0 and class 1.
pub fn generate_synthetic_dataset(
    n_per_class: usize,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be at least 1".into()));
    }
    let out_dir = &std::path::absolute(out_dir.as_ref()).map_err(|e| Error::io(out_dir.as_ref(), e))?;
    let image_dir = out_dir.join(IMAGE_DIR);
    fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;
    let mut rows = Vec::with_capacity(2 * n_per_class);
    for i in 0..n_per_class {
        for label in Label::ALL {
            let id = format!("{}_{i:04}", label.name().to_lowercase());
            let mut rng = rng_from(seed, &[STREAM_SYNTH, label.index() as u64, i as u64]);
            let values = render_hand(label, &mut rng);
            let path: PathBuf = image_dir.join(format!("{id}.pgm"));
            Graymap::from_unit(INPUT_SIZE, INPUT_SIZE, &values)?.write(&path)?;
            rows.push(ManifestRow { id, path, label });
        }
    }
    let manifest = DatasetManifest::new(rows)?;
    manifest.write(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
