//! Dataset ingestion, preprocessing, augmentation, splitting, batching, and
//! the synthetic generator.

mod batch;
mod image;
mod manifest;
mod split;
pub mod synth;

pub use batch::{batches, Batch, Batches};
pub use image::{add_gaussian_noise, load_image, load_samples, resize_to_input, NoiseSpec, Sample};
pub use manifest::{load_manifest, DatasetManifest, ManifestRow, MANIFEST_HEADER};
pub use split::{split, Split, SplitFractions};
pub use synth::{generate_synthetic_dataset, IMAGE_DIR, MANIFEST_FILE};
