//! Flat `key = value` run configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gdcnn::analysis::RegionBands;
use gdcnn::data::SplitFractions;
use gdcnn::model::{Head, ModelConfig, TrainHyper};
use gdcnn::resample::Interpolation;

use crate::error::{invalid, usage, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub hyper: TrainHyper,
    pub fractions: (f64, f64, f64),
    pub bands: RegionBands,
    pub upsample: Interpolation,
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
}

pub const KEYS: &[&str] = &[
    "head",
    "conv_filters",
    "dense_hidden",
    "dropout_rate",
    "lr",
    "batch_size",
    "epochs",
    "noise_sigma",
    "train_fraction",
    "val_fraction",
    "test_fraction",
    "tau",
    "rho",
    "metacarpals_start",
    "carpals_start",
    "forearm_start",
    "forearm_split",
    "mirror",
    "upsample",
    "seed",
    "manifest",
    "checkpoint",
    "out",
];

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            hyper: TrainHyper::default(),
            fractions: (0.8, 0.08, 0.12),
            bands: RegionBands::default(),
            upsample: Interpolation::Bilinear,
            manifest: None,
            checkpoint: None,
            out: PathBuf::from("gdcnn-out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|_| usage(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(usage(format!("invalid value `{value}` for `{key}` (expected true or false)"))),
    }
}

fn parse_filters(value: &str) -> CliResult<[usize; 4]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(usage(format!("conv_filters needs 4 comma-separated counts, got `{value}`")));
    }
    let mut out = [0; 4];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse("conv_filters", p)?;
    }
    Ok(out)
}

impl RunConfig {
    /// Applies one assignment. Relative paths are resolved against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> CliResult<()> {
        let path = || base.join(value);
        match key {
            "head" => self.model.head = value.parse::<Head>().map_err(invalid)?,
            "conv_filters" => self.model.conv_filters = parse_filters(value)?,
            "dense_hidden" => self.model.dense_hidden = parse(key, value)?,
            "dropout_rate" => self.model.dropout_rate = parse(key, value)?,
            "lr" => self.hyper.learning_rate = parse(key, value)?,
            "batch_size" => self.hyper.batch_size = parse(key, value)?,
            "epochs" => self.hyper.epochs = parse(key, value)?,
            "noise_sigma" => self.hyper.noise_sigma = parse(key, value)?,
            "train_fraction" => self.fractions.0 = parse(key, value)?,
            "val_fraction" => self.fractions.1 = parse(key, value)?,
            "test_fraction" => self.fractions.2 = parse(key, value)?,
            "tau" => self.bands.tau = parse(key, value)?,
            "rho" => self.bands.rho = parse(key, value)?,
            "metacarpals_start" => self.bands.metacarpals_start = parse(key, value)?,
            "carpals_start" => self.bands.carpals_start = parse(key, value)?,
            "forearm_start" => self.bands.forearm_start = parse(key, value)?,
            "forearm_split" => self.bands.forearm_split = parse(key, value)?,
            "mirror" => self.bands.mirror = parse_bool(key, value)?,
            "upsample" => {
                self.upsample = match value {
                    "bilinear" => Interpolation::Bilinear,
                    "nearest" => Interpolation::Nearest,
                    _ => return Err(usage(format!("upsample must be bilinear or nearest, got `{value}`"))),
                }
            }
            "seed" => self.hyper.seed = parse(key, value)?,
            "manifest" => self.manifest = Some(path()),
            "checkpoint" => self.checkpoint = Some(path()),
            "out" => self.out = path(),
            _ => return Err(usage(format!("unknown config key `{key}` (known: {})", KEYS.join(", ")))),
        }
        Ok(())
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, base: &Path, origin: &Path) -> CliResult<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{}:{}: expected `key = value`", origin.display(), n + 1)))?;
            self.set(key.trim(), value.trim(), base)
                .map_err(|e| usage(format!("{}:{}: {e}", origin.display(), n + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text, path.parent().unwrap_or(Path::new("")), path)?;
        Ok(cfg)
    }

    /// `--set key=value` overrides, relative to the working directory.
    pub fn apply_overrides(&mut self, sets: &[String]) -> CliResult<()> {
        for s in sets {
            let (k, v) = s.split_once('=').ok_or_else(|| usage(format!("--set expects key=value, got `{s}`")))?;
            self.set(k.trim(), v.trim(), Path::new(""))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        self.model.validate().map_err(invalid)?;
        self.split_fractions()?;
        self.bands.validate().map_err(invalid)?;
        let h = &self.hyper;
        if h.batch_size == 0 {
            return Err(usage("batch_size must be at least 1"));
        }
        if h.epochs == 0 {
            return Err(usage("epochs must be at least 1"));
        }
        if !(h.learning_rate.is_finite() && h.learning_rate > 0.0) {
            return Err(usage(format!("lr must be positive, got {}", h.learning_rate)));
        }
        if !(h.noise_sigma.is_finite() && h.noise_sigma >= 0.0) {
            return Err(usage(format!("noise_sigma must be non-negative, got {}", h.noise_sigma)));
        }
        Ok(())
    }

    pub fn split_fractions(&self) -> CliResult<SplitFractions> {
        let (a, b, c) = self.fractions;
        SplitFractions::new(a, b, c).map_err(invalid)
    }
}
