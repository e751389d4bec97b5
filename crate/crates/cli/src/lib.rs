//! Command-line front end: synthesize data, train, evaluate, and inspect
//! class activation maps. The `gdcnn` binary is a thin wrapper over [`run`].

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "gdcnn", version, about = "Hand radiograph gender classifier with class activation maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args)]
pub struct Common {
    /// Flat `key = value` config file; `#` starts a comment
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one config key, e.g. `--set epochs=10`; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Write a synthetic two-class dataset and its manifest
    Synth {
        #[command(flatten)]
        common: Common,
        /// Images per class
        #[arg(long)]
        n: usize,
    },
    /// Split a manifest, train, and write the checkpoint and history
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Per-class metrics of a checkpoint on a manifest
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Heatmap and overlay graymaps per image (gap head only)
    Cam {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Map this class instead of the predicted one (0/1/male/female)
        #[arg(long)]
        class: Option<String>,
    },
    /// Attention-region histogram over a manifest (gap head only)
    Attention {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        class: Option<String>,
    },
}

fn resolve(common: &Common, manifest: Option<PathBuf>, checkpoint: Option<PathBuf>) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&common.sets)?;
    if let Some(seed) = common.seed {
        cfg.hyper.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if manifest.is_some() {
        cfg.manifest = manifest;
    }
    if checkpoint.is_some() {
        cfg.checkpoint = checkpoint;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let class = |c: &Option<String>| c.as_deref().map(commands::parse_class).transpose();
    match cli.command {
        Command::Synth { common, n } => commands::synth(&resolve(&common, None, None)?, n),
        Command::Train { common, manifest } => commands::train(&resolve(&common, manifest, None)?),
        Command::Eval { common, checkpoint, manifest } => {
            commands::eval(&resolve(&common, manifest, checkpoint)?)
        }
        Command::Cam { common, checkpoint, manifest, class: c } => {
            let forced = class(&c)?;
            commands::cam(&resolve(&common, manifest, checkpoint)?, forced)
        }
        Command::Attention { common, checkpoint, manifest, class: c } => {
            let forced = class(&c)?;
            commands::attention(&resolve(&common, manifest, checkpoint)?, forced)
        }
    }
}

/// Parses `args` (program name first) and runs the command in-process.
pub fn run_args<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| error::usage(e.to_string()))?;
    run(cli)
}
