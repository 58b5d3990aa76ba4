//! Command-line pipeline over the `sdph` library.
//!
//! Every subcommand reads files, writes files atomically and returns a one-line JSON
//! summary. [`run`] is the whole program minus argument parsing and process exit.

pub mod commands;
pub mod config;
pub mod reproduce;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use config::PipelineConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] sdph::Error),
}

impl CliError {
    /// 1 for bad input or configuration, 2 for numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numeric() => 2,
            _ => 1,
        }
    }
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

from_core!(
    sdph::io::FormatError,
    sdph::volume::VolumeError,
    sdph::phantom::PhantomError,
    sdph::sdt::SdtError,
    sdph::cubical::PersistenceError,
    sdph::diagram::DiagramError,
    sdph::texture_local::TextureError,
    sdph::texture_global::GlobalError,
    sdph::mixture::MixtureError
);

#[derive(Debug, Parser)]
#[command(name = "sdph", version, about = "Signed distance persistent homology pipeline")]
pub struct Cli {
    /// TOML file of `key = value` pipeline settings.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PhantomKind {
    Ball,
    Torus,
    Vessel,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic binary volume.
    Phantom {
        #[arg(long, value_enum, default_value = "vessel")]
        kind: PhantomKind,
        /// Vessel network class: thick-sparse, thin-dense or thin-dilated.
        #[arg(long, default_value = "thick-sparse")]
        class: String,
        /// Volume size; defaults to `phantom_dims`.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Shape center; defaults to the volume center.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        center: Option<Vec<f64>>,
        /// Ball radius.
        #[arg(long, default_value_t = 5.0)]
        radius: f64,
        #[arg(long, default_value_t = 10.0)]
        ring_radius: f64,
        #[arg(long, default_value_t = 3.0)]
        tube_radius: f64,
        /// Torus axis: x, y or z.
        #[arg(long, default_value = "z")]
        axis: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Signed distance transform of a volume.
    Sdt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cubical persistence of a field.
    Ph {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sample identifier; defaults to the input file stem.
        #[arg(long)]
        id: Option<String>,
    },
    /// Critical-size quadrant table of a diagram after the persistence filter.
    Quadrant {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Local texture features of one or more diagrams.
    Features {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster feature rows into textures.
    Cluster {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-sample texture percentages.
        #[arg(long)]
        compositions: Option<PathBuf>,
        /// Two-component PCA of the compositions.
        #[arg(long)]
        embedding: Option<PathBuf>,
    },
    /// Persistence-weighted KDE heatmaps of quadrant tables on a shared grid.
    Kde {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write a PGM image next to each density.
        #[arg(long)]
        pgm: bool,
    },
    /// UPGMA tree over densities.
    Tree {
        #[arg(long, num_args = 2.., required = true)]
        input: Vec<PathBuf>,
        /// Newick output.
        #[arg(long)]
        out: PathBuf,
        /// Report flat clusters at this merge height.
        #[arg(long)]
        cut: Option<f64>,
    },
    /// Bootstrap-averaged phase model from pooled quadrant tables.
    Fit {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        phase: sdph::Phase,
        /// Number of components; defaults to the phase size in the config.
        #[arg(long)]
        components: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nearest phase model for each quadrant table.
    Classify {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        model: Vec<PathBuf>,
        /// Known phase of every input, recorded for `evaluate`.
        #[arg(long)]
        truth: Option<sdph::Phase>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy and confusion matrix of evaluation tables.
    Evaluate {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic end-to-end staging study.
    Reproduce {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Loads the config and executes the subcommand.
pub fn run(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), &cli.set)?;
    commands::dispatch(&cli.command, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sdph::mixture::MixtureError;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(MixtureError::NotSpd).exit_code(), 2);
        assert_eq!(CliError::from(MixtureError::GridTooCoarse { mass: 0.5 }).exit_code(), 2);
        assert_eq!(CliError::from(MixtureError::NoModels).exit_code(), 1);
        assert_eq!(CliError::Validation("x".into()).exit_code(), 1);
        let cfg = CliError::Config { key: "seed".into(), message: "bad".into() };
        assert_eq!((cfg.exit_code(), cfg.to_string().contains("seed")), (1, true));
    }
}
