//! Run configuration: a TOML key-value file plus flag overrides.
//! Flags win over file values; file values win over defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use senns_core::data::{load_csv, load_idx, make_gaussians, make_two_moons, LabeledDataset};
use senns_core::network::TransferKind;
use senns_core::objective::Hyperparams;

use crate::commands::CliError;

/// File-side configuration. Every field is optional; flags override.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    /// Sizes of the non-input layers; the last entry is the feature
    /// dimension.
    pub layers: Option<Vec<usize>>,
    /// Transfer kinds per non-input layer (`sigmoid|tanh|linear`).
    pub transfer: Option<Vec<String>>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub lambda4: Option<f64>,
    pub alpha: Option<f64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    /// `full` or `heuristic`.
    pub pair_mode: Option<String>,
    /// Same-class fan-out for heuristic pairs.
    pub k: Option<usize>,
    pub exclude_self_pairs: Option<bool>,
    pub standardize: Option<bool>,
    pub reproducible: Option<bool>,
    pub threads: Option<usize>,
    pub halve_on_increase: Option<bool>,
    pub data: Option<DataFileConfig>,
    pub output: Option<OutputFileConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFileConfig {
    /// `csv`, `idx`, `gaussians`, or `two-moons`.
    pub kind: Option<String>,
    pub path: Option<PathBuf>,
    pub label_column: Option<usize>,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub limit: Option<usize>,
    pub n: Option<usize>,
    pub noise: Option<f64>,
    pub n_per_class: Option<usize>,
    pub sigma: Option<f64>,
    pub centers: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFileConfig {
    pub model: Option<PathBuf>,
    pub telemetry: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
            }
        }
    }
}

/// Shared dataset flags; `None` means "take it from the config file".
#[derive(Debug, Default, clap::Args)]
pub struct DataArgs {
    /// Dataset kind: csv | idx | gaussians | two-moons
    #[arg(long)]
    pub data_kind: Option<String>,
    /// CSV file with numeric features and one label column
    #[arg(long)]
    pub data_path: Option<PathBuf>,
    /// Zero-based label column index (csv)
    #[arg(long)]
    pub label_column: Option<usize>,
    /// IDX3 image file (idx)
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// IDX1 label file (idx)
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Take at most this many examples (idx)
    #[arg(long)]
    pub limit: Option<usize>,
    /// Number of points (two-moons)
    #[arg(long)]
    pub n: Option<usize>,
    /// Gaussian jitter (two-moons)
    #[arg(long)]
    pub noise: Option<f64>,
    /// Points per class (gaussians)
    #[arg(long)]
    pub n_per_class: Option<usize>,
    /// Cluster spread (gaussians)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Standardize features to mean 0, std 1
    #[arg(long)]
    pub standardize: bool,
}

/// Fully resolved dataset source.
#[derive(Debug, Clone)]
pub enum DataSpec {
    Csv {
        path: PathBuf,
        label_column: usize,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        limit: usize,
    },
    Gaussians {
        n_per_class: usize,
        centers: Vec<Vec<f64>>,
        sigma: f64,
    },
    TwoMoons {
        n: usize,
        noise: f64,
    },
}

impl DataSpec {
    pub fn resolve(args: &DataArgs, file: Option<&DataFileConfig>) -> Result<Self, CliError> {
        let file_default = DataFileConfig::default();
        let file = file.unwrap_or(&file_default);
        let kind = args
            .data_kind
            .clone()
            .or_else(|| file.kind.clone())
            .ok_or_else(|| {
                CliError::Usage("no dataset given (--data-kind or [data] kind)".to_string())
            })?;
        match kind.as_str() {
            "csv" => {
                let path = args
                    .data_path
                    .clone()
                    .or_else(|| file.path.clone())
                    .ok_or_else(|| CliError::Usage("csv data needs --data-path".to_string()))?;
                Ok(DataSpec::Csv {
                    path,
                    label_column: args.label_column.or(file.label_column).ok_or_else(|| {
                        CliError::Usage("csv data needs --label-column".to_string())
                    })?,
                })
            }
            "idx" => Ok(DataSpec::Idx {
                images: args
                    .images
                    .clone()
                    .or_else(|| file.images.clone())
                    .ok_or_else(|| CliError::Usage("idx data needs --images".to_string()))?,
                labels: args
                    .labels
                    .clone()
                    .or_else(|| file.labels.clone())
                    .ok_or_else(|| CliError::Usage("idx data needs --labels".to_string()))?,
                limit: args.limit.or(file.limit).unwrap_or(usize::MAX),
            }),
            "gaussians" => Ok(DataSpec::Gaussians {
                n_per_class: args.n_per_class.or(file.n_per_class).unwrap_or(20),
                centers: file
                    .centers
                    .clone()
                    .unwrap_or_else(|| vec![vec![0.0, 0.0], vec![3.0, 3.0]]),
                sigma: args.sigma.or(file.sigma).unwrap_or(0.5),
            }),
            "two-moons" => Ok(DataSpec::TwoMoons {
                n: args.n.or(file.n).unwrap_or(100),
                noise: args.noise.or(file.noise).unwrap_or(0.1),
            }),
            other => Err(CliError::Usage(format!(
                "unknown data kind {other:?} (expected csv|idx|gaussians|two-moons)"
            ))),
        }
    }

    pub fn load(&self, seed: u64, standardize: bool) -> Result<LabeledDataset, CliError> {
        let dataset = match self {
            DataSpec::Csv { path, label_column } => load_csv(path, *label_column)?,
            DataSpec::Idx {
                images,
                labels,
                limit,
            } => load_idx(images, labels, *limit)?,
            DataSpec::Gaussians {
                n_per_class,
                centers,
                sigma,
            } => make_gaussians(*n_per_class, centers, *sigma, seed)?,
            DataSpec::TwoMoons { n, noise } => make_two_moons(*n, *noise, seed)?,
        };
        Ok(if standardize {
            dataset.standardized()
        } else {
            dataset
        })
    }
}

/// Pair construction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairModeChoice {
    Full,
    Heuristic,
}

impl FromStr for PairModeChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "full" => Ok(PairModeChoice::Full),
            "heuristic" => Ok(PairModeChoice::Heuristic),
            other => Err(CliError::Usage(format!(
                "unknown pair mode {other:?} (expected full|heuristic)"
            ))),
        }
    }
}

pub fn parse_transfers(names: &[String]) -> Result<Vec<TransferKind>, CliError> {
    names
        .iter()
        .map(|n| TransferKind::from_str(n).map_err(CliError::from))
        .collect()
}

/// Builds validated hyperparameters from flag/file/default layers.
#[allow(clippy::too_many_arguments)]
pub fn resolve_hyperparams(
    file: &FileConfig,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    lambda3: Option<f64>,
    lambda4: Option<f64>,
    alpha: Option<f64>,
    tol: Option<f64>,
    max_iters: Option<usize>,
) -> Result<Hyperparams, CliError> {
    let hp = Hyperparams::new(
        lambda1.or(file.lambda1).unwrap_or(0.4),
        lambda2.or(file.lambda2).unwrap_or(0.4),
        lambda3.or(file.lambda3).unwrap_or(0.1),
        lambda4.or(file.lambda4).unwrap_or(0.1),
        alpha.or(file.alpha).unwrap_or(0.1),
    )
    .with_tol(tol.or(file.tol).unwrap_or(1e-8))
    .with_max_iters(max_iters.or(file.max_iters).unwrap_or(500));
    hp.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(hp)
}
