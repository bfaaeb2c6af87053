//! Run configurations for the CLI commands.
//!
//! Configs are echoed verbatim into every JSON artifact for provenance; the
//! output directory is excluded from the echo (it is a sink, not an input),
//! which is what lets two runs into different directories stay byte-identical.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use fuelcast::data::{load_csv, synth_fuel, Dataset, SynthConfig};
use fuelcast::ensemble::{ForestConfig, GbmConfig};
use fuelcast::linear::LassoConfig;
use fuelcast::neural::MlpConfig;

/// Where a command's dataset comes from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf, target: String },
    Synth { config: SynthConfig },
}

impl DataSource {
    /// Load the dataset; the second value counts dropped CSV rows.
    pub fn load(&self) -> fuelcast::Result<(Dataset, usize)> {
        match self {
            DataSource::Csv { path, target } => load_csv(path, target),
            DataSource::Synth { config } => Ok((synth_fuel(config)?, 0)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SynthCommandConfig {
    pub synth: SynthConfig,
    pub master_seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DescribeConfig {
    pub source: DataSource,
    pub master_seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RankConfig {
    pub source: DataSource,
    /// Extra-Trees ensemble size for the importance scores.
    pub n_trees: usize,
    pub master_seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}

/// Lambda grid searched by inner cross-validation inside `compare`:
/// `n_points` logarithmically spaced values spanning
/// [min_factor, max_factor] * lambda_max of each outer-fold training set.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LassoGridConfig {
    pub n_points: usize,
    pub min_factor: f64,
    pub max_factor: f64,
    pub inner_folds: usize,
    pub lasso: LassoConfig,
}

impl Default for LassoGridConfig {
    fn default() -> Self {
        LassoGridConfig {
            n_points: 10,
            min_factor: 1e-4,
            max_factor: 1.0,
            inner_folds: 5,
            lasso: LassoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CompareConfig {
    pub source: DataSource,
    pub folds: usize,
    pub repeats: usize,
    pub gbm: GbmConfig,
    pub forest: ForestConfig,
    pub mlp: MlpConfig,
    pub lasso_grid: LassoGridConfig,
    pub master_seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbm,
    Forest,
    Mlp,
    Lasso,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gbm => "gbm",
            ModelKind::Forest => "forest",
            ModelKind::Mlp => "mlp",
            ModelKind::Lasso => "lasso",
        }
    }

    pub const ALL: [ModelKind; 4] = [
        ModelKind::Gbm,
        ModelKind::Forest,
        ModelKind::Mlp,
        ModelKind::Lasso,
    ];
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CurveConfig {
    pub source: DataSource,
    pub folds: usize,
    /// Models to trace; empty means all four.
    pub models: Vec<ModelKind>,
    /// Training-set sizes; empty picks a 10-point grid up to the largest
    /// size every fold can supply.
    pub sizes: Vec<usize>,
    pub gbm: GbmConfig,
    pub forest: ForestConfig,
    pub mlp: MlpConfig,
    pub lasso: LassoConfig,
    pub master_seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    pub source: DataSource,
    pub model: ModelKind,
    pub gbm: GbmConfig,
    pub forest: ForestConfig,
    pub mlp: MlpConfig,
    pub lasso: LassoConfig,
    pub master_seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PredictConfig {
    pub model_file: PathBuf,
    pub input: PathBuf,
    pub master_seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}
