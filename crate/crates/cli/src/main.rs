//! `fuelcast` — train, evaluate, and compare fuel-consumption regressors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fuelcast::data::SynthConfig;
use fuelcast::ensemble::{ForestConfig, GbmConfig};
use fuelcast::linear::LassoConfig;
use fuelcast::neural::{Activation, MlpConfig};
use fuelcast::tree::TreeConfig;

use fuelcast_cli::config::{
    CompareConfig, CurveConfig, DataSource, DescribeConfig, LassoGridConfig, ModelKind,
    PredictConfig, RankConfig, SynthCommandConfig, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "fuelcast",
    about = "Tabular regression workflows for generator fuel-consumption records",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SourceArgs {
    /// CSV input file (headed, comma-separated).
    #[arg(long, conflicts_with = "synth_n")]
    input: Option<PathBuf>,
    /// Target column name for CSV inputs.
    #[arg(long, default_value = "fuel_l")]
    target: String,
    /// Generate a synthetic dataset with this many rows instead of reading a file.
    #[arg(long)]
    synth_n: Option<usize>,
    /// Relative target noise for the synthetic generator.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Nuisance feature count for the synthetic generator.
    #[arg(long, default_value_t = 5)]
    noise_features: usize,
}

impl SourceArgs {
    fn to_source(&self) -> Result<DataSource, String> {
        match (&self.input, self.synth_n) {
            (Some(path), None) => Ok(DataSource::Csv {
                path: path.clone(),
                target: self.target.clone(),
            }),
            (None, Some(n_rows)) => Ok(DataSource::Synth {
                config: SynthConfig {
                    n_rows,
                    n_noise_features: self.noise_features,
                    noise_sigma: self.noise,
                    seed: 0,
                },
            }),
            (None, None) => Err("give either --input PATH or --synth-n N".into()),
            (Some(_), Some(_)) => Err("--input and --synth-n are mutually exclusive".into()),
        }
    }
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Master seed; every sub-seed derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Gbm,
    Forest,
    Mlp,
    Lasso,
}

impl From<ModelArg> for ModelKind {
    fn from(value: ModelArg) -> Self {
        match value {
            ModelArg::Gbm => ModelKind::Gbm,
            ModelArg::Forest => ModelKind::Forest,
            ModelArg::Mlp => ModelKind::Mlp,
            ModelArg::Lasso => ModelKind::Lasso,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Sigmoid,
    Tanh,
}

#[derive(Args, Clone)]
struct HyperArgs {
    /// Boosting stages.
    #[arg(long, default_value_t = 100)]
    gbm_stages: usize,
    #[arg(long, default_value_t = 0.1)]
    gbm_learning_rate: f64,
    /// Depth of each boosting tree.
    #[arg(long, default_value_t = 3)]
    gbm_max_depth: usize,
    #[arg(long, default_value_t = 1)]
    gbm_min_leaf: usize,

    /// Trees in the random forest.
    #[arg(long, default_value_t = 100)]
    forest_trees: usize,
    /// Features tried per node; defaults to max(1, round(p/3)).
    #[arg(long)]
    forest_mtry: Option<usize>,
    /// Disable bootstrap resampling.
    #[arg(long, default_value_t = false)]
    forest_no_bootstrap: bool,
    #[arg(long, default_value_t = 1)]
    forest_min_leaf: usize,

    #[arg(long, default_value_t = 16)]
    mlp_hidden: usize,
    #[arg(long, value_enum, default_value_t = ActivationArg::Sigmoid)]
    mlp_activation: ActivationArg,
    #[arg(long, default_value_t = 500)]
    mlp_epochs: usize,
    #[arg(long, default_value_t = 32)]
    mlp_batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    mlp_learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    mlp_momentum: f64,

    /// L1 penalty for `train`/`curve`; `compare` selects its own by inner CV.
    #[arg(long, default_value_t = 0.0)]
    lasso_lambda: f64,
    #[arg(long, default_value_t = 1e-7)]
    lasso_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    lasso_max_sweeps: usize,
}

impl HyperArgs {
    fn gbm(&self) -> GbmConfig {
        GbmConfig {
            n_stages: self.gbm_stages,
            learning_rate: self.gbm_learning_rate,
            tree: TreeConfig {
                max_depth: Some(self.gbm_max_depth),
                min_samples_leaf: self.gbm_min_leaf,
                ..TreeConfig::default()
            },
            seed: 0,
        }
    }

    fn forest(&self) -> ForestConfig {
        ForestConfig {
            n_trees: self.forest_trees,
            bootstrap: !self.forest_no_bootstrap,
            m_try: self.forest_mtry,
            tree: TreeConfig {
                min_samples_leaf: self.forest_min_leaf,
                ..TreeConfig::default()
            },
            seed: 0,
        }
    }

    fn mlp(&self) -> MlpConfig {
        MlpConfig {
            n_hidden: self.mlp_hidden,
            activation: match self.mlp_activation {
                ActivationArg::Sigmoid => Activation::Sigmoid,
                ActivationArg::Tanh => Activation::Tanh,
            },
            epochs: self.mlp_epochs,
            batch_size: self.mlp_batch_size,
            learning_rate: self.mlp_learning_rate,
            momentum: self.mlp_momentum,
            seed: 0,
            standardize_target: true,
        }
    }

    fn lasso(&self) -> LassoConfig {
        LassoConfig {
            lambda: self.lasso_lambda,
            tol: self.lasso_tol,
            max_sweeps: self.lasso_max_sweeps,
            standardize_inputs: true,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic fuel dataset as CSV.
    Synth {
        /// Rows to generate.
        #[arg(long)]
        synth_n: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 5)]
        noise_features: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Per-column descriptive statistics plus target normality.
    Describe {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Rank features by Extra-Trees importance.
    Rank {
        #[command(flatten)]
        source: SourceArgs,
        /// Ensemble size for the importance scores.
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Cross-validate gbm, forest, mlp, and lasso against the mean baseline.
    Compare {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Repeat the K-fold split this many times.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Learning curves over increasing training sizes.
    Curve {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Restrict to one model (default: all four).
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        /// Comma-separated training sizes (default: a 10-point grid).
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit one model on the full dataset and save it.
    Train {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, value_enum)]
        model: ModelArg,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score a feature CSV with a saved model.
    Predict {
        /// Model JSON produced by `train`.
        #[arg(long)]
        model_file: PathBuf,
        /// Feature CSV; must carry every training feature by name.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn run(cli: Cli) -> anyhow::Result<Vec<PathBuf>> {
    match cli.command {
        Command::Synth {
            synth_n,
            noise,
            noise_features,
            common,
        } => fuelcast_cli::run_synth(&SynthCommandConfig {
            synth: SynthConfig {
                n_rows: synth_n,
                n_noise_features: noise_features,
                noise_sigma: noise,
                seed: 0,
            },
            master_seed: common.seed,
            out: common.out,
        }),
        Command::Describe { source, common } => {
            fuelcast_cli::run_describe(&DescribeConfig {
                source: source.to_source().map_err(anyhow::Error::msg)?,
                master_seed: common.seed,
                out: common.out,
            })
        }
        Command::Rank {
            source,
            trees,
            common,
        } => fuelcast_cli::run_rank(&RankConfig {
            source: source.to_source().map_err(anyhow::Error::msg)?,
            n_trees: trees,
            master_seed: common.seed,
            out: common.out,
        }),
        Command::Compare {
            source,
            folds,
            repeats,
            hyper,
            common,
        } => fuelcast_cli::run_compare(&CompareConfig {
            source: source.to_source().map_err(anyhow::Error::msg)?,
            folds,
            repeats,
            gbm: hyper.gbm(),
            forest: hyper.forest(),
            mlp: hyper.mlp(),
            lasso_grid: LassoGridConfig {
                lasso: hyper.lasso(),
                ..LassoGridConfig::default()
            },
            master_seed: common.seed,
            out: common.out,
        }),
        Command::Curve {
            source,
            folds,
            model,
            sizes,
            hyper,
            common,
        } => fuelcast_cli::run_curve(&CurveConfig {
            source: source.to_source().map_err(anyhow::Error::msg)?,
            folds,
            models: model.into_iter().map(ModelKind::from).collect(),
            sizes,
            gbm: hyper.gbm(),
            forest: hyper.forest(),
            mlp: hyper.mlp(),
            lasso: hyper.lasso(),
            master_seed: common.seed,
            out: common.out,
        }),
        Command::Train {
            source,
            model,
            hyper,
            common,
        } => fuelcast_cli::run_train(&TrainConfig {
            source: source.to_source().map_err(anyhow::Error::msg)?,
            model: model.into(),
            gbm: hyper.gbm(),
            forest: hyper.forest(),
            mlp: hyper.mlp(),
            lasso: hyper.lasso(),
            master_seed: common.seed,
            out: common.out,
        }),
        Command::Predict {
            model_file,
            input,
            common,
        } => fuelcast_cli::run_predict(&PredictConfig {
            model_file,
            input,
            master_seed: common.seed,
            out: common.out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for path in paths {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
