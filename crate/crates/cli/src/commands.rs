//! The seven CLI commands, as library functions over config structs.
//!
//! Sub-seed streams derived from the master seed: 0 = synthetic data,
//! 1 = cross-validation plan, 2 = model training, 3 = feature ranking,
//! 0xA5 = the inner lambda-selection plan inside `compare`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use fuelcast::data::{
    describe, normality_r2, read_feature_rows, Dataset, DescriptiveStats, SynthConfig,
};
use fuelcast::ensemble::{fit_forest, fit_gbm, ForestConfig, ForestModel, GbmModel};
use fuelcast::eval::{
    cross_validate_with, fit_learner, learning_curve, CvPlan, CvResult, CvScheme, LearnerSpec,
    Regressor,
};
use fuelcast::linear::{fit_lasso, lambda_max, LassoConfig, LassoModel};
use fuelcast::neural::{fit_mlp, MlpConfig, MlpModel};
use fuelcast::rng::derive_seed;
use fuelcast::tree::{feature_importance, fit_extra_trees, TreeConfig};

use crate::artifacts::{commit, dataset_fingerprint, fmt_f64, Artifact};
use crate::config::{
    CompareConfig, CurveConfig, DataSource, DescribeConfig, ModelKind, PredictConfig, RankConfig,
    SynthCommandConfig, TrainConfig,
};

const STREAM_DATA: u64 = 0;
const STREAM_PLAN: u64 = 1;
const STREAM_MODEL: u64 = 2;
const STREAM_RANK: u64 = 3;
const STREAM_INNER: u64 = 0xA5;

#[derive(Serialize)]
struct Provenance<'a, C: Serialize> {
    command: &'a str,
    master_seed: u64,
    config: &'a C,
}

fn run_config_artifact<C: Serialize>(command: &str, master_seed: u64, config: &C) -> Result<Artifact> {
    Artifact::json(
        "run_config.json",
        &Provenance {
            command,
            master_seed,
            config,
        },
    )
}

/// Generate a synthetic dataset and write it as `synth.csv`.
pub fn run_synth(config: &SynthCommandConfig) -> Result<Vec<PathBuf>> {
    let synth = SynthConfig {
        seed: derive_seed(config.master_seed, STREAM_DATA),
        ..config.synth.clone()
    };
    let data = fuelcast::data::synth_fuel(&synth)?;
    let header = {
        let mut cols: Vec<&str> = data.feature_names().iter().map(|s| s.as_str()).collect();
        cols.push(data.target_name());
        cols.join(",")
    };
    let rows = (0..data.n_rows()).map(|i| {
        let mut cells: Vec<String> = data.row(i).iter().map(|&v| fmt_f64(v)).collect();
        cells.push(fmt_f64(data.target()[i]));
        cells.join(",")
    });
    let artifacts = vec![
        Artifact::csv("synth.csv", &header, rows),
        run_config_artifact("synth", config.master_seed, config)?,
    ];
    commit(&config.out, artifacts)
}

fn load_source(source: &DataSource, master_seed: u64) -> Result<(Dataset, usize)> {
    let resolved = match source {
        DataSource::Synth { config } => DataSource::Synth {
            config: SynthConfig {
                seed: derive_seed(master_seed, STREAM_DATA),
                ..config.clone()
            },
        },
        csv => csv.clone(),
    };
    Ok(resolved.load()?)
}

#[derive(Serialize)]
struct NamedStats {
    name: String,
    #[serde(flatten)]
    stats: DescriptiveStats,
}

#[derive(Serialize)]
struct DescribeReport<'a> {
    command: &'a str,
    master_seed: u64,
    config: &'a DescribeConfig,
    dropped_rows: usize,
    features: Vec<NamedStats>,
    target: TargetStats,
}

#[derive(Serialize)]
struct TargetStats {
    name: String,
    #[serde(flatten)]
    stats: DescriptiveStats,
    /// Probability-plot r^2 against the standard normal; null when undefined.
    normality_r2: Option<f64>,
}

/// Per-column descriptive statistics plus target normality, as JSON.
pub fn run_describe(config: &DescribeConfig) -> Result<Vec<PathBuf>> {
    let (data, dropped_rows) = load_source(&config.source, config.master_seed)?;
    let mut features = Vec::with_capacity(data.n_features());
    for (j, name) in data.feature_names().iter().enumerate() {
        features.push(NamedStats {
            name: name.clone(),
            stats: describe(&data.feature_column(j))?,
        });
    }
    let target = TargetStats {
        name: data.target_name().to_string(),
        stats: describe(data.target())?,
        normality_r2: normality_r2(data.target()).ok(),
    };
    let report = DescribeReport {
        command: "describe",
        master_seed: config.master_seed,
        config,
        dropped_rows,
        features,
        target,
    };
    let artifacts = vec![
        Artifact::json("describe.json", &report)?,
        run_config_artifact("describe", config.master_seed, config)?,
    ];
    commit(&config.out, artifacts)
}

/// Extra-Trees feature importance, written descending as `rank.csv`.
pub fn run_rank(config: &RankConfig) -> Result<Vec<PathBuf>> {
    let (data, _) = load_source(&config.source, config.master_seed)?;
    let tree_cfg = TreeConfig::extra_trees(
        data.n_features(),
        derive_seed(config.master_seed, STREAM_RANK),
    );
    let trees = fit_extra_trees(&data, config.n_trees, &tree_cfg)?;
    let importance = feature_importance(&trees, data.n_features())?;
    let mut ranked: Vec<(&String, f64)> = data
        .feature_names()
        .iter()
        .zip(importance.scores.iter().copied())
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));
    let rows = ranked
        .iter()
        .map(|(name, score)| format!("{name},{}", fmt_f64(*score)));
    let artifacts = vec![
        Artifact::csv("rank.csv", "feature,importance", rows),
        run_config_artifact("rank", config.master_seed, config)?,
    ];
    commit(&config.out, artifacts)
}

#[derive(Serialize)]
struct ModelComparison {
    name: String,
    cv: CvResult,
    /// Lambda chosen by inner CV on each outer fold (lasso only).
    #[serde(skip_serializing_if = "Option::is_none")]
    lasso_lambdas: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct DatasetSummary {
    n_rows: usize,
    n_features: usize,
    feature_names: Vec<String>,
    target_name: String,
    fingerprint: String,
}

#[derive(Serialize)]
struct CompareReport<'a> {
    command: &'a str,
    master_seed: u64,
    config: &'a CompareConfig,
    dataset: DatasetSummary,
    models: Vec<ModelComparison>,
    /// Model names ordered by mean NSE, best first; ties break by name.
    ranking: Vec<String>,
}

fn compare_plan(config: &CompareConfig) -> CvPlan {
    let scheme = if config.repeats > 1 {
        CvScheme::RepeatedKFold {
            k: config.folds,
            repeats: config.repeats,
        }
    } else {
        CvScheme::KFold { k: config.folds }
    };
    CvPlan {
        scheme,
        seed: derive_seed(config.master_seed, STREAM_PLAN),
    }
}

/// Mean out-of-fold prediction per row (repeats average across passes).
fn out_of_fold(n: usize, fold_predictions: &[Vec<(usize, f64)>]) -> Result<Vec<f64>> {
    let mut sums = vec![0.0f64; n];
    let mut counts = vec![0usize; n];
    for fold in fold_predictions {
        for &(row, pred) in fold {
            sums[row] += pred;
            counts[row] += 1;
        }
    }
    if counts.iter().any(|&c| c == 0) {
        bail!("a row received no out-of-fold prediction");
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect())
}

/// Log-spaced lambda grid for one training fold.
fn lambda_grid(train: &Dataset, grid: &crate::config::LassoGridConfig) -> Result<Vec<f64>> {
    let lmax = lambda_max(train, grid.lasso.standardize_inputs)?;
    if lmax <= 0.0 {
        return Ok(vec![0.0]);
    }
    let lo = (lmax * grid.min_factor).ln();
    let hi = (lmax * grid.max_factor).ln();
    Ok((0..grid.n_points)
        .map(|i| {
            let t = if grid.n_points == 1 {
                1.0
            } else {
                i as f64 / (grid.n_points - 1) as f64
            };
            (lo + t * (hi - lo)).exp()
        })
        .collect())
}

/// Pick lambda for one outer-fold training set by inner K-fold CV: the grid
/// value with the highest mean inner NSE, earliest (smallest) on ties.
fn select_lambda(
    train: &Dataset,
    grid_cfg: &crate::config::LassoGridConfig,
    seed: u64,
) -> Result<f64> {
    let grid = lambda_grid(train, grid_cfg)?;
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let k = grid_cfg.inner_folds.min(train.n_rows()).max(2);
    let plan = CvPlan {
        scheme: CvScheme::KFold { k },
        seed: derive_seed(seed, STREAM_INNER),
    };
    let mut best: Option<(f64, f64)> = None;
    for &lambda in &grid {
        let spec = LearnerSpec::Lasso(LassoConfig {
            lambda,
            ..grid_cfg.lasso.clone()
        });
        let (result, _) = cross_validate_with(
            |inner_train, inner_seed| fit_learner(&spec, inner_train, inner_seed),
            train,
            &plan,
        )?;
        let Some(summary) = result.summary.nse.as_ref() else {
            continue;
        };
        if best.map_or(true, |(score, _)| summary.mean > score) {
            best = Some((summary.mean, lambda));
        }
    }
    Ok(best.map(|(_, lambda)| lambda).unwrap_or(grid[0]))
}

/// Compare the four regressors plus the mean baseline under shared CV folds.
///
/// Writes `compare.json` and, per model, out-of-fold `residuals_<m>.csv`
/// and `pred_vs_obs_<m>.csv`.
pub fn run_compare(config: &CompareConfig) -> Result<Vec<PathBuf>> {
    let (data, _) = load_source(&config.source, config.master_seed)?;
    let plan = compare_plan(config);
    let n = data.n_rows();
    let p = data.n_features();

    let mut models = Vec::new();
    let mut artifacts = Vec::new();

    let evaluate = |name: &str,
                    fit: &(dyn Fn(&Dataset, u64) -> fuelcast::Result<Box<dyn Regressor>>
                          + Sync)|
     -> Result<(ModelComparison, [Artifact; 2])> {
        let (cv, fold_preds) = cross_validate_with(fit, &data, &plan)?;
        let oof = out_of_fold(n, &fold_preds)?;
        let residual_rows = (0..n).map(|i| {
            let obs = data.target()[i];
            let pred = oof[i];
            format!(
                "{},{},{}",
                fmt_f64(obs),
                fmt_f64(pred),
                fmt_f64(obs - pred)
            )
        });
        let residuals = Artifact::csv(
            &format!("residuals_{name}.csv"),
            "observed,predicted,residual",
            residual_rows,
        );
        let pred_rows =
            (0..n).map(|i| format!("{},{}", fmt_f64(data.target()[i]), fmt_f64(oof[i])));
        let pred_vs_obs = Artifact::csv(
            &format!("pred_vs_obs_{name}.csv"),
            "observed,predicted",
            pred_rows,
        );
        let comparison = ModelComparison {
            name: name.to_string(),
            cv,
            lasso_lambdas: None,
        };
        Ok((comparison, [residuals, pred_vs_obs]))
    };
    let record = |result: (ModelComparison, [Artifact; 2]),
                      models: &mut Vec<ModelComparison>,
                      artifacts: &mut Vec<Artifact>| {
        models.push(result.0);
        artifacts.extend(result.1);
    };

    let gbm_spec = LearnerSpec::Gbm(config.gbm.clone());
    record(
        evaluate("gbm", &|train, seed| fit_learner(&gbm_spec, train, seed))?,
        &mut models,
        &mut artifacts,
    );

    let forest_cfg = ForestConfig {
        m_try: config
            .forest
            .m_try
            .or(Some(((p as f64 / 3.0).round() as usize).max(1))),
        ..config.forest.clone()
    };
    let forest_spec = LearnerSpec::Forest(forest_cfg);
    record(
        evaluate("forest", &|train, seed| {
            fit_learner(&forest_spec, train, seed)
        })?,
        &mut models,
        &mut artifacts,
    );

    let mlp_spec = LearnerSpec::Mlp(config.mlp.clone());
    record(
        evaluate("mlp", &|train, seed| fit_learner(&mlp_spec, train, seed))?,
        &mut models,
        &mut artifacts,
    );

    // Lasso: lambda re-selected on every outer-fold training set by inner
    // CV, so nothing from the test fold can influence the choice. Chosen
    // lambdas are keyed by the fold seed and read back in fold order.
    let grid_cfg = config.lasso_grid.clone();
    let chosen: Mutex<BTreeMap<u64, f64>> = Mutex::new(BTreeMap::new());
    let mut lasso_result = evaluate("lasso", &|train, seed| {
        let lambda = select_lambda(train, &grid_cfg, seed)
            .map_err(|e| fuelcast::Error::InvalidData(e.to_string()))?;
        chosen.lock().unwrap().insert(seed, lambda);
        let model = fit_lasso(
            train,
            &LassoConfig {
                lambda,
                ..grid_cfg.lasso.clone()
            },
        )?;
        Ok(Box::new(model) as Box<dyn Regressor>)
    })?;
    let n_folds = config.folds * config.repeats.max(1);
    let lambdas_by_fold: Vec<f64> = (0..n_folds)
        .map(|i| {
            let seed = derive_seed(plan.seed, i as u64);
            *chosen
                .lock()
                .unwrap()
                .get(&seed)
                .expect("every fold selected a lambda")
        })
        .collect();
    lasso_result.0.lasso_lambdas = Some(lambdas_by_fold);
    record(lasso_result, &mut models, &mut artifacts);

    record(
        evaluate("mean_baseline", &|train, seed| {
            fit_learner(&LearnerSpec::MeanBaseline, train, seed)
        })?,
        &mut models,
        &mut artifacts,
    );

    let mut ranking: Vec<(String, Option<f64>)> = models
        .iter()
        .map(|m| (m.name.clone(), m.cv.summary.nse.as_ref().map(|s| s.mean)))
        .collect();
    ranking.sort_by(|a, b| match (a.1, b.1) {
        (Some(x), Some(y)) => y.partial_cmp(&x).unwrap().then_with(|| a.0.cmp(&b.0)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.0.cmp(&b.0),
    });

    let report = CompareReport {
        command: "compare",
        master_seed: config.master_seed,
        config,
        dataset: DatasetSummary {
            n_rows: n,
            n_features: p,
            feature_names: data.feature_names().to_vec(),
            target_name: data.target_name().to_string(),
            fingerprint: dataset_fingerprint(&data),
        },
        models,
        ranking: ranking.into_iter().map(|(name, _)| name).collect(),
    };
    let mut all = vec![
        Artifact::json("compare.json", &report)?,
        run_config_artifact("compare", config.master_seed, config)?,
    ];
    all.append(&mut artifacts);
    commit(&config.out, all)
}

/// Learning curves per model, one `curve_<m>.csv` each.
pub fn run_curve(config: &CurveConfig) -> Result<Vec<PathBuf>> {
    let (data, _) = load_source(&config.source, config.master_seed)?;
    let plan = CvPlan {
        scheme: CvScheme::KFold { k: config.folds },
        seed: derive_seed(config.master_seed, STREAM_PLAN),
    };
    let n = data.n_rows();
    // Largest training size every fold can supply.
    let max_test = n / config.folds + usize::from(n % config.folds != 0);
    let max_train = n - max_test;
    let sizes: Vec<usize> = if config.sizes.is_empty() {
        let mut grid: Vec<usize> = (1..=10)
            .map(|i| (max_train as f64 * i as f64 / 10.0).floor() as usize)
            .filter(|&s| s >= 2)
            .collect();
        grid.dedup();
        grid
    } else {
        config.sizes.clone()
    };
    if sizes.is_empty() {
        bail!("no usable learning-curve sizes for {n} rows and {} folds", config.folds);
    }
    let models = if config.models.is_empty() {
        ModelKind::ALL.to_vec()
    } else {
        config.models.clone()
    };

    let mut artifacts = vec![run_config_artifact("curve", config.master_seed, config)?];
    for kind in models {
        let spec = match kind {
            ModelKind::Gbm => LearnerSpec::Gbm(config.gbm.clone()),
            ModelKind::Forest => LearnerSpec::Forest(ForestConfig {
                m_try: config.forest.m_try.or(Some(
                    ((data.n_features() as f64 / 3.0).round() as usize).max(1),
                )),
                ..config.forest.clone()
            }),
            // The batch cannot exceed the smallest subsample fitted.
            ModelKind::Mlp => LearnerSpec::Mlp(MlpConfig {
                batch_size: config
                    .mlp
                    .batch_size
                    .min(sizes.iter().copied().min().unwrap()),
                ..config.mlp.clone()
            }),
            ModelKind::Lasso => LearnerSpec::Lasso(config.lasso.clone()),
        };
        let points = learning_curve(&spec, &data, &sizes, &plan)?;
        let rows = points.iter().map(|pt| {
            format!(
                "{},{},{}",
                pt.size,
                fmt_f64(pt.train_nse),
                fmt_f64(pt.cv_nse)
            )
        });
        artifacts.push(Artifact::csv(
            &format!("curve_{}.csv", kind.name()),
            "size,train_nse,cv_nse",
            rows,
        ));
    }
    commit(&config.out, artifacts)
}

/// Persisted model envelope.
#[derive(Serialize, Deserialize)]
pub struct ModelFile {
    pub master_seed: u64,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub model: ModelPayload,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelPayload {
    Gbm(GbmModel),
    Forest(ForestModel),
    Lasso(LassoModel),
    Mlp(MlpModel),
}

impl ModelPayload {
    pub fn predict(&self, row: &[f64]) -> fuelcast::Result<f64> {
        match self {
            ModelPayload::Gbm(m) => m.predict(row),
            ModelPayload::Forest(m) => m.predict(row),
            ModelPayload::Lasso(m) => m.predict(row),
            ModelPayload::Mlp(m) => m.forward(row),
        }
    }
}

/// Fit one model on the full dataset and persist it as `model_<name>.json`.
pub fn run_train(config: &TrainConfig) -> Result<Vec<PathBuf>> {
    let (data, _) = load_source(&config.source, config.master_seed)?;
    let seed = derive_seed(config.master_seed, STREAM_MODEL);
    let payload = match config.model {
        ModelKind::Gbm => ModelPayload::Gbm(fit_gbm(
            &data,
            &fuelcast::ensemble::GbmConfig {
                seed,
                ..config.gbm.clone()
            },
        )?),
        ModelKind::Forest => ModelPayload::Forest(fit_forest(
            &data,
            &ForestConfig {
                seed,
                m_try: config.forest.m_try.or(Some(
                    ((data.n_features() as f64 / 3.0).round() as usize).max(1),
                )),
                ..config.forest.clone()
            },
        )?),
        ModelKind::Lasso => ModelPayload::Lasso(fit_lasso(&data, &config.lasso)?),
        ModelKind::Mlp => {
            let (model, _) = fit_mlp(
                &data,
                &MlpConfig {
                    seed,
                    ..config.mlp.clone()
                },
            )?;
            ModelPayload::Mlp(model)
        }
    };
    let file = ModelFile {
        master_seed: config.master_seed,
        feature_names: data.feature_names().to_vec(),
        target_name: data.target_name().to_string(),
        model: payload,
    };
    let artifacts = vec![
        Artifact::json(&format!("model_{}.json", config.model.name()), &file)?,
        run_config_artifact("train", config.master_seed, config)?,
    ];
    commit(&config.out, artifacts)
}

/// Score a feature CSV with a persisted model; writes `predictions.csv`.
///
/// Every training feature must be present by exact name (order is free,
/// extra columns are ignored).
pub fn run_predict(config: &PredictConfig) -> Result<Vec<PathBuf>> {
    let raw = std::fs::read_to_string(&config.model_file)
        .with_context(|| format!("reading model file {}", config.model_file.display()))?;
    let file: ModelFile = serde_json::from_str(&raw).context("parsing model file")?;
    let rows = read_feature_rows(&config.input, &file.feature_names)?;
    let mut lines = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let pred = file
            .model
            .predict(row)
            .map_err(|e| anyhow!("row {}: {e}", i + 2))?;
        lines.push(fmt_f64(pred));
    }
    let artifacts = vec![
        Artifact::csv("predictions.csv", "prediction", lines.into_iter()),
        run_config_artifact("predict", config.master_seed, config)?,
    ];
    commit(&config.out, artifacts)
}
