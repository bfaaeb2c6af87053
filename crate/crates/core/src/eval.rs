//! Model evaluation: the NSE/Bias/MAE/RMSE/RSR metric suite, four
//! cross-validation schemes, learning curves, and residual tables.
//!
//! All metrics use population (N) denominators, which keeps the identity
//! rsr^2 + nse = 1 exact up to rounding. Cross-validation fits each fold on
//! its training rows only — every preprocessing step lives inside the
//! learners, so nothing observed on a test fold can influence fitting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::ensemble::{fit_forest, fit_gbm, ForestConfig, ForestModel, GbmConfig, GbmModel};
use crate::error::{Error, Result};
use crate::linear::{fit_lasso, LassoConfig, LassoModel};
use crate::neural::{fit_mlp, MlpConfig, MlpModel};
use crate::rng::{derive_seed, shuffled_indices};
use crate::stats;
use crate::tree::{fit_tree, TreeConfig, TreeModel};

/// Paired observed/estimated vectors (both in target units).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    observed: Vec<f64>,
    estimated: Vec<f64>,
}

impl PredictionSet {
    pub fn new(observed: Vec<f64>, estimated: Vec<f64>) -> Result<Self> {
        if observed.is_empty() || observed.len() != estimated.len() {
            return Err(Error::InvalidData(format!(
                "prediction set needs equal nonempty vectors, got {} and {}",
                observed.len(),
                estimated.len()
            )));
        }
        if observed
            .iter()
            .chain(estimated.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidData(
                "non-finite value in prediction set".into(),
            ));
        }
        Ok(PredictionSet {
            observed,
            estimated,
        })
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn estimated(&self) -> &[f64] {
        &self.estimated
    }

    fn sum_squared_error(&self) -> f64 {
        self.observed
            .iter()
            .zip(&self.estimated)
            .map(|(o, e)| (e - o) * (e - o))
            .sum()
    }

    fn sum_squared_deviation(&self) -> f64 {
        let mean = stats::mean(&self.observed);
        self.observed.iter().map(|o| (o - mean) * (o - mean)).sum()
    }
}

/// Nash-Sutcliffe efficiency:
/// 1 - sum (EST_k - OBS_k)^2 / sum (OBS_k - mean(OBS))^2.
pub fn nse(ps: &PredictionSet) -> Result<f64> {
    let denom = ps.sum_squared_deviation();
    if ps.len() < 2 || denom <= 0.0 {
        return Err(Error::ZeroVariance("observed values".into()));
    }
    Ok(1.0 - ps.sum_squared_error() / denom)
}

/// Mean signed error (1/N) sum (OBS_k - EST_k).
pub fn bias(ps: &PredictionSet) -> f64 {
    ps.observed
        .iter()
        .zip(&ps.estimated)
        .map(|(o, e)| o - e)
        .sum::<f64>()
        / ps.len() as f64
}

/// Mean absolute error (1/N) sum |OBS_k - EST_k|.
pub fn mae(ps: &PredictionSet) -> f64 {
    ps.observed
        .iter()
        .zip(&ps.estimated)
        .map(|(o, e)| (o - e).abs())
        .sum::<f64>()
        / ps.len() as f64
}

/// Root mean square error sqrt((1/N) sum (OBS_k - EST_k)^2).
pub fn rmse(ps: &PredictionSet) -> f64 {
    (ps.sum_squared_error() / ps.len() as f64).sqrt()
}

/// RMSE divided by the population standard deviation of the observations.
pub fn rsr(ps: &PredictionSet) -> Result<f64> {
    let denom = ps.sum_squared_deviation();
    if ps.len() < 2 || denom <= 0.0 {
        return Err(Error::ZeroVariance("observed values".into()));
    }
    Ok((ps.sum_squared_error() / ps.len() as f64).sqrt()
        / (denom / ps.len() as f64).sqrt())
}

/// The full metric bundle; r2 equals nse by construction.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsReport {
    pub nse: f64,
    pub bias: f64,
    pub mae: f64,
    pub rmse: f64,
    pub rsr: f64,
    pub r2: f64,
}

pub fn metrics_report(ps: &PredictionSet) -> Result<MetricsReport> {
    let nse_value = nse(ps)?;
    Ok(MetricsReport {
        nse: nse_value,
        bias: bias(ps),
        mae: mae(ps),
        rmse: rmse(ps),
        rsr: rsr(ps)?,
        r2: nse_value,
    })
}

/// Cross-validation schemes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum CvScheme {
    Holdout { test_fraction: f64 },
    KFold { k: usize },
    Loocv,
    RepeatedKFold { k: usize, repeats: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CvPlan {
    #[serde(flatten)]
    pub scheme: CvScheme,
    pub seed: u64,
}

/// (train indices, test indices) per split.
///
/// K-fold shuffles 0..n once and cuts it into K contiguous chunks whose
/// sizes differ by at most one (remainder rows go to the earliest folds);
/// each chunk serves once as the test set. Leave-one-out is the K = n case.
/// Repeated K-fold reshuffles repeat r with the stream (seed, r). Hold-out
/// delegates to the data module's split semantics.
pub fn make_folds(n: usize, plan: &CvPlan) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    match plan.scheme {
        CvScheme::Holdout { test_fraction } => {
            let (train, test) = crate::data::holdout_indices(n, test_fraction, plan.seed)?;
            Ok(vec![(train, test)])
        }
        CvScheme::KFold { k } => kfold_splits(n, k, plan.seed),
        CvScheme::Loocv => kfold_splits(n, n, plan.seed),
        CvScheme::RepeatedKFold { k, repeats } => {
            if repeats < 1 {
                return Err(Error::InvalidConfig("repeats must be >= 1".into()));
            }
            let mut all = Vec::with_capacity(k * repeats);
            for r in 0..repeats {
                all.extend(kfold_splits(n, k, derive_seed(plan.seed, r as u64))?);
            }
            Ok(all)
        }
    }
}

fn kfold_splits(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidConfig(format!(
            "k = {k} exceeds the {n} available rows"
        )));
    }
    let order = shuffled_indices(n, seed);
    let base = n / k;
    let remainder = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < remainder);
        let end = start + size;
        let test = order[start..end].to_vec();
        let train: Vec<usize> = order[..start]
            .iter()
            .chain(&order[end..])
            .copied()
            .collect();
        folds.push((train, test));
        start = end;
    }
    Ok(folds)
}

/// A named learner plus its configuration, for the CV harness.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum LearnerSpec {
    Gbm(GbmConfig),
    Forest(ForestConfig),
    Lasso(LassoConfig),
    Mlp(MlpConfig),
    Tree(TreeConfig),
    /// Predicts its training-set target mean for every row.
    MeanBaseline,
}

impl LearnerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Gbm(_) => "gbm",
            LearnerSpec::Forest(_) => "forest",
            LearnerSpec::Lasso(_) => "lasso",
            LearnerSpec::Mlp(_) => "mlp",
            LearnerSpec::Tree(_) => "tree",
            LearnerSpec::MeanBaseline => "mean_baseline",
        }
    }
}

/// A fitted model that can score single rows.
pub trait Regressor: Send + Sync {
    fn predict_row(&self, row: &[f64]) -> Result<f64>;
}

impl Regressor for GbmModel {
    fn predict_row(&self, row: &[f64]) -> Result<f64> {
        self.predict(row)
    }
}

impl Regressor for ForestModel {
    fn predict_row(&self, row: &[f64]) -> Result<f64> {
        self.predict(row)
    }
}

impl Regressor for LassoModel {
    fn predict_row(&self, row: &[f64]) -> Result<f64> {
        self.predict(row)
    }
}

impl Regressor for MlpModel {
    fn predict_row(&self, row: &[f64]) -> Result<f64> {
        self.forward(row)
    }
}

impl Regressor for TreeModel {
    fn predict_row(&self, row: &[f64]) -> Result<f64> {
        self.predict(row)
    }
}

/// The mean-baseline model.
pub struct MeanPredictor {
    pub mean: f64,
}

impl Regressor for MeanPredictor {
    fn predict_row(&self, _row: &[f64]) -> Result<f64> {
        Ok(self.mean)
    }
}

/// Fit a learner spec on a training set, with the config seed replaced by
/// `seed` so fold-level determinism comes from the plan.
pub fn fit_learner(spec: &LearnerSpec, train: &Dataset, seed: u64) -> Result<Box<dyn Regressor>> {
    Ok(match spec {
        LearnerSpec::Gbm(cfg) => Box::new(fit_gbm(train, &GbmConfig { seed, ..cfg.clone() })?),
        LearnerSpec::Forest(cfg) => Box::new(fit_forest(
            train,
            &ForestConfig {
                seed,
                ..cfg.clone()
            },
        )?),
        LearnerSpec::Lasso(cfg) => Box::new(fit_lasso(train, cfg)?),
        LearnerSpec::Mlp(cfg) => {
            let (model, _) = fit_mlp(train, &MlpConfig { seed, ..cfg.clone() })?;
            Box::new(model)
        }
        LearnerSpec::Tree(cfg) => Box::new(fit_tree(
            train,
            &TreeConfig {
                seed,
                ..cfg.clone()
            },
        )?),
        LearnerSpec::MeanBaseline => Box::new(MeanPredictor {
            mean: stats::mean(train.target()),
        }),
    })
}

/// One fold's scores. NSE, RSR, and r2 are `None` when the fold's test
/// observations carry no variance (including singleton folds).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CvFold {
    pub nse: Option<f64>,
    pub bias: f64,
    pub mae: f64,
    pub rmse: f64,
    pub rsr: Option<f64>,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation across folds.
    pub std: f64,
}

fn summarize(values: &[f64]) -> Option<MetricSummary> {
    if values.is_empty() {
        return None;
    }
    Some(MetricSummary {
        mean: stats::mean(values),
        std: stats::population_std(values),
    })
}

/// Per-metric mean and standard deviation across folds. Variance-based
/// metrics are `None` when every fold was undefined.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CvSummary {
    pub nse: Option<MetricSummary>,
    pub bias: MetricSummary,
    pub mae: MetricSummary,
    pub rmse: MetricSummary,
    pub rsr: Option<MetricSummary>,
    pub r2: Option<MetricSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CvResult {
    pub folds: Vec<CvFold>,
    pub summary: CvSummary,
    /// Folds whose nse/rsr were undefined and excluded from those summaries.
    pub undefined_folds: usize,
}

impl CvResult {
    fn from_folds(folds: Vec<CvFold>) -> Self {
        let defined: Vec<&CvFold> = folds.iter().filter(|f| f.nse.is_some()).collect();
        let undefined_folds = folds.len() - defined.len();
        let collect = |sel: fn(&CvFold) -> Option<f64>| -> Vec<f64> {
            defined.iter().filter_map(|f| sel(f)).collect()
        };
        let summary = CvSummary {
            nse: summarize(&collect(|f| f.nse)),
            bias: summarize(&folds.iter().map(|f| f.bias).collect::<Vec<_>>())
                .expect("at least one fold"),
            mae: summarize(&folds.iter().map(|f| f.mae).collect::<Vec<_>>())
                .expect("at least one fold"),
            rmse: summarize(&folds.iter().map(|f| f.rmse).collect::<Vec<_>>())
                .expect("at least one fold"),
            rsr: summarize(&collect(|f| f.rsr)),
            r2: summarize(&collect(|f| f.r2)),
        };
        CvResult {
            folds,
            summary,
            undefined_folds,
        }
    }
}

fn score_fold(ps: &PredictionSet) -> CvFold {
    let defined = ps.len() >= 2 && ps.sum_squared_deviation() > 0.0;
    CvFold {
        nse: defined.then(|| nse(ps).expect("variance checked")),
        bias: bias(ps),
        mae: mae(ps),
        rmse: rmse(ps),
        rsr: defined.then(|| rsr(ps).expect("variance checked")),
        r2: defined.then(|| nse(ps).expect("variance checked")),
    }
}

/// Cross-validate with an arbitrary fitting closure.
///
/// For fold `i` the closure receives the training subset and the seed
/// derived from (plan.seed, i); folds may be evaluated concurrently and the
/// result equals the sequential run. Returns the per-fold scores plus each
/// fold's (row index, prediction) pairs.
#[allow(clippy::type_complexity)]
pub fn cross_validate_with<F>(
    fit: F,
    data: &Dataset,
    plan: &CvPlan,
) -> Result<(CvResult, Vec<Vec<(usize, f64)>>)>
where
    F: Fn(&Dataset, u64) -> Result<Box<dyn Regressor>> + Sync,
{
    let folds = make_folds(data.n_rows(), plan)?;
    let per_fold: Vec<(CvFold, Vec<(usize, f64)>)> = folds
        .par_iter()
        .enumerate()
        .map(|(i, (train_idx, test_idx))| {
            let train = data.subset(train_idx)?;
            let model = fit(&train, derive_seed(plan.seed, i as u64))?;
            let mut observed = Vec::with_capacity(test_idx.len());
            let mut estimated = Vec::with_capacity(test_idx.len());
            let mut pairs = Vec::with_capacity(test_idx.len());
            for &row in test_idx {
                let pred = model.predict_row(data.row(row))?;
                observed.push(data.target()[row]);
                estimated.push(pred);
                pairs.push((row, pred));
            }
            let ps = PredictionSet::new(observed, estimated)?;
            Ok((score_fold(&ps), pairs))
        })
        .collect::<Result<_>>()?;
    let (folds, predictions): (Vec<_>, Vec<_>) = per_fold.into_iter().unzip();
    Ok((CvResult::from_folds(folds), predictions))
}

/// Cross-validate a named learner under a plan.
pub fn cross_validate(spec: &LearnerSpec, data: &Dataset, plan: &CvPlan) -> Result<CvResult> {
    let (result, _) =
        cross_validate_with(|train, seed| fit_learner(spec, train, seed), data, plan)?;
    Ok(result)
}

/// One learning-curve row: mean train and cross-validation NSE at a
/// training-set size.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LearningCurvePoint {
    pub size: usize,
    pub train_nse: f64,
    pub cv_nse: f64,
}

/// Learning curve over increasing training sizes.
///
/// Within each CV split, size s fits on the first s shuffled training rows
/// (seed derived from plan seed, fold, and size index), then scores the
/// subsample itself and the test fold; rows average the defined folds.
pub fn learning_curve(
    spec: &LearnerSpec,
    data: &Dataset,
    sizes: &[usize],
    plan: &CvPlan,
) -> Result<Vec<LearningCurvePoint>> {
    if sizes.is_empty() {
        return Err(Error::InvalidConfig("no learning-curve sizes given".into()));
    }
    let folds = make_folds(data.n_rows(), plan)?;
    let max_train = folds.iter().map(|(t, _)| t.len()).min().unwrap_or(0);
    for &s in sizes {
        if s < 2 || s > max_train {
            return Err(Error::InvalidConfig(format!(
                "learning-curve size {s} outside 2..={max_train}"
            )));
        }
    }
    let cells: Vec<(usize, Option<f64>, Option<f64>)> = folds
        .par_iter()
        .enumerate()
        .flat_map(|(fi, fold)| {
            sizes
                .par_iter()
                .enumerate()
                .map(move |(si, &s)| (fi, fold, si, s))
        })
        .map(|(fi, (train_idx, test_idx), si, s)| {
            let sub_idx = &train_idx[..s];
            let sub = data.subset(sub_idx)?;
            let seed = derive_seed(derive_seed(plan.seed, fi as u64), si as u64);
            let model = fit_learner(spec, &sub, seed)?;
            let score = |rows: &[usize]| -> Result<Option<f64>> {
                let mut observed = Vec::with_capacity(rows.len());
                let mut estimated = Vec::with_capacity(rows.len());
                for &row in rows {
                    observed.push(data.target()[row]);
                    estimated.push(model.predict_row(data.row(row))?);
                }
                let ps = PredictionSet::new(observed, estimated)?;
                Ok(nse(&ps).ok())
            };
            Ok((si, score(sub_idx)?, score(test_idx)?))
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(sizes.len());
    for (si, &size) in sizes.iter().enumerate() {
        let train: Vec<f64> = cells
            .iter()
            .filter(|c| c.0 == si)
            .filter_map(|c| c.1)
            .collect();
        let cv: Vec<f64> = cells
            .iter()
            .filter(|c| c.0 == si)
            .filter_map(|c| c.2)
            .collect();
        if train.is_empty() || cv.is_empty() {
            return Err(Error::ZeroVariance(format!(
                "every fold undefined at learning-curve size {size}"
            )));
        }
        points.push(LearningCurvePoint {
            size,
            train_nse: stats::mean(&train),
            cv_nse: stats::mean(&cv),
        });
    }
    Ok(points)
}

/// One residual-table row.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResidualRow {
    pub observed: f64,
    pub predicted: f64,
    /// observed - predicted.
    pub residual: f64,
}

/// Row-aligned (observed, predicted, residual) table; the residual mean
/// equals bias(ps).
pub fn residual_table(ps: &PredictionSet) -> Vec<ResidualRow> {
    ps.observed()
        .iter()
        .zip(ps.estimated())
        .map(|(&o, &e)| ResidualRow {
            observed: o,
            predicted: e,
            residual: o - e,
        })
        .collect()
}
