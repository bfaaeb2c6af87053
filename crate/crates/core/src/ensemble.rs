//! Tree ensembles: bagged random forests and squared-error gradient boosting.
//!
//! A forest averages exact-split trees fit to bootstrap resamples, with a
//! random subset of features considered at every node. Boosting builds an
//! additive model forward stage-wise: each stage fits a shallow exact-split
//! tree to the current residuals and adds it scaled by the learning rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tree::{fit_tree_with_targets, SplitMode, TreeConfig, TreeModel};

use rand::Rng;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// Features considered per node; `None` means all.
    pub m_try: Option<usize>,
    /// Base tree settings; exact splits required.
    pub tree: TreeConfig,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            bootstrap: true,
            m_try: None,
            tree: TreeConfig::default(),
            seed: 0,
        }
    }
}

impl ForestConfig {
    /// Standard regression-forest settings for `p` features:
    /// 100 trees, bootstrap on, m_try = max(1, round(p/3)).
    pub fn recommended(p: usize, seed: u64) -> Self {
        ForestConfig {
            m_try: Some(((p as f64 / 3.0).round() as usize).max(1)),
            seed,
            ..ForestConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ForestTag {
    Forest,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ForestModel {
    #[serde(rename = "type")]
    tag: ForestTag,
    config: ForestConfig,
    trees: Vec<TreeModel>,
    /// Rows each tree trained on; `None` when bootstrap was off.
    bootstrap_indices: Vec<Option<Vec<usize>>>,
}

impl ForestModel {
    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }

    pub fn bootstrap_indices(&self) -> &[Option<Vec<usize>>] {
        &self.bootstrap_indices
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    /// Unweighted mean of the member trees' predictions.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for tree in &self.trees {
            sum += tree.predict(row)?;
        }
        Ok(sum / self.trees.len() as f64)
    }
}

/// Fit a bagged random forest.
///
/// Tree `i` draws its bootstrap rows from the stream (seed, 2i) and its
/// per-node feature candidates from (seed, 2i+1), so members are independent
/// of scheduling and the whole fit is reproducible.
pub fn fit_forest(data: &Dataset, config: &ForestConfig) -> Result<ForestModel> {
    if config.n_trees < 1 {
        return Err(Error::InvalidConfig("forest needs n_trees >= 1".into()));
    }
    if config.tree.split_mode != SplitMode::Exact {
        return Err(Error::InvalidConfig("forest trees use exact splits".into()));
    }
    if let Some(m) = config.m_try {
        if m < 1 || m > data.n_features() {
            return Err(Error::InvalidConfig(format!(
                "m_try {m} out of range 1..={}",
                data.n_features()
            )));
        }
    }
    let n = data.n_rows();
    let fitted: Vec<(TreeModel, Option<Vec<usize>>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let tree_cfg = TreeConfig {
                n_candidate_features: config.m_try,
                seed: derive_seed(config.seed, 2 * i as u64 + 1),
                ..config.tree.clone()
            };
            if config.bootstrap {
                let mut rng = rng_from_seed(derive_seed(config.seed, 2 * i as u64));
                let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let sample = data.subset(&indices)?;
                let tree = crate::tree::fit_tree(&sample, &tree_cfg)?;
                Ok((tree, Some(indices)))
            } else {
                let tree = crate::tree::fit_tree(data, &tree_cfg)?;
                Ok((tree, None))
            }
        })
        .collect::<Result<_>>()?;
    let (trees, bootstrap_indices) = fitted.into_iter().unzip();
    Ok(ForestModel {
        config: config.clone(),
        trees,
        bootstrap_indices,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GbmConfig {
    /// Number of boosting stages M.
    pub n_stages: usize,
    /// Shrinkage applied to every stage, in (0, 1].
    pub learning_rate: f64,
    /// Base tree settings; exact splits, shallow by default.
    pub tree: TreeConfig,
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            n_stages: 100,
            learning_rate: 0.1,
            tree: TreeConfig {
                max_depth: Some(3),
                ..TreeConfig::default()
            },
            seed: 0,
        }
    }
}

/// One boosting stage: a residual tree and the shrinkage it entered with.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GbmStage {
    pub tree: TreeModel,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GbmModel {
    config: GbmConfig,
    /// F0, the training target mean.
    init_value: f64,
    stages: Vec<GbmStage>,
}

impl GbmModel {
    pub fn init_value(&self) -> f64 {
        self.init_value
    }

    pub fn stages(&self) -> &[GbmStage] {
        &self.stages
    }

    pub fn config(&self) -> &GbmConfig {
        &self.config
    }

    /// F0 + sum of learning_rate * stage tree predictions.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        let mut value = self.init_value;
        for stage in &self.stages {
            value += stage.learning_rate * stage.tree.predict(row)?;
        }
        Ok(value)
    }
}

/// Fit a gradient-boosting model under squared-error loss.
///
/// F0 = mean(y); stage m fits an exact-split tree to the residuals
/// y - F_{m-1}(X) and F_m adds it scaled by the learning rate. Stages are
/// sequential by definition.
pub fn fit_gbm(data: &Dataset, config: &GbmConfig) -> Result<GbmModel> {
    if !(config.learning_rate > 0.0 && config.learning_rate <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "learning_rate must be in (0,1], got {}",
            config.learning_rate
        )));
    }
    if config.tree.split_mode != SplitMode::Exact {
        return Err(Error::InvalidConfig(
            "boosting trees use exact splits".into(),
        ));
    }
    let y = data.target();
    let init_value = y.iter().sum::<f64>() / y.len() as f64;
    let mut current: Vec<f64> = vec![init_value; data.n_rows()];
    let mut stages = Vec::with_capacity(config.n_stages);
    for m in 0..config.n_stages {
        let residuals: Vec<f64> = y.iter().zip(&current).map(|(t, f)| t - f).collect();
        let tree_cfg = TreeConfig {
            seed: derive_seed(config.seed, m as u64),
            ..config.tree.clone()
        };
        let tree = fit_tree_with_targets(data, &residuals, &tree_cfg)?;
        for (i, f) in current.iter_mut().enumerate() {
            *f += config.learning_rate * tree.predict(data.row(i))?;
        }
        stages.push(GbmStage {
            tree,
            learning_rate: config.learning_rate,
        });
    }
    Ok(GbmModel {
        config: config.clone(),
        init_value,
        stages,
    })
}

/// Training MSE of F_0, F_1, ..., F_M on `data`, length M+1.
pub fn staged_train_mse(model: &GbmModel, data: &Dataset) -> Result<Vec<f64>> {
    let y = data.target();
    let n = data.n_rows() as f64;
    let mut current = vec![model.init_value; data.n_rows()];
    let mse = |preds: &[f64]| {
        preds
            .iter()
            .zip(y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n
    };
    let mut out = Vec::with_capacity(model.stages.len() + 1);
    out.push(mse(&current));
    for stage in &model.stages {
        for (i, f) in current.iter_mut().enumerate() {
            *f += stage.learning_rate * stage.tree.predict(data.row(i))?;
        }
        out.push(mse(&current));
    }
    Ok(out)
}
