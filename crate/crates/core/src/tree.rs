//! CART-style regression trees and the Extremely Randomized Trees variant.
//!
//! Trees grow greedily, top down. At each node a set of candidate features is
//! drawn without replacement from the node's seeded stream; in exact mode
//! every midpoint between consecutive distinct sorted values is scored, in
//! random-threshold mode a single threshold is drawn uniformly between the
//! feature's min and max at the node. The split maximizing variance reduction
//! wins, with ties broken by lowest feature index, then lowest threshold.
//! Rows with a feature value <= the threshold route left.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Scan midpoints between consecutive distinct sorted values.
    Exact,
    /// Draw one threshold uniformly in (min, max) per candidate feature.
    RandomThreshold,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TreeConfig {
    /// `None` grows until the other stopping rules fire.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub split_mode: SplitMode,
    /// Features examined per node; `None` means all.
    pub n_candidate_features: Option<usize>,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            split_mode: SplitMode::Exact,
            n_candidate_features: None,
            seed: 0,
        }
    }
}

impl TreeConfig {
    /// Extra-Trees defaults: random thresholds, round(sqrt(p)) candidate
    /// features per node, min_samples_leaf 2.
    pub fn extra_trees(p: usize, seed: u64) -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_leaf: 2,
            min_samples_split: 2,
            split_mode: SplitMode::RandomThreshold,
            n_candidate_features: Some(((p as f64).sqrt().round() as usize).max(1)),
            seed,
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidConfig("min_samples_leaf must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig(
                "min_samples_split must be >= 2".into(),
            ));
        }
        if let Some(k) = self.n_candidate_features {
            if k < 1 || k > p {
                return Err(Error::InvalidConfig(format!(
                    "n_candidate_features {k} out of range 1..={p}"
                )));
            }
        }
        Ok(())
    }
}

/// Recursive tree node. Serializes untagged: internal nodes carry
/// {feature, threshold, ...}, leaves carry {value, ...}.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        n_samples: usize,
        impurity_decrease: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

impl Node {
    fn n_samples(&self) -> usize {
        match self {
            Node::Internal { n_samples, .. } | Node::Leaf { n_samples, .. } => *n_samples,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TreeModel {
    n_features: usize,
    root: Node,
}

impl TreeModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn n_root_samples(&self) -> usize {
        self.root.n_samples()
    }

    /// Route a row to its leaf: values <= threshold go left.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::RowLength {
                expected: self.n_features,
                got: row.len(),
            });
        }
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { value, .. } => return Ok(*value),
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Visit every internal node as (feature, n_samples, impurity_decrease).
    pub fn for_each_split(&self, mut f: impl FnMut(usize, usize, f64)) {
        fn walk(node: &Node, f: &mut impl FnMut(usize, usize, f64)) {
            if let Node::Internal {
                feature,
                n_samples,
                impurity_decrease,
                left,
                right,
                ..
            } = node
            {
                f(*feature, *n_samples, *impurity_decrease);
                walk(left, f);
                walk(right, f);
            }
        }
        walk(&self.root, &mut f);
    }
}

/// Per-feature importance scores; nonnegative and summing to 1 when any
/// split exists.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FeatureImportance {
    pub scores: Vec<f64>,
}

struct Grower<'a> {
    data: &'a Dataset,
    targets: &'a [f64],
    cfg: &'a TreeConfig,
    rng: ChaCha8Rng,
}

struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

/// Scores within this relative band count as ties, so mathematically equal
/// splits are resolved by the (feature, threshold) iteration order instead of
/// by summation rounding noise.
const SCORE_TIE_REL: f64 = 1e-12;

fn beats(score: f64, best: &Option<Candidate>) -> bool {
    score > 0.0
        && best
            .as_ref()
            .map_or(true, |b| score > b.score * (1.0 + SCORE_TIE_REL))
}

impl Grower<'_> {
    /// Candidate feature indices for one node, ascending.
    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.data.n_features();
        match self.cfg.n_candidate_features {
            None => (0..p).collect(),
            Some(k) if k >= p => (0..p).collect(),
            Some(k) => {
                let mut picked = rand::seq::index::sample(&mut self.rng, p, k).into_vec();
                picked.sort_unstable();
                picked
            }
        }
    }

    /// Best split for the rows in `idx`, if any reduces impurity.
    ///
    /// Scores use the identity var(parent) - weighted child variance
    /// = (s_l^2/n_l + s_r^2/n_r)/n on mean-shifted targets, which cannot go
    /// negative in floating point.
    fn best_split(&mut self, idx: &[usize], mean: f64) -> Option<Candidate> {
        let n = idx.len();
        let msl = self.cfg.min_samples_leaf;
        let mut best: Option<Candidate> = None;
        for f in self.candidate_features() {
            match self.cfg.split_mode {
                SplitMode::Exact => {
                    let mut pairs: Vec<(f64, f64)> = idx
                        .iter()
                        .map(|&i| (self.data.value(i, f), self.targets[i] - mean))
                        .collect();
                    pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                    let total: f64 = pairs.iter().map(|p| p.1).sum();
                    let mut left_sum = 0.0;
                    for i in 0..n - 1 {
                        left_sum += pairs[i].1;
                        if pairs[i].0 >= pairs[i + 1].0 {
                            continue;
                        }
                        let n_left = i + 1;
                        let n_right = n - n_left;
                        if n_left < msl || n_right < msl {
                            continue;
                        }
                        let right_sum = total - left_sum;
                        let score = left_sum * left_sum / n_left as f64
                            + right_sum * right_sum / n_right as f64;
                        let threshold = 0.5 * (pairs[i].0 + pairs[i + 1].0);
                        if beats(score, &best) {
                            best = Some(Candidate {
                                score,
                                feature: f,
                                threshold,
                            });
                        }
                    }
                }
                SplitMode::RandomThreshold => {
                    let mut min = f64::INFINITY;
                    let mut max = f64::NEG_INFINITY;
                    for &i in idx {
                        let v = self.data.value(i, f);
                        min = min.min(v);
                        max = max.max(v);
                    }
                    if !(max > min) {
                        continue;
                    }
                    let threshold = self.rng.gen_range(min..max);
                    let mut n_left = 0usize;
                    let mut left_sum = 0.0;
                    let mut total = 0.0;
                    for &i in idx {
                        let t = self.targets[i] - mean;
                        total += t;
                        if self.data.value(i, f) <= threshold {
                            n_left += 1;
                            left_sum += t;
                        }
                    }
                    let n_right = n - n_left;
                    if n_left < msl || n_right < msl {
                        continue;
                    }
                    let right_sum = total - left_sum;
                    let score = left_sum * left_sum / n_left as f64
                        + right_sum * right_sum / n_right as f64;
                    if beats(score, &best) {
                        best = Some(Candidate {
                            score,
                            feature: f,
                            threshold,
                        });
                    }
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> Node {
        let n = idx.len();
        let mean = idx.iter().map(|&i| self.targets[i]).sum::<f64>() / n as f64;
        let variance = idx
            .iter()
            .map(|&i| {
                let d = self.targets[i] - mean;
                d * d
            })
            .sum::<f64>()
            / n as f64;

        let depth_reached = self.cfg.max_depth.map_or(false, |d| depth >= d);
        if depth_reached || n < self.cfg.min_samples_split || variance <= 0.0 {
            return Node::Leaf {
                value: mean,
                n_samples: n,
            };
        }
        let Some(split) = self.best_split(&idx, mean) else {
            return Node::Leaf {
                value: mean,
                n_samples: n,
            };
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.data.value(i, split.feature) <= split.threshold);
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        Node::Internal {
            feature: split.feature,
            threshold: split.threshold,
            n_samples: n,
            impurity_decrease: split.score / n as f64,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

pub(crate) fn fit_tree_with_targets(
    data: &Dataset,
    targets: &[f64],
    cfg: &TreeConfig,
) -> Result<TreeModel> {
    cfg.validate(data.n_features())?;
    if targets.len() != data.n_rows() {
        return Err(Error::InvalidData(format!(
            "target length {} does not match {} rows",
            targets.len(),
            data.n_rows()
        )));
    }
    let n = data.n_rows();
    let mut grower = Grower {
        data,
        targets,
        cfg,
        rng: rng_from_seed(cfg.seed),
    };
    let root = grower.grow((0..n).collect(), 0);
    Ok(TreeModel {
        n_features: data.n_features(),
        root,
    })
}

/// Fit a single regression tree on the dataset's target.
pub fn fit_tree(data: &Dataset, cfg: &TreeConfig) -> Result<TreeModel> {
    fit_tree_with_targets(data, data.target(), cfg)
}

/// Fit an Extremely Randomized Trees ensemble.
///
/// Every tree trains on the full sample (no bootstrap); tree `i` uses the
/// stream derived from (config.seed, i), so ensembles are reproducible and
/// members can be fit concurrently.
pub fn fit_extra_trees(
    data: &Dataset,
    n_trees: usize,
    cfg: &TreeConfig,
) -> Result<Vec<TreeModel>> {
    if n_trees < 1 {
        return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
    }
    if cfg.split_mode != SplitMode::RandomThreshold {
        return Err(Error::InvalidConfig(
            "extra trees require split_mode = random_threshold".into(),
        ));
    }
    (0..n_trees)
        .into_par_iter()
        .map(|i| {
            let tree_cfg = TreeConfig {
                seed: derive_seed(cfg.seed, i as u64),
                ..cfg.clone()
            };
            fit_tree(data, &tree_cfg)
        })
        .collect()
}

/// Mean-decrease-in-impurity importance over an ensemble.
///
/// Each internal node contributes (n_node / n_root) * impurity_decrease to
/// its split feature; per-tree totals are averaged, then normalized to sum 1
/// (all zeros if no tree split at all).
pub fn feature_importance(trees: &[TreeModel], p: usize) -> Result<FeatureImportance> {
    if trees.is_empty() {
        return Err(Error::InvalidData(
            "feature importance needs at least one tree".into(),
        ));
    }
    for t in trees {
        if t.n_features() != p {
            return Err(Error::InvalidData(format!(
                "tree has {} features, expected {p}",
                t.n_features()
            )));
        }
    }
    let mut scores = vec![0.0; p];
    for tree in trees {
        let n_root = tree.n_root_samples() as f64;
        tree.for_each_split(|feature, n_samples, decrease| {
            scores[feature] += n_samples as f64 / n_root * decrease;
        });
    }
    for s in &mut scores {
        *s /= trees.len() as f64;
    }
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        for s in &mut scores {
            *s /= total;
        }
    }
    Ok(FeatureImportance { scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SynthConfig;

    fn one_feature_data(x: &[f64], y: &[f64]) -> Dataset {
        Dataset::new(
            vec!["x".into()],
            x.iter().map(|&v| vec![v]).collect(),
            y.to_vec(),
            "y",
        )
        .unwrap()
    }

    #[test]
    fn constant_target_yields_single_leaf() {
        let data = one_feature_data(&[0.0, 1.0, 2.0, 3.0], &[7.0, 7.0, 7.0, 7.0]);
        let tree = fit_tree(&data, &TreeConfig::default()).unwrap();
        assert!(matches!(tree.root(), Node::Leaf { value, .. } if *value == 7.0));
        assert_eq!(tree.predict(&[99.0]).unwrap(), 7.0);
    }

    #[test]
    fn step_function_splits_at_midpoint() {
        let data = one_feature_data(&[0.0, 1.0, 2.0, 3.0], &[0.0, 0.0, 10.0, 10.0]);
        let tree = fit_tree(&data, &TreeConfig::default()).unwrap();
        match tree.root() {
            Node::Internal {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 1.5);
            }
            Node::Leaf { .. } => panic!("expected a split"),
        }
        for (x, want) in [(0.0, 0.0), (1.0, 0.0), (2.0, 10.0), (3.0, 10.0)] {
            assert_eq!(tree.predict(&[x]).unwrap(), want);
        }
    }

    #[test]
    fn depth_zero_gives_root_mean() {
        let data = one_feature_data(&[0.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 6.0]);
        let cfg = TreeConfig {
            max_depth: Some(0),
            ..TreeConfig::default()
        };
        let tree = fit_tree(&data, &cfg).unwrap();
        assert!(matches!(tree.root(), Node::Leaf { value, .. } if *value == 3.0));
    }

    #[test]
    fn boundary_value_routes_left() {
        let data = one_feature_data(&[0.0, 1.0, 2.0, 3.0], &[0.0, 0.0, 10.0, 10.0]);
        let tree = fit_tree(&data, &TreeConfig::default()).unwrap();
        // Threshold is 1.5; a row exactly at the threshold takes the left value.
        assert_eq!(tree.predict(&[1.5]).unwrap(), 0.0);
        assert_eq!(tree.predict(&[2.0]).unwrap(), 10.0);
    }

    #[test]
    fn predict_rejects_wrong_row_length() {
        let data = one_feature_data(&[0.0, 1.0], &[0.0, 1.0]);
        let tree = fit_tree(&data, &TreeConfig::default()).unwrap();
        assert!(matches!(
            tree.predict(&[1.0, 2.0]),
            Err(Error::RowLength { .. })
        ));
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let data = one_feature_data(&[0.0, 1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 5.0, 10.0, 10.0]);
        let cfg = TreeConfig {
            min_samples_leaf: 2,
            ..TreeConfig::default()
        };
        let tree = fit_tree(&data, &cfg).unwrap();
        fn check(node: &Node, msl: usize) {
            match node {
                Node::Leaf { n_samples, .. } => assert!(*n_samples >= msl),
                Node::Internal { left, right, .. } => {
                    check(left, msl);
                    check(right, msl);
                }
            }
        }
        check(tree.root(), 2);
    }

    #[test]
    fn extra_trees_are_deterministic() {
        let data = crate::data::synth_fuel(&SynthConfig {
            n_rows: 100,
            n_noise_features: 2,
            noise_sigma: 0.05,
            seed: 5,
        })
        .unwrap();
        let cfg = TreeConfig::extra_trees(data.n_features(), 11);
        let a = fit_extra_trees(&data, 5, &cfg).unwrap();
        let b = fit_extra_trees(&data, 5, &cfg).unwrap();
        assert_eq!(a, b);
        // Different members of the ensemble differ from one another.
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn extra_trees_require_random_mode() {
        let data = one_feature_data(&[0.0, 1.0], &[0.0, 1.0]);
        let err = fit_extra_trees(&data, 2, &TreeConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn extra_trees_fit_synth_fuel_closely() {
        let data = crate::data::synth_fuel(&SynthConfig {
            n_rows: 500,
            n_noise_features: 3,
            noise_sigma: 0.05,
            seed: 42,
        })
        .unwrap();
        let cfg = TreeConfig::extra_trees(data.n_features(), 42);
        let trees = fit_extra_trees(&data, 30, &cfg).unwrap();
        let preds: Vec<f64> = (0..data.n_rows())
            .map(|i| {
                trees
                    .iter()
                    .map(|t| t.predict(data.row(i)).unwrap())
                    .sum::<f64>()
                    / trees.len() as f64
            })
            .collect();
        let y = data.target();
        let mean = crate::stats::mean(y);
        let sse: f64 = preds.iter().zip(y).map(|(p, o)| (p - o) * (p - o)).sum();
        let sst: f64 = y.iter().map(|o| (o - mean) * (o - mean)).sum();
        let nse = 1.0 - sse / sst;
        assert!(nse >= 0.9, "training NSE {nse}");
    }

    #[test]
    fn importance_zero_without_splits() {
        let data = one_feature_data(&[0.0, 1.0, 2.0], &[4.0, 4.0, 4.0]);
        let tree = fit_tree(&data, &TreeConfig::default()).unwrap();
        let imp = feature_importance(&[tree], 1).unwrap();
        assert_eq!(imp.scores, vec![0.0]);
    }

    #[test]
    fn importance_favors_informative_feature() {
        let mut rng = rng_from_seed(3);
        let n = 500;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 5.0 * r[0]).collect();
        let data = Dataset::new(vec!["x0".into(), "x1".into()], rows, y, "y").unwrap();
        let cfg = TreeConfig {
            split_mode: SplitMode::RandomThreshold,
            min_samples_leaf: 2,
            seed: 3,
            ..TreeConfig::default()
        };
        let trees = fit_extra_trees(&data, 20, &cfg).unwrap();
        let imp = feature_importance(&trees, 2).unwrap();
        assert!(imp.scores[0] > imp.scores[1], "{:?}", imp.scores);
        assert!((imp.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(imp.scores.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let data = crate::data::synth_fuel(&SynthConfig {
            n_rows: 80,
            n_noise_features: 1,
            noise_sigma: 0.1,
            seed: 13,
        })
        .unwrap();
        let tree = fit_tree(&data, &TreeConfig::default()).unwrap();
        let json = serde_json::to_string(&tree).unwrap();
        let back: TreeModel = serde_json::from_str(&json).unwrap();
        assert_eq!(tree, back);
        for i in 0..data.n_rows() {
            assert_eq!(
                tree.predict(data.row(i)).unwrap(),
                back.predict(data.row(i)).unwrap()
            );
        }
    }
}
