//! Desk-scale end-to-end runs on the synthetic fuel data: ensemble variance
//! reduction, Extra-Trees ranking behavior, and 10-fold model scores.

use fuelcast::data::{split_holdout, synth_fuel, SynthConfig};
use fuelcast::ensemble::{fit_forest, ForestConfig};
use fuelcast::eval::{cross_validate, CvPlan, CvScheme, LearnerSpec};
use fuelcast::linear::LassoConfig;
use fuelcast::tree::{feature_importance, fit_extra_trees, fit_tree, TreeConfig};

fn held_out_mse(preds: &[f64], obs: &[f64]) -> f64 {
    preds
        .iter()
        .zip(obs)
        .map(|(p, o)| (p - o) * (p - o))
        .sum::<f64>()
        / obs.len() as f64
}

#[test]
fn bagging_beats_a_single_tree_held_out() {
    let data = synth_fuel(&SynthConfig {
        n_rows: 2000,
        n_noise_features: 5,
        noise_sigma: 0.05,
        seed: 42,
    })
    .unwrap();
    let (train, test) = split_holdout(&data, 0.25, 42).unwrap();

    let tree = fit_tree(&train, &TreeConfig::default()).unwrap();
    let tree_preds: Vec<f64> = (0..test.n_rows())
        .map(|i| tree.predict(test.row(i)).unwrap())
        .collect();
    let tree_mse = held_out_mse(&tree_preds, test.target());

    let forest = fit_forest(
        &train,
        &ForestConfig {
            n_trees: 50,
            ..ForestConfig::recommended(train.n_features(), 42)
        },
    )
    .unwrap();
    let forest_preds: Vec<f64> = (0..test.n_rows())
        .map(|i| forest.predict(test.row(i)).unwrap())
        .collect();
    let forest_mse = held_out_mse(&forest_preds, test.target());

    assert!(
        forest_mse <= tree_mse,
        "forest MSE {forest_mse} vs single tree {tree_mse}"
    );
}

#[test]
fn extra_trees_rank_signal_above_noise() {
    let data = synth_fuel(&SynthConfig {
        n_rows: 1500,
        n_noise_features: 5,
        noise_sigma: 0.05,
        seed: 42,
    })
    .unwrap();
    let cfg = TreeConfig::extra_trees(data.n_features(), 7);
    let trees = fit_extra_trees(&data, 60, &cfg).unwrap();
    let importance = feature_importance(&trees, data.n_features()).unwrap();
    let names = data.feature_names();
    let score_of = |name: &str| {
        let idx = names.iter().position(|n| n == name).unwrap();
        importance.scores[idx]
    };
    let worst_noise = (0..5)
        .map(|j| score_of(&format!("noise_{j}")))
        .fold(0.0f64, f64::max);
    assert!(score_of("running_time_h") > worst_noise);
    assert!(score_of("rate_l_per_h") > worst_noise);
}

#[test]
fn tenfold_scores_order_gbm_above_lasso() {
    // Smaller desk-scale smoke run; the acceptance suite runs the full-size
    // comparison.
    let data = synth_fuel(&SynthConfig {
        n_rows: 1200,
        n_noise_features: 5,
        noise_sigma: 0.05,
        seed: 42,
    })
    .unwrap();
    let plan = CvPlan {
        scheme: CvScheme::KFold { k: 10 },
        seed: 42,
    };
    let gbm = cross_validate(&LearnerSpec::Gbm(Default::default()), &data, &plan).unwrap();
    let lasso = cross_validate(
        &LearnerSpec::Lasso(LassoConfig {
            lambda: 0.01,
            ..Default::default()
        }),
        &data,
        &plan,
    )
    .unwrap();
    let gbm_nse = gbm.summary.nse.as_ref().unwrap().mean;
    let lasso_nse = lasso.summary.nse.as_ref().unwrap().mean;
    assert!(gbm_nse >= 0.9, "gbm mean NSE {gbm_nse}");
    assert!(gbm_nse > lasso_nse, "gbm {gbm_nse} vs lasso {lasso_nse}");
}

#[test]
fn cross_validation_is_reproducible() {
    let data = synth_fuel(&SynthConfig {
        n_rows: 300,
        n_noise_features: 2,
        noise_sigma: 0.05,
        seed: 8,
    })
    .unwrap();
    let plan = CvPlan {
        scheme: CvScheme::KFold { k: 5 },
        seed: 3,
    };
    let spec = LearnerSpec::Forest(ForestConfig {
        n_trees: 10,
        ..ForestConfig::recommended(data.n_features(), 0)
    });
    let a = cross_validate(&spec, &data, &plan).unwrap();
    let b = cross_validate(&spec, &data, &plan).unwrap();
    assert_eq!(a, b);
}
