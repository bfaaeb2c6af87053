//! One-hidden-layer MLP regressor trained by mini-batch gradient descent
//! with momentum.
//!
//! The hidden layer applies a sigmoid or tanh activation; the output unit is
//! linear. Weights initialize uniformly in +/- sqrt(6/(fan_in + fan_out));
//! every bias initializes to exactly 1.0. Inputs are standardized at fit
//! time (the target too, by default), and training is single-threaded by
//! contract so parameter updates are strictly sequential.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ScalingParams};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation value h = act(a).
    fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Sigmoid => h * (1.0 - h),
            Activation::Tanh => 1.0 - h * h,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MlpConfig {
    pub n_hidden: usize,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Momentum coefficient in [0, 1).
    pub momentum: f64,
    pub seed: u64,
    pub standardize_target: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            n_hidden: 16,
            activation: Activation::Sigmoid,
            epochs: 500,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 0,
            standardize_target: true,
        }
    }
}

impl MlpConfig {
    fn validate(&self) -> Result<()> {
        if self.n_hidden < 1 {
            return Err(Error::InvalidConfig("n_hidden must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must be in [0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MlpModel {
    pub config: MlpConfig,
    /// Hidden weights, n_hidden x p row-major: w1[j*p + i] connects input i
    /// to hidden unit j.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Output weights, length n_hidden.
    pub w2: Vec<f64>,
    pub b2: f64,
    pub n_features: usize,
    pub input_scaling: ScalingParams,
    pub target_mean: f64,
    pub target_scale: f64,
}

/// Gradient of the batch MSE, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Per-epoch training MSE on the standardized-target scale.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainTrace {
    pub epoch_mse: Vec<f64>,
}

/// Initialize a network for `p` inputs.
///
/// W1 and w2 draw uniformly from +/- sqrt(6/(fan_in + fan_out)) on the
/// stream seeded by config.seed (W1 row-major first, then w2); b1 and b2 are
/// exactly 1. Scaling starts as identity and is filled in by `fit_mlp`.
pub fn init_mlp(p: usize, config: &MlpConfig) -> Result<MlpModel> {
    if p < 1 {
        return Err(Error::InvalidData("init_mlp needs p >= 1".into()));
    }
    config.validate()?;
    let h = config.n_hidden;
    let mut rng = rng_from_seed(config.seed);
    let limit1 = (6.0 / (p + h) as f64).sqrt();
    let w1: Vec<f64> = (0..h * p).map(|_| rng.gen_range(-limit1..limit1)).collect();
    let limit2 = (6.0 / (h + 1) as f64).sqrt();
    let w2: Vec<f64> = (0..h).map(|_| rng.gen_range(-limit2..limit2)).collect();
    Ok(MlpModel {
        config: config.clone(),
        w1,
        b1: vec![1.0; h],
        w2,
        b2: 1.0,
        n_features: p,
        input_scaling: ScalingParams::identity(p),
        target_mean: 0.0,
        target_scale: 1.0,
    })
}

impl MlpModel {
    fn hidden(&self, row: &[f64]) -> Vec<f64> {
        let p = self.n_features;
        (0..self.config.n_hidden)
            .map(|j| {
                let a = self.b1[j]
                    + self.w1[j * p..(j + 1) * p]
                        .iter()
                        .zip(row)
                        .map(|(w, x)| w * x)
                        .sum::<f64>();
                self.config.activation.apply(a)
            })
            .collect()
    }

    /// Network output on the standardized scale; `row` is consumed as-is.
    pub fn forward_std(&self, row: &[f64]) -> f64 {
        let h = self.hidden(row);
        self.b2 + self.w2.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>()
    }

    /// De-standardized prediction for a raw input row.
    pub fn forward(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::RowLength {
                expected: self.n_features,
                got: row.len(),
            });
        }
        let scaled = self.input_scaling.transform_row(row);
        Ok(self.forward_std(&scaled) * self.target_scale + self.target_mean)
    }

    /// Mean squared error of the standardized outputs against `targets`;
    /// rows are consumed as-is (the training-space loss that `gradient`
    /// differentiates).
    pub fn batch_mse(&self, rows: &[&[f64]], targets: &[f64]) -> f64 {
        debug_assert_eq!(rows.len(), targets.len());
        rows.iter()
            .zip(targets)
            .map(|(row, t)| {
                let e = self.forward_std(row) - t;
                e * e
            })
            .sum::<f64>()
            / rows.len() as f64
    }
}

/// Exact reverse-mode gradient of `batch_mse` with respect to all parameters.
pub fn gradient(model: &MlpModel, rows: &[&[f64]], targets: &[f64]) -> Result<MlpGradient> {
    if rows.is_empty() || rows.len() != targets.len() {
        return Err(Error::InvalidData(
            "gradient needs a nonempty batch with matching targets".into(),
        ));
    }
    let p = model.n_features;
    let nh = model.config.n_hidden;
    let scale = 2.0 / rows.len() as f64;
    let mut g = MlpGradient {
        w1: vec![0.0; nh * p],
        b1: vec![0.0; nh],
        w2: vec![0.0; nh],
        b2: 0.0,
    };
    for (row, &t) in rows.iter().zip(targets) {
        if row.len() != p {
            return Err(Error::RowLength {
                expected: p,
                got: row.len(),
            });
        }
        let h = model.hidden(row);
        let out = model.b2 + model.w2.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
        let c = scale * (out - t);
        g.b2 += c;
        for j in 0..nh {
            g.w2[j] += c * h[j];
            let d = c * model.w2[j] * model.config.activation.derivative_from_output(h[j]);
            g.b1[j] += d;
            for (slot, x) in g.w1[j * p..(j + 1) * p].iter_mut().zip(*row) {
                *slot += d * x;
            }
        }
    }
    Ok(g)
}

/// Train a network with mini-batch gradient descent and momentum.
///
/// Inputs are standardized, the target too when configured. Each epoch
/// shuffles row order with a stream derived from (seed, 1) and walks
/// consecutive batches; the trace records the full-set training MSE after
/// every epoch. Deterministic given (dataset, config).
pub fn fit_mlp(data: &Dataset, config: &MlpConfig) -> Result<(MlpModel, TrainTrace)> {
    config.validate()?;
    if config.batch_size > data.n_rows() {
        return Err(Error::InvalidConfig(format!(
            "batch_size {} exceeds {} rows",
            config.batch_size,
            data.n_rows()
        )));
    }
    let n = data.n_rows();
    let p = data.n_features();
    let input_scaling = ScalingParams::fit(data);
    let rows_std: Vec<Vec<f64>> = (0..n)
        .map(|i| input_scaling.transform_row(data.row(i)))
        .collect();
    let (target_mean, target_scale) = if config.standardize_target {
        let m = stats::mean(data.target());
        let s = stats::population_std(data.target());
        (m, if s > 0.0 { s } else { 1.0 })
    } else {
        (0.0, 1.0)
    };
    let targets_std: Vec<f64> = data
        .target()
        .iter()
        .map(|t| (t - target_mean) / target_scale)
        .collect();

    let mut model = init_mlp(p, config)?;
    model.input_scaling = input_scaling;
    model.target_mean = target_mean;
    model.target_scale = target_scale;

    let nh = config.n_hidden;
    let mut vel = MlpGradient {
        w1: vec![0.0; nh * p],
        b1: vec![0.0; nh],
        w2: vec![0.0; nh],
        b2: 0.0,
    };
    let mut shuffle_rng = rng_from_seed(derive_seed(config.seed, 1));
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let all_rows: Vec<&[f64]> = rows_std.iter().map(|r| r.as_slice()).collect();

    for _ in 0..config.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            let rows: Vec<&[f64]> = batch.iter().map(|&i| rows_std[i].as_slice()).collect();
            let targets: Vec<f64> = batch.iter().map(|&i| targets_std[i]).collect();
            let g = gradient(&model, &rows, &targets)?;
            let lr = config.learning_rate;
            let mu = config.momentum;
            for (v, gv) in vel.w1.iter_mut().zip(&g.w1) {
                *v = mu * *v - lr * gv;
            }
            for (v, gv) in vel.b1.iter_mut().zip(&g.b1) {
                *v = mu * *v - lr * gv;
            }
            for (v, gv) in vel.w2.iter_mut().zip(&g.w2) {
                *v = mu * *v - lr * gv;
            }
            vel.b2 = mu * vel.b2 - lr * g.b2;
            for (w, v) in model.w1.iter_mut().zip(&vel.w1) {
                *w += v;
            }
            for (b, v) in model.b1.iter_mut().zip(&vel.b1) {
                *b += v;
            }
            for (w, v) in model.w2.iter_mut().zip(&vel.w2) {
                *w += v;
            }
            model.b2 += vel.b2;
        }
        trace.push(model.batch_mse(&all_rows, &targets_std));
    }
    Ok((model, TrainTrace { epoch_mse: trace }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_data(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        Dataset::new(vec!["x".into()], rows, y, "y").unwrap()
    }

    #[test]
    fn init_biases_are_exactly_one() {
        let cfg = MlpConfig::default();
        let model = init_mlp(3, &cfg).unwrap();
        assert!(model.b1.iter().all(|&b| b == 1.0));
        assert_eq!(model.b2, 1.0);
        assert_eq!(model.w1.len(), 3 * 16);
        assert_eq!(model.w2.len(), 16);
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = MlpConfig {
            seed: 9,
            ..MlpConfig::default()
        };
        assert_eq!(init_mlp(4, &cfg).unwrap(), init_mlp(4, &cfg).unwrap());
        let other = MlpConfig {
            seed: 10,
            ..MlpConfig::default()
        };
        assert_ne!(init_mlp(4, &cfg).unwrap(), init_mlp(4, &other).unwrap());
    }

    #[test]
    fn init_shapes_match_config() {
        let cfg = MlpConfig {
            n_hidden: 4,
            ..MlpConfig::default()
        };
        let model = init_mlp(3, &cfg).unwrap();
        assert_eq!(model.w1.len(), 12);
        assert_eq!(model.w2.len(), 4);
    }

    #[test]
    fn zero_weights_forward_to_output_bias() {
        let cfg = MlpConfig {
            n_hidden: 2,
            ..MlpConfig::default()
        };
        let mut model = init_mlp(3, &cfg).unwrap();
        model.w1.iter_mut().for_each(|w| *w = 0.0);
        model.w2.iter_mut().for_each(|w| *w = 0.0);
        assert_eq!(model.forward(&[5.0, -1.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn hand_built_unit_evaluates_the_activation_at_one() {
        for (act, expected) in [
            (Activation::Sigmoid, 1.0 / (1.0 + (-1.0f64).exp())),
            (Activation::Tanh, 1.0f64.tanh()),
        ] {
            let cfg = MlpConfig {
                n_hidden: 1,
                activation: act,
                ..MlpConfig::default()
            };
            let mut model = init_mlp(1, &cfg).unwrap();
            model.w1 = vec![0.0];
            model.b1 = vec![1.0];
            model.w2 = vec![1.0];
            model.b2 = 0.0;
            let got = model.forward(&[0.7]).unwrap();
            assert!((got - expected).abs() < 1e-12, "{act:?}: {got}");
        }
    }

    #[test]
    fn zero_residual_batch_has_zero_gradient() {
        let cfg = MlpConfig {
            n_hidden: 3,
            seed: 2,
            ..MlpConfig::default()
        };
        let model = init_mlp(2, &cfg).unwrap();
        let rows_owned = [vec![0.3, -0.2], vec![1.0, 0.5]];
        let rows: Vec<&[f64]> = rows_owned.iter().map(|r| r.as_slice()).collect();
        let targets: Vec<f64> = rows.iter().map(|r| model.forward_std(r)).collect();
        let g = gradient(&model, &rows, &targets).unwrap();
        assert!(g.w1.iter().all(|&v| v == 0.0));
        assert!(g.b1.iter().all(|&v| v == 0.0));
        assert!(g.w2.iter().all(|&v| v == 0.0));
        assert_eq!(g.b2, 0.0);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let model = init_mlp(2, &MlpConfig::default()).unwrap();
        assert!(matches!(
            model.forward(&[1.0]),
            Err(Error::RowLength { .. })
        ));
    }

    #[test]
    fn zero_epochs_returns_initial_weights() {
        let data = line_data(40);
        let cfg = MlpConfig {
            epochs: 0,
            batch_size: 8,
            seed: 7,
            ..MlpConfig::default()
        };
        let (model, trace) = fit_mlp(&data, &cfg).unwrap();
        let init = init_mlp(1, &cfg).unwrap();
        assert_eq!(model.w1, init.w1);
        assert_eq!(model.b1, init.b1);
        assert_eq!(model.w2, init.w2);
        assert_eq!(model.b2, init.b2);
        assert!(trace.epoch_mse.is_empty());
    }

    #[test]
    fn training_reduces_mse_on_a_line() {
        let data = line_data(200);
        let cfg = MlpConfig {
            epochs: 50,
            seed: 1,
            ..MlpConfig::default()
        };
        let (_, trace) = fit_mlp(&data, &cfg).unwrap();
        let first = trace.epoch_mse[0];
        let last = *trace.epoch_mse.last().unwrap();
        assert!(last < first, "first {first}, last {last}");
    }

    #[test]
    fn training_is_bit_for_bit_deterministic() {
        let data = line_data(64);
        let cfg = MlpConfig {
            epochs: 10,
            batch_size: 16,
            seed: 3,
            ..MlpConfig::default()
        };
        let (a, ta) = fit_mlp(&data, &cfg).unwrap();
        let (b, tb) = fit_mlp(&data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn batch_size_larger_than_n_is_rejected() {
        let data = line_data(10);
        let cfg = MlpConfig {
            batch_size: 11,
            ..MlpConfig::default()
        };
        assert!(fit_mlp(&data, &cfg).is_err());
    }

    #[test]
    fn model_round_trips_through_json() {
        let data = line_data(50);
        let cfg = MlpConfig {
            epochs: 5,
            batch_size: 10,
            ..MlpConfig::default()
        };
        let (model, _) = fit_mlp(&data, &cfg).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: MlpModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
        assert_eq!(
            model.forward(data.row(3)).unwrap(),
            back.forward(data.row(3)).unwrap()
        );
    }
}
