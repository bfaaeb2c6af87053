//! Lasso regression by cyclic coordinate descent with soft-thresholding.
//!
//! Minimizes (1/(2n)) * sum (y_i - b0 - x_i . b)^2 + lambda * sum |b_j|.
//! With this scaling lambda_max = max_j |(1/n) sum x_ij (y_i - mean(y))|
//! deactivates every coefficient. Coordinates update in index order (the fit
//! is single-threaded by contract); the intercept is unpenalized and
//! recomputed each sweep. Sparsity is exact: inactive coefficients are 0.0,
//! not small values.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ScalingParams};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LassoConfig {
    /// L1 penalty weight, >= 0.
    pub lambda: f64,
    /// Convergence threshold on the largest coefficient change per sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    pub standardize_inputs: bool,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            lambda: 0.0,
            tol: 1e-7,
            max_sweeps: 100_000,
            standardize_inputs: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LassoModel {
    pub intercept: f64,
    /// Coefficients on the (possibly standardized) model scale.
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub sweeps_run: usize,
    pub converged: bool,
    /// Input scaling applied before the dot product (identity when
    /// standardization was off).
    pub scaling: ScalingParams,
}

impl LassoModel {
    /// intercept + scaled(row) . coefficients.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.coefficients.len() {
            return Err(Error::RowLength {
                expected: self.coefficients.len(),
                got: row.len(),
            });
        }
        let scaled = self.scaling.transform_row(row);
        Ok(self.intercept
            + scaled
                .iter()
                .zip(&self.coefficients)
                .map(|(x, b)| x * b)
                .sum::<f64>())
    }
}

/// The shrinkage operator sign(z) * max(|z| - gamma, 0).
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Smallest lambda that zeroes every coefficient of the stated objective.
///
/// Computed as max_j |(1/n) x_j . y - mean(y) * mean(x_j)|, the same
/// covariance expression the solver evaluates at beta = 0, so fitting at
/// lambda >= lambda_max leaves every coefficient exactly 0.0.
pub fn lambda_max(data: &Dataset, standardize_inputs: bool) -> Result<f64> {
    if data.n_rows() < 2 {
        return Err(Error::InvalidData(
            "lambda_max needs at least two rows".into(),
        ));
    }
    let (x, _) = design_matrix(data, standardize_inputs);
    let y = data.target();
    let n = data.n_rows() as f64;
    let y_mean = stats::mean(y);
    let mut best = 0.0f64;
    for col in &x {
        let xty: f64 = col.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n;
        let rho = xty - y_mean * stats::mean(col);
        best = best.max(rho.abs());
    }
    Ok(best)
}

/// Column-major design matrix plus the scaling used to build it.
fn design_matrix(data: &Dataset, standardize_inputs: bool) -> (Vec<Vec<f64>>, ScalingParams) {
    let p = data.n_features();
    let scaling = if standardize_inputs {
        ScalingParams::fit(data)
    } else {
        ScalingParams::identity(p)
    };
    let mut cols = vec![Vec::with_capacity(data.n_rows()); p];
    for i in 0..data.n_rows() {
        let row = scaling.transform_row(data.row(i));
        for (j, v) in row.into_iter().enumerate() {
            cols[j].push(v);
        }
    }
    (cols, scaling)
}

/// Fit the Lasso and return the per-sweep penalized objective alongside.
///
/// The trace holds the objective value after each completed sweep; it is
/// non-increasing for the stated update rule.
pub fn fit_lasso_with_trace(
    data: &Dataset,
    config: &LassoConfig,
) -> Result<(LassoModel, Vec<f64>)> {
    if data.n_rows() < 2 {
        return Err(Error::InvalidData("lasso needs at least two rows".into()));
    }
    if !(config.lambda >= 0.0 && config.lambda.is_finite()) {
        return Err(Error::InvalidConfig(
            "lambda must be finite and >= 0".into(),
        ));
    }
    if !(config.tol > 0.0) {
        return Err(Error::InvalidConfig("tol must be > 0".into()));
    }
    if config.max_sweeps < 1 {
        return Err(Error::InvalidConfig("max_sweeps must be >= 1".into()));
    }
    let n = data.n_rows();
    let p = data.n_features();
    let nf = n as f64;
    let y = data.target();
    let (x, scaling) = design_matrix(data, config.standardize_inputs);

    // Covariance-form bookkeeping: with c_j = (1/n) x_j . y and the Gram
    // matrix G = (1/n) X^T X precomputed, the partial residual correlation
    // is rho_j = c_j - b0*m_j - (G.beta)_j + G_jj*beta_j, so every sweep
    // costs O(p^2) instead of O(n*p). Same update rule, same iterates.
    let y_mean = stats::mean(y);
    let yy = y.iter().map(|v| v * v).sum::<f64>() / nf;
    let col_mean: Vec<f64> = x.iter().map(|col| stats::mean(col)).collect();
    let xty: Vec<f64> = x
        .iter()
        .map(|col| col.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / nf)
        .collect();
    let mut gram = vec![0.0f64; p * p];
    for j in 0..p {
        for k in j..p {
            let dot = x[j].iter().zip(&x[k]).map(|(a, b)| a * b).sum::<f64>() / nf;
            gram[j * p + k] = dot;
            gram[k * p + j] = dot;
        }
    }

    let mut beta = vec![0.0f64; p];
    let mut intercept = y_mean;
    // g_beta_j tracks (G.beta)_j, updated incrementally per coordinate move.
    let mut g_beta = vec![0.0f64; p];

    let objective = |beta: &[f64], g_beta: &[f64], intercept: f64| {
        let quad: f64 = beta.iter().zip(g_beta).map(|(b, gb)| b * gb).sum();
        let cross: f64 = beta.iter().zip(&xty).map(|(b, c)| b * c).sum();
        let mean_term: f64 = beta.iter().zip(&col_mean).map(|(b, m)| b * m).sum();
        0.5 * (yy + intercept * intercept + quad - 2.0 * intercept * y_mean - 2.0 * cross
            + 2.0 * intercept * mean_term)
            + config.lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    };

    let mut trace = Vec::new();
    let mut sweeps_run = 0;
    let mut converged = false;
    while sweeps_run < config.max_sweeps {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            let z_j = gram[j * p + j];
            if z_j == 0.0 {
                continue;
            }
            let old = beta[j];
            let rho = xty[j] - intercept * col_mean[j] - g_beta[j] + z_j * old;
            let new = soft_threshold(rho, config.lambda) / z_j;
            if new != old {
                let delta = new - old;
                let row = &gram[j * p..(j + 1) * p];
                for (gb, g) in g_beta.iter_mut().zip(row) {
                    *gb += delta * g;
                }
                beta[j] = new;
            }
            max_delta = max_delta.max((beta[j] - old).abs());
        }
        // Unpenalized intercept, recomputed at its exact optimum each sweep.
        intercept = y_mean
            - beta
                .iter()
                .zip(&col_mean)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        sweeps_run += 1;
        trace.push(objective(&beta, &g_beta, intercept));
        if max_delta <= config.tol {
            converged = true;
            break;
        }
    }

    Ok((
        LassoModel {
            intercept,
            coefficients: beta,
            lambda: config.lambda,
            sweeps_run,
            converged,
            scaling,
        },
        trace,
    ))
}

/// Fit the Lasso by cyclic coordinate descent.
pub fn fit_lasso(data: &Dataset, config: &LassoConfig) -> Result<LassoModel> {
    fit_lasso_with_trace(data, config).map(|(model, _)| model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_data(slope: f64, n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..n).map(|i| slope * i as f64).collect();
        Dataset::new(vec!["x".into()], rows, y, "y").unwrap()
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.0, 0.0), 0.0);
    }

    #[test]
    fn lambda_at_max_zeroes_everything() {
        let data = line_data(2.0, 40);
        let lmax = lambda_max(&data, true).unwrap();
        let model = fit_lasso(
            &data,
            &LassoConfig {
                lambda: lmax,
                ..LassoConfig::default()
            },
        )
        .unwrap();
        assert_eq!(model.coefficients, vec![0.0]);
        let y_mean = stats::mean(data.target());
        assert!((model.intercept - y_mean).abs() < 1e-12);
        assert!(model.converged);
    }

    #[test]
    fn unpenalized_single_feature_matches_ols() {
        let data = line_data(2.0, 50);
        let model = fit_lasso(&data, &LassoConfig::default()).unwrap();
        // On standardized x, the OLS slope for exact y = 2x is 2 * std(x).
        let col = data.feature_column(0);
        let expected = 2.0 * stats::population_std(&col);
        assert!(
            (model.coefficients[0] - expected).abs() < 1e-8,
            "{} vs {expected}",
            model.coefficients[0]
        );
        // Fitted values reproduce the targets.
        for i in 0..data.n_rows() {
            let pred = model.predict(data.row(i)).unwrap();
            assert!((pred - data.target()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_coefficients_predict_intercept() {
        let data = line_data(2.0, 30);
        let lmax = lambda_max(&data, true).unwrap();
        let model = fit_lasso(
            &data,
            &LassoConfig {
                lambda: lmax * 2.0,
                ..LassoConfig::default()
            },
        )
        .unwrap();
        for i in 0..data.n_rows() {
            assert_eq!(model.predict(data.row(i)).unwrap(), model.intercept);
        }
    }

    #[test]
    fn serialized_model_predicts_identically() {
        let data = crate::data::synth_fuel(&crate::data::SynthConfig {
            n_rows: 80,
            n_noise_features: 3,
            noise_sigma: 0.05,
            seed: 4,
        })
        .unwrap();
        let model = fit_lasso(
            &data,
            &LassoConfig {
                lambda: 1.0,
                ..LassoConfig::default()
            },
        )
        .unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: LassoModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
        for i in 0..data.n_rows() {
            assert_eq!(
                model.predict(data.row(i)).unwrap(),
                back.predict(data.row(i)).unwrap()
            );
        }
    }

    #[test]
    fn predict_rejects_wrong_length() {
        let data = line_data(1.0, 10);
        let model = fit_lasso(&data, &LassoConfig::default()).unwrap();
        assert!(matches!(
            model.predict(&[1.0, 2.0]),
            Err(Error::RowLength { .. })
        ));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let data = line_data(1.0, 10);
        for bad in [
            LassoConfig {
                lambda: -1.0,
                ..LassoConfig::default()
            },
            LassoConfig {
                tol: 0.0,
                ..LassoConfig::default()
            },
            LassoConfig {
                max_sweeps: 0,
                ..LassoConfig::default()
            },
        ] {
            assert!(fit_lasso(&data, &bad).is_err());
        }
    }

    #[test]
    fn constant_column_keeps_zero_coefficient() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 7.0]).collect();
        let y: Vec<f64> = (0..20).map(|i| 3.0 * i as f64 + 1.0).collect();
        let data = Dataset::new(vec!["x".into(), "c".into()], rows, y, "y").unwrap();
        let model = fit_lasso(&data, &LassoConfig::default()).unwrap();
        assert_eq!(model.coefficients[1], 0.0);
        for i in 0..data.n_rows() {
            assert!((model.predict(data.row(i)).unwrap() - data.target()[i]).abs() < 1e-7);
        }
    }
}
