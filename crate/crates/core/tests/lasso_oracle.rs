//! Closed-form oracles for the coordinate-descent Lasso.
//!
//! On an orthonormal design (in the 1/n inner product) the Lasso solution is
//! soft-thresholded OLS coordinate by coordinate, which pins the solver
//! against textbook algebra rather than against itself.

use rand::Rng;

use fuelcast::data::Dataset;
use fuelcast::linear::{
    fit_lasso, fit_lasso_with_trace, lambda_max, soft_threshold, LassoConfig,
};
use fuelcast::rng::rng_from_seed;

/// 64 x 8 design whose columns are +/-1, balanced, and mutually orthogonal:
/// columns 1..=8 of the order-64 Sylvester-Hadamard matrix. Each column has
/// mean 0 and population std 1, so standardization is a no-op.
fn hadamard_design(y: Vec<f64>) -> Dataset {
    let n = 64;
    let p = 8;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(p);
        for j in 1..=p {
            // Sylvester construction: H[i][j] = (-1)^{popcount(i & j)}.
            let sign = if (i & j).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            row.push(sign);
        }
        rows.push(row);
    }
    let names = (0..p).map(|j| format!("h{j}")).collect();
    Dataset::new(names, rows, y, "y").unwrap()
}

fn ols_per_coordinate(data: &Dataset) -> Vec<f64> {
    let n = data.n_rows() as f64;
    let y = data.target();
    let y_mean = y.iter().sum::<f64>() / n;
    (0..data.n_features())
        .map(|j| {
            (0..data.n_rows())
                .map(|i| data.value(i, j) * (y[i] - y_mean))
                .sum::<f64>()
                / n
        })
        .collect()
}

#[test]
fn orthonormal_design_matches_soft_thresholded_ols() {
    let mut rng = rng_from_seed(404);
    let y: Vec<f64> = (0..64).map(|_| rng.gen_range(-10.0..10.0)).collect();
    let data = hadamard_design(y);
    let ols = ols_per_coordinate(&data);
    let lmax = lambda_max(&data, true).unwrap();
    assert!((lmax - ols.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()))).abs() < 1e-12);

    for trial in 0..20 {
        let lambda = rng.gen_range(0.0..2.0 * lmax);
        let model = fit_lasso(
            &data,
            &LassoConfig {
                lambda,
                ..LassoConfig::default()
            },
        )
        .unwrap();
        for (j, (&got, &b_ols)) in model.coefficients.iter().zip(&ols).enumerate() {
            let want = soft_threshold(b_ols, lambda);
            assert!(
                (got - want).abs() < 1e-6,
                "trial {trial} coord {j}: got {got}, want {want} (lambda {lambda})"
            );
        }
    }

    // At or above lambda_max every coefficient is exactly zero.
    for factor in [1.0, 1.5, 3.0] {
        let model = fit_lasso(
            &data,
            &LassoConfig {
                lambda: lmax * factor,
                ..LassoConfig::default()
            },
        )
        .unwrap();
        assert!(model.coefficients.iter().all(|&b| b == 0.0));
    }
}

#[test]
fn objective_descends_every_sweep() {
    let mut rng = rng_from_seed(15);
    for problem in 0..50 {
        let n = rng.gen_range(10..=60);
        let p = rng.gen_range(1..=6);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let truth: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| {
                r.iter().zip(&truth).map(|(x, b)| x * b).sum::<f64>()
                    + rng.gen_range(-0.5..0.5)
            })
            .collect();
        let names = (0..p).map(|j| format!("f{j}")).collect();
        let data = Dataset::new(names, rows, y, "y").unwrap();
        let lambda = rng.gen_range(0.0..1.0);
        let (_, trace) = fit_lasso_with_trace(
            &data,
            &LassoConfig {
                lambda,
                ..LassoConfig::default()
            },
        )
        .unwrap();
        for (s, w) in trace.windows(2).enumerate() {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-12) + 1e-12,
                "problem {problem}, sweep {s}: objective rose {} -> {}",
                w[0],
                w[1]
            );
        }
    }
}

/// KKT stationarity at the solver's convergence tolerance: active
/// coordinates satisfy rho_j = lambda * sign(beta_j) * z_j-scaled curvature;
/// inactive ones satisfy |rho_j| <= lambda.
#[test]
fn kkt_conditions_hold_at_convergence() {
    let mut rng = rng_from_seed(88);
    for _ in 0..25 {
        let n = rng.gen_range(20..=80);
        let p = rng.gen_range(2..=6);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 2.0 * r[0] - 1.5 * r[1 % p] + rng.gen_range(-0.3..0.3))
            .collect();
        let names = (0..p).map(|j| format!("f{j}")).collect();
        let data = Dataset::new(names, rows, y, "y").unwrap();
        let cfg = LassoConfig {
            lambda: rng.gen_range(0.01..0.5),
            ..LassoConfig::default()
        };
        let model = fit_lasso(&data, &cfg).unwrap();
        assert!(model.converged);

        // Rebuild the standardized design and residual the solver saw.
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|j| {
                (0..n)
                    .map(|i| {
                        (data.value(i, j) - model.scaling.means[j]) / model.scaling.scales[j]
                    })
                    .collect()
            })
            .collect();
        let residual: Vec<f64> = (0..n)
            .map(|i| {
                let fit: f64 = (0..p).map(|j| cols[j][i] * model.coefficients[j]).sum();
                data.target()[i] - model.intercept - fit
            })
            .collect();
        let slack = 10.0 * cfg.tol;
        for j in 0..p {
            let z_j: f64 = cols[j].iter().map(|v| v * v).sum::<f64>() / n as f64;
            let grad: f64 =
                cols[j].iter().zip(&residual).map(|(x, r)| x * r).sum::<f64>() / n as f64;
            let b = model.coefficients[j];
            if b != 0.0 {
                assert!(
                    (grad - cfg.lambda * b.signum()).abs() <= slack * z_j.max(1.0),
                    "active coord {j}: grad {grad}, lambda {}",
                    cfg.lambda
                );
            } else {
                assert!(
                    grad.abs() <= cfg.lambda + slack,
                    "inactive coord {j}: |grad| {} above lambda {}",
                    grad.abs(),
                    cfg.lambda
                );
            }
        }
    }
}

/// Zero-coefficient counts never decrease along an increasing lambda grid.
#[test]
fn sparsity_grows_with_lambda() {
    let mut rng = rng_from_seed(7);
    let n = 100;
    let p = 8;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| 3.0 * r[0] - 2.0 * r[1] + 0.5 * r[2] + rng.gen_range(-0.2..0.2))
        .collect();
    let names = (0..p).map(|j| format!("f{j}")).collect();
    let data = Dataset::new(names, rows, y, "y").unwrap();
    let lmax = lambda_max(&data, true).unwrap();
    let mut previous_zeros = 0;
    for step in 0..10 {
        let lambda = lmax * (step as f64 + 1.0) / 10.0;
        let model = fit_lasso(
            &data,
            &LassoConfig {
                lambda,
                ..LassoConfig::default()
            },
        )
        .unwrap();
        let zeros = model.coefficients.iter().filter(|&&b| b == 0.0).count();
        assert!(
            zeros >= previous_zeros,
            "lambda {lambda}: zeros fell {previous_zeros} -> {zeros}"
        );
        previous_zeros = zeros;
    }
    assert_eq!(previous_zeros, p);
}
