//! Dataset ingestion, synthetic fuel-record generation, descriptive
//! statistics, standardization, and hold-out splitting.
//!
//! A [`Dataset`] is an immutable feature table plus a target vector. The
//! constructor enforces the invariants every downstream learner relies on:
//! at least one row and one feature, rectangular rows, finite values, unique
//! feature names that exclude the target name.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, shuffled_indices, standard_normal};
use crate::stats;

use rand::Rng;

/// Generator capacity classes in KVA.
pub const CAPACITY_CLASSES_KVA: [f64; 4] = [10.0, 20.0, 30.0, 60.0];
/// Nominal burn rate per capacity class, liters per hour.
pub const BASE_RATE_L_PER_H: [f64; 4] = [1.2, 2.0, 2.8, 5.0];
/// Running-time cap between maintenance visits, hours (30 days).
pub const MAX_RUNNING_TIME_H: f64 = 720.0;
/// Relative jitter applied to the nominal burn rate.
pub const RATE_JITTER: f64 = 0.05;
/// Target column name produced by the synthetic generator.
pub const SYNTH_TARGET_NAME: &str = "fuel_l";

/// Column-named numeric feature table plus target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    /// Row-major n x p feature values.
    values: Vec<f64>,
    target: Vec<f64>,
    target_name: String,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        target: Vec<f64>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        let p = feature_names.len();
        let n = rows.len();
        let mut values = Vec::with_capacity(n * p);
        for row in &rows {
            if row.len() != p {
                return Err(Error::RowLength {
                    expected: p,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(feature_names, values, target, target_name)
    }

    /// Build from an already-flattened row-major value buffer.
    pub fn from_flat(
        feature_names: Vec<String>,
        values: Vec<f64>,
        target: Vec<f64>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        let target_name = target_name.into();
        let p = feature_names.len();
        let n = target.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        if p == 0 {
            return Err(Error::InvalidData("dataset has no features".into()));
        }
        if values.len() != n * p {
            return Err(Error::InvalidData(format!(
                "expected {} values for {} rows x {} features, got {}",
                n * p,
                n,
                p,
                values.len()
            )));
        }
        for name in &feature_names {
            if name == &target_name {
                return Err(Error::InvalidData(format!(
                    "feature name '{name}' collides with the target name"
                )));
            }
        }
        for (i, a) in feature_names.iter().enumerate() {
            if feature_names[i + 1..].contains(a) {
                return Err(Error::InvalidData(format!("duplicate feature name '{a}'")));
            }
        }
        if values.iter().chain(target.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite value in dataset".into()));
        }
        Ok(Dataset {
            feature_names,
            values,
            target,
            target_name,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features() + j]
    }

    pub fn feature_column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.value(i, j)).collect()
    }

    /// New dataset with the rows at `indices` (repeats allowed, e.g. for
    /// bootstrap resamples).
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::InvalidData("empty row selection".into()));
        }
        let p = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * p);
        let mut target = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            target.push(self.target[i]);
        }
        Dataset::from_flat(
            self.feature_names.clone(),
            values,
            target,
            self.target_name.clone(),
        )
    }

    /// Same features, different target vector (used to fit trees on residuals).
    pub fn with_target(&self, target: Vec<f64>) -> Result<Dataset> {
        if target.len() != self.n_rows() {
            return Err(Error::InvalidData(format!(
                "replacement target has {} entries for {} rows",
                target.len(),
                self.n_rows()
            )));
        }
        Dataset::from_flat(
            self.feature_names.clone(),
            self.values.clone(),
            target,
            self.target_name.clone(),
        )
    }
}

/// Configuration for the synthetic fuel-record generator.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub n_noise_features: usize,
    /// Relative noise applied to the target.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_rows: 1000,
            n_noise_features: 5,
            noise_sigma: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_rows < 2 {
            return Err(Error::InvalidConfig("synth n_rows must be >= 2".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig(
                "synth noise_sigma must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Generate a synthetic fuel-consumption dataset.
///
/// Per row, in draw order: running time ~ U(0, 720) hours; a capacity class
/// from {10, 20, 30, 60} KVA; a burn rate of the class base rate times
/// (1 + U(-0.05, 0.05)); `num_days` = round(hours / 24); then one standard
/// normal draw per noise column. The target is
/// `rate * hours * (1 + eps)` with `eps ~ N(0, noise_sigma)`, clamped at 0.
/// All draws come from a single ChaCha stream seeded by `config.seed`, so the
/// output is a pure function of the config.
pub fn synth_fuel(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let k = config.n_noise_features;
    let mut names = vec![
        "running_time_h".to_string(),
        "generator_capacity_kva".to_string(),
        "rate_l_per_h".to_string(),
        "num_days".to_string(),
    ];
    for j in 0..k {
        names.push(format!("noise_{j}"));
    }
    let p = names.len();
    let mut values = Vec::with_capacity(config.n_rows * p);
    let mut target = Vec::with_capacity(config.n_rows);
    for _ in 0..config.n_rows {
        let hours = rng.gen_range(0.0..MAX_RUNNING_TIME_H);
        let class = rng.gen_range(0..CAPACITY_CLASSES_KVA.len());
        let jitter = rng.gen_range(-RATE_JITTER..RATE_JITTER);
        let rate = BASE_RATE_L_PER_H[class] * (1.0 + jitter);
        let days = (hours / 24.0).round();
        values.push(hours);
        values.push(CAPACITY_CLASSES_KVA[class]);
        values.push(rate);
        values.push(days);
        for _ in 0..k {
            values.push(standard_normal(&mut rng));
        }
        let eps = standard_normal(&mut rng) * config.noise_sigma;
        target.push((rate * hours * (1.0 + eps)).max(0.0));
    }
    Dataset::from_flat(names, values, target, SYNTH_TARGET_NAME)
}

/// Moment and quantile summary of one numeric column.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DescriptiveStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation (denominator n).
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    /// Fisher-Pearson g1 = m3 / m2^1.5; `None` when the variance is zero.
    pub skewness: Option<f64>,
    /// Excess kurtosis g2 = m4 / m2^2 - 3; `None` when the variance is zero.
    pub excess_kurtosis: Option<f64>,
}

/// Moment statistics of a sample with at least two finite values.
pub fn describe(values: &[f64]) -> Result<DescriptiveStats> {
    if values.len() < 2 {
        return Err(Error::InvalidData(
            "describe needs at least two values".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite value in sample".into()));
    }
    let n = values.len() as f64;
    let mean = stats::mean(values);
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0))
    } else {
        (None, None)
    };
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(DescriptiveStats {
        count: values.len(),
        mean,
        std: m2.sqrt(),
        min: sorted[0],
        q25: stats::quantile_sorted(&sorted, 0.25),
        median: stats::quantile_sorted(&sorted, 0.5),
        q75: stats::quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        skewness,
        excess_kurtosis,
    })
}

/// Probability-plot coefficient of determination against the standard normal.
///
/// Squared Pearson correlation between the sorted sample and the normal
/// quantiles at plotting positions (k - 0.5)/n.
pub fn normality_r2(values: &[f64]) -> Result<f64> {
    if values.len() < 3 {
        return Err(Error::InvalidData(
            "normality_r2 needs at least three values".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite value in sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    if stats::population_variance(&sorted) <= 0.0 {
        return Err(Error::ZeroVariance("normality_r2 sample".into()));
    }
    let n = sorted.len();
    let quantiles: Vec<f64> = (1..=n)
        .map(|k| stats::norm_quantile((k as f64 - 0.5) / n as f64))
        .collect();
    let r = stats::pearson(&sorted, &quantiles);
    Ok(r * r)
}

/// Per-feature centering and scaling parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScalingParams {
    pub means: Vec<f64>,
    /// Population standard deviations, with 1 substituted for zero-variance
    /// columns so every scale is strictly positive.
    pub scales: Vec<f64>,
}

impl ScalingParams {
    /// Identity parameters (no-op transform) for `p` features.
    pub fn identity(p: usize) -> Self {
        ScalingParams {
            means: vec![0.0; p],
            scales: vec![1.0; p],
        }
    }

    /// Fit from the feature columns of a dataset.
    pub fn fit(data: &Dataset) -> Self {
        let p = data.n_features();
        let mut means = Vec::with_capacity(p);
        let mut scales = Vec::with_capacity(p);
        for j in 0..p {
            let col = data.feature_column(j);
            let m = stats::mean(&col);
            let s = stats::population_std(&col);
            means.push(m);
            scales.push(if s > 0.0 { s } else { 1.0 });
        }
        ScalingParams { means, scales }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn invert_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(&v, (&m, &s))| v * s + m)
            .collect()
    }
}

/// Center each feature column to mean 0 and scale it to population std 1.
///
/// Zero-variance columns are centered and left at scale 1. The target is
/// untouched. The returned [`ScalingParams`] invert the transform.
pub fn standardize(data: &Dataset) -> (Dataset, ScalingParams) {
    let params = ScalingParams::fit(data);
    let p = data.n_features();
    let mut values = Vec::with_capacity(data.n_rows() * p);
    for i in 0..data.n_rows() {
        values.extend(params.transform_row(data.row(i)));
    }
    let transformed = Dataset::from_flat(
        data.feature_names().to_vec(),
        values,
        data.target().to_vec(),
        data.target_name().to_string(),
    )
    .expect("standardizing a valid dataset preserves validity");
    (transformed, params)
}

/// Disjoint, exhaustive (train, test) index sets for a seeded hold-out split.
///
/// Test size = round(n * test_fraction), clamped to [1, n-1]; the test set
/// takes the first block of the seeded shuffle.
pub fn holdout_indices(
    n: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidData(
            "hold-out split needs at least two rows".into(),
        ));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test_fraction must be in (0,1), got {test_fraction}"
        )));
    }
    let raw = (n as f64 * test_fraction).round() as usize;
    let test_size = raw.clamp(1, n - 1);
    let shuffled = shuffled_indices(n, seed);
    let test = shuffled[..test_size].to_vec();
    let train = shuffled[test_size..].to_vec();
    Ok((train, test))
}

/// Split a dataset into non-overlapping train and test parts.
pub fn split_holdout(
    data: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (train_idx, test_idx) = holdout_indices(data.n_rows(), test_fraction, seed)?;
    Ok((data.subset(&train_idx)?, data.subset(&test_idx)?))
}

/// Load a dataset from a headed CSV file.
///
/// Every non-target column is treated as a numeric feature. Rows containing
/// a blank or unparseable cell (or the wrong number of fields) are dropped;
/// the second return value counts them.
pub fn load_csv(path: impl AsRef<Path>, target_name: &str) -> Result<(Dataset, usize)> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_name)
        .ok_or_else(|| Error::MissingTarget(target_name.to_string()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut target: Vec<f64> = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        if record.len() != headers.len() {
            dropped += 1;
            continue;
        }
        let parsed: Option<Vec<f64>> = record
            .iter()
            .map(|cell| {
                let cell = cell.trim();
                if cell.is_empty() {
                    None
                } else {
                    cell.parse::<f64>().ok().filter(|v| v.is_finite())
                }
            })
            .collect();
        match parsed {
            Some(cells) => {
                target.push(cells[target_idx]);
                rows.push(
                    cells
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != target_idx)
                        .map(|(_, &v)| v)
                        .collect(),
                );
            }
            None => dropped += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::NoUsableRows(dropped));
    }
    let data = Dataset::new(feature_names, rows, target, target_name)?;
    Ok((data, dropped))
}

/// Read feature rows from a headed CSV for prediction.
///
/// Each expected feature must appear as a column (matched by exact name;
/// extra columns are ignored). Unlike [`load_csv`], a bad cell is an error:
/// predictions must stay row-aligned with the input file.
pub fn read_feature_rows(path: impl AsRef<Path>, expected: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let mut column_index = Vec::with_capacity(expected.len());
    let mut missing = Vec::new();
    for name in expected {
        match headers.iter().position(|h| h == name) {
            Some(i) => column_index.push(i),
            None => missing.push(name.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::SchemaMismatch(format!(
            "input is missing feature column(s): {}",
            missing.join(", ")
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(expected.len());
        for (&idx, name) in column_index.iter().zip(expected) {
            let cell = record.get(idx).map(str::trim).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| {
                Error::InvalidData(format!(
                    "row {}: cannot parse '{cell}' in column '{name}'",
                    line + 2
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::InvalidData(format!(
                    "row {}: non-finite value in column '{name}'",
                    line + 2
                )));
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::NoUsableRows(0));
    }
    Ok(rows)
}
