//! Classification data: CSV ingestion, the UCI download cache, min-max
//! normalization, stratified folds and bootstrap resampling.

mod fetch;
mod folds;
mod load;
mod normalize;

pub use fetch::{
    default_cache_dir, fetch_uci, load_dataset, sha256_hex, Fetcher, HttpFetcher, Registry,
    RegistryEntry, CACHE_ENV, MIRROR_ENV,
};
pub use folds::{stratified_folds, FoldPlan};
pub use load::{load_csv, load_csv_with, CsvOptions, LabelColumn, RawRecord, RawTable};
pub use normalize::{apply_normalizer, fit_normalizer, NormalizationStats};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, DetRng};

/// Tolerance on the sum of sample weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// A dense classification dataset.
///
/// Features are stored row-major. Class ids are dense in `0..class_names.len()`.
/// Optional sample weights must form a probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
    weights: Option<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset from per-sample rows.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let n_features = match rows.first() {
            Some(r) => r.len(),
            None => 0,
        };
        let mut features = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} features, expected {n_features}",
                    row.len()
                )));
            }
            features.extend(row);
        }
        Self::from_flat(features, n_features, labels, class_names)
    }

    /// Builds a dataset from a row-major feature buffer.
    pub fn from_flat(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if n_features == 0 && !labels.is_empty() {
            return Err(Error::InvalidData(
                "samples must have at least one feature".into(),
            ));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::InvalidData(format!(
                "feature buffer has {} values, expected {} x {}",
                features.len(),
                labels.len(),
                n_features
            )));
        }
        if class_names.is_empty() {
            return Err(Error::InvalidData("no class names".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidData(format!(
                "class id {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite feature value at sample {}, feature {}",
                pos / n_features,
                pos % n_features
            )));
        }
        Ok(Dataset {
            features,
            n_features,
            labels,
            class_names,
            weights: None,
        })
    }

    /// Converts a parsed table, assigning class ids in first-appearance order.
    pub fn from_raw(raw: &RawTable) -> Result<Self> {
        let n_features = raw.n_features();
        let mut features = Vec::with_capacity(raw.rows.len() * n_features);
        let mut labels = Vec::with_capacity(raw.rows.len());
        for rec in &raw.rows {
            features.extend_from_slice(&rec.features);
            let id = raw
                .class_tokens
                .iter()
                .position(|c| *c == rec.class)
                .ok_or_else(|| Error::InvalidData(format!("unregistered class `{}`", rec.class)))?;
            labels.push(id);
        }
        Self::from_flat(features, n_features, labels, raw.class_tokens.clone())
    }

    /// Attaches sample weights. They must be finite, non-negative and sum to 1.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_samples() {
            return Err(Error::DimensionMismatch {
                expected: self.n_samples(),
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidData(
                "sample weights must be finite and >= 0".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidData(format!(
                "sample weights sum to {sum}, expected 1"
            )));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn without_weights(mut self) -> Self {
        self.weights = None;
        self
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features
            .chunks_exact(self.n_features.max(1))
            .take(self.labels.len())
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Weight of sample `i`; 1.0 for every sample of an unweighted dataset.
    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0,
        }
    }

    /// Per-class (weighted) totals.
    pub fn class_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.n_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            totals[l] += self.weight(i);
        }
        totals
    }

    /// Fraction (or weight share) of the most frequent class.
    pub fn majority_prior(&self) -> f64 {
        let totals = self.class_totals();
        let sum: f64 = totals.iter().sum();
        if sum <= 0.0 {
            return 0.0;
        }
        totals.iter().cloned().fold(0.0, f64::max) / sum
    }

    /// The samples at `indices`, in that order. Weights are dropped.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            n_features: self.n_features,
            labels,
            class_names: self.class_names.clone(),
            weights: None,
        }
    }

    /// Keeps only the given feature columns, in the given order.
    pub fn select_features(&self, columns: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.n_features) {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: bad + 1,
            });
        }
        let mut features = Vec::with_capacity(self.n_samples() * columns.len());
        for row in self.rows() {
            features.extend(columns.iter().map(|&c| row[c]));
        }
        Ok(Dataset {
            features,
            n_features: columns.len(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            weights: self.weights.clone(),
        })
    }
}

/// Draws `n` indices uniformly with replacement from `0..n`.
pub fn bootstrap_indices(n: usize, rng: &mut DetRng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// A same-size resample drawn with replacement. Deterministic for a fixed seed.
pub fn bootstrap_sample(data: &Dataset, seed: u64) -> Result<Dataset> {
    if data.is_empty() {
        return Err(Error::InvalidData(
            "cannot bootstrap an empty dataset".into(),
        ));
    }
    let idx = bootstrap_indices(data.n_samples(), &mut seeded(seed));
    Ok(data.subset(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]],
            vec![0, 1, 0],
            vec!["A".into(), "B".into()],
        )
        .unwrap()
    }

    #[test]
    fn rows_and_labels() {
        let d = toy();
        assert_eq!(d.n_samples(), 3);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.row(1), &[2.0, 3.0]);
        assert_eq!(d.rows().count(), 3);
        assert_eq!(d.class_totals(), vec![2.0, 1.0]);
    }

    #[test]
    fn rejects_out_of_range_label() {
        let err = Dataset::new(vec![vec![0.0]], vec![2], vec!["A".into(), "B".into()]);
        assert!(matches!(err, Err(Error::InvalidData(_))));
    }

    #[test]
    fn weights_must_be_a_distribution() {
        assert!(toy().with_weights(vec![0.5, 0.25, 0.25]).is_ok());
        assert!(toy().with_weights(vec![0.5, 0.25, 0.3]).is_err());
        assert!(toy().with_weights(vec![1.5, -0.25, -0.25]).is_err());
        assert!(toy().with_weights(vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn bootstrap_of_single_row_is_that_row() {
        let d = Dataset::new(vec![vec![3.0]], vec![0], vec!["A".into()]).unwrap();
        let b = bootstrap_sample(&d, 11).unwrap();
        assert_eq!(b, d);
    }

    #[test]
    fn bootstrap_replays_with_same_seed() {
        let d = toy();
        let a = bootstrap_sample(&d, 5).unwrap();
        let b = bootstrap_sample(&d, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_samples(), d.n_samples());
        assert_eq!(a.class_names(), d.class_names());

        // Reference replay: same generator, same draw order.
        let mut rng = seeded(5);
        let idx: Vec<usize> = (0..3).map(|_| rng.random_range(0..3)).collect();
        assert_eq!(a, d.subset(&idx));
    }

    #[test]
    fn bootstrap_distinct_fraction_near_one_minus_inv_e() {
        let n = 1000;
        let mut total = 0.0;
        let draws = 50;
        for s in 0..draws {
            let idx = bootstrap_indices(n, &mut seeded(s));
            let mut seen = vec![false; n];
            idx.iter().for_each(|&i| seen[i] = true);
            total += seen.iter().filter(|&&b| b).count() as f64 / n as f64;
        }
        let mean = total / draws as f64;
        let expected = 1.0 - (-1.0f64).exp();
        assert!(
            (mean - expected).abs() < 0.02,
            "mean distinct fraction {mean}"
        );
    }

    #[test]
    fn bootstrap_rejects_empty() {
        let d = toy().subset(&[]);
        assert!(bootstrap_sample(&d, 0).is_err());
    }
}
