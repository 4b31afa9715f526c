use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Per-feature minimum and maximum of a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationStats {
    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    /// Maps one raw value of feature `j`. Constant features map to 0.
    pub fn scale(&self, j: usize, x: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span > 0.0 {
            (x - self.min[j]) / span
        } else {
            0.0
        }
    }
}

pub fn fit_normalizer(train: &Dataset) -> Result<NormalizationStats> {
    if train.is_empty() {
        return Err(Error::InvalidData(
            "cannot fit a normalizer on an empty dataset".into(),
        ));
    }
    let f = train.n_features();
    let mut min = vec![f64::INFINITY; f];
    let mut max = vec![f64::NEG_INFINITY; f];
    for row in train.rows() {
        for (j, &v) in row.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(NormalizationStats { min, max })
}

/// Applies min-max scaling fitted elsewhere. Values outside the fitted range
/// are not clamped.
pub fn apply_normalizer(data: &Dataset, stats: &NormalizationStats) -> Result<Dataset> {
    if data.n_features() != stats.n_features() {
        return Err(Error::DimensionMismatch {
            expected: stats.n_features(),
            actual: data.n_features(),
        });
    }
    let mut out = data.clone();
    for i in 0..out.n_samples() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = stats.scale(j, *v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn column(values: &[f64]) -> Dataset {
        Dataset::new(
            values.iter().map(|&v| vec![v]).collect(),
            vec![0; values.len()],
            vec!["A".into()],
        )
        .unwrap()
    }

    fn values(d: &Dataset) -> Vec<f64> {
        d.rows().map(|r| r[0]).collect()
    }

    #[test]
    fn min_max_of_column() {
        let s = fit_normalizer(&column(&[2.0, 4.0, 6.0])).unwrap();
        assert_eq!((s.min[0], s.max[0]), (2.0, 6.0));
        let d = apply_normalizer(&column(&[2.0, 4.0, 6.0]), &s).unwrap();
        assert_eq!(values(&d), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let d = column(&[5.0, 5.0, 5.0]);
        let s = fit_normalizer(&d).unwrap();
        assert_eq!((s.min[0], s.max[0]), (5.0, 5.0));
        assert_eq!(values(&apply_normalizer(&d, &s).unwrap()), vec![0.0; 3]);
    }

    #[test]
    fn unit_column_is_unchanged() {
        let d = column(&[0.0, 0.25, 1.0]);
        let s = fit_normalizer(&d).unwrap();
        assert_eq!(apply_normalizer(&d, &s).unwrap(), d);
    }

    #[test]
    fn held_out_values_are_not_clamped() {
        let s = fit_normalizer(&column(&[2.0, 6.0])).unwrap();
        let d = apply_normalizer(&column(&[8.0]), &s).unwrap();
        assert_eq!(values(&d), vec![1.5]);
    }

    #[test]
    fn errors() {
        let empty = column(&[1.0]).subset(&[]);
        assert!(fit_normalizer(&empty).is_err());
        let s = NormalizationStats {
            min: vec![0.0, 0.0],
            max: vec![1.0, 1.0],
        };
        assert!(matches!(
            apply_normalizer(&column(&[1.0]), &s),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn training_data_lands_in_unit_interval(
            rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..40)
        ) {
            let n = rows.len();
            let d = Dataset::new(rows, vec![0; n], vec!["A".into()]).unwrap();
            let s = fit_normalizer(&d).unwrap();
            let out = apply_normalizer(&d, &s).unwrap();
            prop_assert!(out.features().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
