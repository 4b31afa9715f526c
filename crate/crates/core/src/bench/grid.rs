use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{load_experiment_data, run_cell, train_model, ExperimentConfig, ResultRecord};
use crate::dataset::{apply_normalizer, fit_normalizer, stratified_folds, Dataset};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Folds of the inner cross-validation that scores grid points.
pub const INNER_FOLDS: usize = 3;

/// A parameter grid: dotted config keys (such as `es.sigma`) mapped to the
/// values to try.
pub type Grid = BTreeMap<String, Vec<Value>>;

/// Sets each dotted key in `params` on a copy of `base`. Unknown keys are
/// rejected.
pub fn apply_params(
    base: &ExperimentConfig,
    params: &BTreeMap<String, Value>,
) -> Result<ExperimentConfig> {
    let mut doc = serde_json::to_value(base)?;
    for (key, value) in params {
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| Error::InvalidConfig(format!("unknown parameter {key:?}")))?;
        }
        *slot = value.clone();
    }
    let cfg: ExperimentConfig = serde_json::from_value(doc)
        .map_err(|e| Error::InvalidConfig(format!("bad parameter value: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Every combination of grid values. Keys vary in sorted order, the last key
/// fastest.
pub fn grid_points(grid: &Grid) -> Result<Vec<BTreeMap<String, Value>>> {
    if let Some((k, _)) = grid.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::InvalidConfig(format!(
            "grid key {k:?} has no values"
        )));
    }
    let mut points = vec![BTreeMap::new()];
    for (key, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(key.clone(), v.clone());
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: BTreeMap<String, Value>,
    /// Mean inner validation accuracy over every outer split.
    pub inner_accuracy: f64,
    /// Number of outer splits on which this point won the inner comparison.
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub points: Vec<GridPoint>,
    /// Index into `points` of the highest mean inner accuracy, first on ties.
    pub best: usize,
    pub best_config: ExperimentConfig,
    /// Outer-fold scores of the configuration chosen afresh on each outer split.
    pub nested: Vec<ResultRecord>,
}

impl GridResult {
    pub fn markdown(&self) -> String {
        let mut out =
            String::from("| parameters | inner accuracy (%) | selected |\n|---|---|---|\n");
        for (i, p) in self.points.iter().enumerate() {
            let params: Vec<String> = p.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let acc = format!("{:.2}", 100.0 * p.inner_accuracy);
            let acc = if i == self.best {
                format!("**{acc}**")
            } else {
                acc
            };
            out.push_str(&format!(
                "| {} | {acc} | {} |\n",
                params.join(", "),
                p.selected
            ));
        }
        out
    }
}

/// Nested cross-validation over a parameter grid.
pub fn grid_search(base: &ExperimentConfig, grid: &Grid) -> Result<GridResult> {
    base.validate()?;
    let (name, data) = load_experiment_data(base)?;
    grid_search_on(base, grid, &name, &data)
}

/// For every outer (seed, fold) split, each grid point is scored by
/// [`INNER_FOLDS`]-fold cross-validation on the outer training part alone. The
/// winner (highest inner accuracy, first on ties) is retrained on the whole
/// outer training part and scored on the outer test fold.
pub fn grid_search_on(
    base: &ExperimentConfig,
    grid: &Grid,
    dataset_name: &str,
    data: &Dataset,
) -> Result<GridResult> {
    let configs = grid_points(grid)?
        .into_iter()
        .map(|p| Ok((apply_params(base, &p)?, p)))
        .collect::<Result<Vec<_>>>()?;
    let mut totals = vec![0.0; configs.len()];
    let mut selected = vec![0usize; configs.len()];
    let mut nested = Vec::new();
    let mut splits = 0usize;

    for &seed in &base.seeds {
        let plan = stratified_folds(data, base.folds, seed)?;
        for fold in 0..base.folds {
            let (train_idx, _) = plan.split(fold);
            let outer_train = data.subset(&train_idx);
            let cell_seed = derive_seed(seed, fold as u64);
            let score =
                |(cfg, _): &(ExperimentConfig, _)| inner_score(cfg, &outer_train, cell_seed);
            let scores = if base.parallel {
                configs.par_iter().map(score).collect::<Result<Vec<_>>>()?
            } else {
                configs.iter().map(score).collect::<Result<Vec<_>>>()?
            };
            let winner = first_max(&scores);
            selected[winner] += 1;
            for (t, s) in totals.iter_mut().zip(&scores) {
                *t += s;
            }
            splits += 1;
            nested.push(run_cell(&configs[winner].0, dataset_name, data, &plan, fold)?.record);
        }
    }
    let points: Vec<GridPoint> = configs
        .iter()
        .zip(totals.iter().zip(&selected))
        .map(|((_, params), (&t, &s))| GridPoint {
            params: params.clone(),
            inner_accuracy: t / splits as f64,
            selected: s,
        })
        .collect();
    let best = first_max(&points.iter().map(|p| p.inner_accuracy).collect::<Vec<_>>());
    Ok(GridResult {
        best_config: configs[best].0.clone(),
        points,
        best,
        nested,
    })
}

/// Mean validation accuracy over inner folds of `train`, each normalized on
/// its own inner training part.
fn inner_score(cfg: &ExperimentConfig, train: &Dataset, cell_seed: u64) -> Result<f64> {
    let plan = stratified_folds(train, INNER_FOLDS, derive_seed(cell_seed, 0))?;
    let mut sum = 0.0;
    for fold in 0..INNER_FOLDS {
        let (tr, va) = plan.split(fold);
        let (tr, va) = (train.subset(&tr), train.subset(&va));
        let stats = fit_normalizer(&tr)?;
        let model = train_model(
            cfg,
            &apply_normalizer(&tr, &stats)?,
            derive_seed(cell_seed, 1 + fold as u64),
        )?;
        sum += model.accuracy(&apply_normalizer(&va, &stats)?)?;
    }
    Ok(sum / INNER_FOLDS as f64)
}

fn first_max(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn cartesian_order() {
        let mut grid = Grid::new();
        grid.insert("depth".into(), vec![json!(2), json!(3)]);
        grid.insert(
            "algorithm".into(),
            vec![json!("cart"), json!("rf"), json!("es")],
        );
        let pts = grid_points(&grid).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0]["algorithm"], json!("cart"));
        assert_eq!(pts[0]["depth"], json!(2));
        assert_eq!(pts[1]["depth"], json!(3));
        assert_eq!(pts[2]["algorithm"], json!("rf"));
        assert!(grid_points(&Grid::from([("depth".into(), vec![])])).is_err());
        assert_eq!(grid_points(&Grid::new()).unwrap().len(), 1);
    }

    #[test]
    fn dotted_overrides() {
        let base = ExperimentConfig::default();
        let p = BTreeMap::from([
            ("es.sigma".to_string(), json!(0.3)),
            ("trees".to_string(), json!(4)),
        ]);
        let cfg = apply_params(&base, &p).unwrap();
        assert_eq!(cfg.es.sigma, 0.3);
        assert_eq!(cfg.trees, 4);
        assert_eq!(cfg.de, base.de);
        let typo = BTreeMap::from([("es.sigmaa".to_string(), json!(0.3))]);
        assert!(apply_params(&base, &typo).is_err());
        let wrong_type = BTreeMap::from([("trees".to_string(), json!("many"))]);
        assert!(apply_params(&base, &wrong_type).is_err());
    }

    #[test]
    fn first_max_prefers_earliest() {
        assert_eq!(first_max(&[0.5, 0.7, 0.7, 0.1]), 1);
    }
}
