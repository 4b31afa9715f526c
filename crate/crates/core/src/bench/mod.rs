//! Cross-validated experiments: configuration, the per-fold training loop,
//! grid search and result reporting.

mod grid;
mod report;

pub use grid::{apply_params, grid_points, grid_search, grid_search_on, GridPoint, GridResult};
pub use report::{markdown_table, read_csv, summarize, write_csv, write_report, Summary};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{
    train_adaboost_greedy, train_bagged_forest, train_greedy_tree, GreedyTreeConfig,
};
use crate::dataset::{
    apply_normalizer, default_cache_dir, fit_normalizer, load_csv_with, stratified_folds,
    CsvOptions, Dataset, FoldPlan, Registry,
};
use crate::ensemble::{train_evo_boost, train_evo_ensemble, train_evo_rf, Ensemble, TreeModel};
use crate::error::{Error, Result};
use crate::evolution::{evolve_tree, DeConfig, EsConfig, Optimizer};
use crate::rng::derive_seed;
use crate::tree::TreeShape;

/// Training procedures the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// One tree evolved by differential evolution.
    De,
    /// One tree evolved by the evolution strategy.
    Es,
    /// Bagged evolved trees.
    EvoRf,
    /// AdaBoost.M1 over evolved trees.
    EvoBoost,
    /// All trees of an ensemble evolved jointly.
    EvoEnsemble,
    /// Greedy Gini tree.
    Cart,
    /// Bagged greedy trees.
    Rf,
    /// AdaBoost.M1 over greedy trees.
    AdaBoost,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::De,
        Algorithm::Es,
        Algorithm::EvoRf,
        Algorithm::EvoBoost,
        Algorithm::EvoEnsemble,
        Algorithm::Cart,
        Algorithm::Rf,
        Algorithm::AdaBoost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::De => "de",
            Algorithm::Es => "es",
            Algorithm::EvoRf => "evorf",
            Algorithm::EvoBoost => "evoboost",
            Algorithm::EvoEnsemble => "evoensemble",
            Algorithm::Cart => "cart",
            Algorithm::Rf => "rf",
            Algorithm::AdaBoost => "adaboost",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                Error::InvalidConfig(format!(
                    "unknown algorithm {s:?}, expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Optimizer used inside the ensemble algorithms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    De,
    #[default]
    Es,
}

/// One experiment: a dataset, an algorithm with its settings, and the
/// cross-validation protocol. Every field has a default, so a JSON config only
/// needs the fields it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in dataset key, or a path to a CSV file.
    pub dataset: String,
    /// Parsing options for CSV paths. Ignored for built-in keys.
    pub csv: CsvOptions,
    /// Download cache for built-in datasets; defaults to `$EVODT_CACHE` or
    /// `./.evodt_cache`.
    pub cache_dir: Option<PathBuf>,
    pub algorithm: Algorithm,
    /// Depth of evolved trees; maximum depth of greedy trees.
    pub depth: usize,
    /// Ensemble size for evorf, evoensemble and rf.
    pub trees: usize,
    /// Boosting rounds for evoboost and adaboost.
    pub rounds: usize,
    pub min_samples_split: usize,
    /// Restrict each evorf tree to a random subset of features.
    pub feature_subsample: bool,
    pub ensemble_optimizer: OptimizerKind,
    pub de: DeConfig,
    pub es: EsConfig,
    pub folds: usize,
    pub seeds: Vec<u64>,
    /// Run folds, trees and fitness evaluations on the thread pool. Results do
    /// not depend on it.
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: "iris".into(),
            csv: CsvOptions::default(),
            cache_dir: None,
            algorithm: Algorithm::Es,
            depth: 3,
            trees: 10,
            rounds: 10,
            min_samples_split: 2,
            feature_subsample: false,
            ensemble_optimizer: OptimizerKind::Es,
            de: DeConfig::default(),
            es: EsConfig::default(),
            folds: 5,
            seeds: vec![0],
            parallel: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.dataset.is_empty() {
            return bad("dataset must be set");
        }
        if self.depth == 0 {
            return bad("depth must be >= 1");
        }
        if self.trees == 0 || self.rounds == 0 {
            return bad("trees and rounds must be >= 1");
        }
        if self.folds < 2 {
            return bad("folds must be >= 2");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        Ok(())
    }

    fn optimizer(&self, kind: OptimizerKind) -> Optimizer {
        match kind {
            OptimizerKind::De => Optimizer::De(DeConfig {
                parallel: self.parallel || self.de.parallel,
                ..self.de.clone()
            }),
            OptimizerKind::Es => Optimizer::Es(EsConfig {
                parallel: self.parallel || self.es.parallel,
                ..self.es.clone()
            }),
        }
    }

    fn greedy(&self) -> GreedyTreeConfig {
        GreedyTreeConfig {
            max_depth: self.depth,
            min_samples_split: self.min_samples_split,
        }
    }
}

/// Loads the configured dataset and returns it with a display name: the
/// registry key, or the file stem of a CSV path.
pub fn load_experiment_data(cfg: &ExperimentConfig) -> Result<(String, Dataset)> {
    let registry = Registry::from_env();
    if registry.get(&cfg.dataset).is_ok() {
        let dir = cfg.cache_dir.clone().unwrap_or_else(default_cache_dir);
        return Ok((cfg.dataset.clone(), registry.load(&cfg.dataset, &dir)?));
    }
    let path = Path::new(&cfg.dataset);
    if !path.is_file() {
        return Err(Error::UnknownDataset(cfg.dataset.clone()));
    }
    let name = path
        .file_stem()
        .map_or_else(|| cfg.dataset.clone(), |s| s.to_string_lossy().into_owned());
    Ok((name, Dataset::from_raw(&load_csv_with(path, &cfg.csv)?)?))
}

/// Fits the configured algorithm to an already-normalized training set.
pub fn train_model(cfg: &ExperimentConfig, train: &Dataset, seed: u64) -> Result<Ensemble> {
    let classes = train.class_names().to_vec();
    let shape = || TreeShape::new(cfg.depth, train.n_features());
    let ens_opt = cfg.optimizer(cfg.ensemble_optimizer);
    match cfg.algorithm {
        Algorithm::De | Algorithm::Es => {
            let kind = if cfg.algorithm == Algorithm::De {
                OptimizerKind::De
            } else {
                OptimizerKind::Es
            };
            let (tree, _) = evolve_tree(train, shape()?, &cfg.optimizer(kind), seed)?;
            Ensemble::single(TreeModel::Complete(tree), classes)
        }
        Algorithm::EvoRf => train_evo_rf(
            train,
            shape()?,
            cfg.trees,
            &ens_opt,
            seed,
            cfg.feature_subsample,
        ),
        Algorithm::EvoBoost => {
            Ok(train_evo_boost(train, shape()?, cfg.rounds, &ens_opt, seed)?.ensemble)
        }
        Algorithm::EvoEnsemble => {
            Ok(train_evo_ensemble(train, shape()?, cfg.trees, &ens_opt, seed)?.0)
        }
        Algorithm::Cart => Ensemble::single(
            TreeModel::Greedy(train_greedy_tree(train, cfg.greedy())?),
            classes,
        ),
        Algorithm::Rf => train_bagged_forest(train, cfg.greedy(), cfg.trees, seed),
        Algorithm::AdaBoost => Ok(train_adaboost_greedy(train, cfg.greedy(), cfg.rounds)?.ensemble),
    }
}

/// Scores of one (seed, fold) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub dataset: String,
    pub algo: String,
    pub fold: usize,
    pub seed: u64,
    pub test_accuracy: f64,
    pub train_accuracy: f64,
    /// Wall-clock training time.
    pub time_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutput {
    pub record: ResultRecord,
    /// The trained model, carrying the normalization fitted on the training
    /// folds.
    pub model: Ensemble,
}

/// Trains on every fold of `plan` but `fold` and scores on `fold`. Features are
/// min-max scaled with statistics from the training folds only. The model seed
/// is `derive_seed(plan.seed, fold)`.
pub fn run_cell(
    cfg: &ExperimentConfig,
    dataset_name: &str,
    data: &Dataset,
    plan: &FoldPlan,
    fold: usize,
) -> Result<CellOutput> {
    if fold >= plan.k || plan.assignments.len() != data.n_samples() {
        return Err(Error::InvalidConfig(
            "fold plan does not match the dataset".into(),
        ));
    }
    let (train_idx, test_idx) = plan.split(fold);
    let (train_raw, test_raw) = (data.subset(&train_idx), data.subset(&test_idx));
    let stats = fit_normalizer(&train_raw)?;
    let train = apply_normalizer(&train_raw, &stats)?;
    let test = apply_normalizer(&test_raw, &stats)?;

    let start = Instant::now();
    let model = train_model(cfg, &train, derive_seed(plan.seed, fold as u64))?;
    let time_ms = start.elapsed().as_millis() as u64;

    let record = ResultRecord {
        dataset: dataset_name.to_string(),
        algo: cfg.algorithm.to_string(),
        fold,
        seed: plan.seed,
        test_accuracy: model.accuracy(&test)?,
        train_accuracy: model.accuracy(&train)?,
        time_ms,
    };
    Ok(CellOutput {
        record,
        model: model.with_normalization(stats)?,
    })
}

/// Stratified k-fold cross-validation repeated over every seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let (name, data) = load_experiment_data(cfg)?;
    run_experiment_on(cfg, &name, &data)
}

/// [`run_experiment`] on an already-loaded dataset. Records are sorted by
/// (dataset, algo, seed, fold).
pub fn run_experiment_on(
    cfg: &ExperimentConfig,
    dataset_name: &str,
    data: &Dataset,
) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let plans = cfg
        .seeds
        .iter()
        .map(|&s| stratified_folds(data, cfg.folds, s))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(&FoldPlan, usize)> = plans
        .iter()
        .flat_map(|p| (0..cfg.folds).map(move |f| (p, f)))
        .collect();
    let run = |&(plan, fold): &(&FoldPlan, usize)| {
        run_cell(cfg, dataset_name, data, plan, fold).map(|c| c.record)
    };
    let mut records = if cfg.parallel {
        cells.par_iter().map(run).collect::<Result<Vec<_>>>()?
    } else {
        cells.iter().map(run).collect::<Result<Vec<_>>>()?
    };
    records.sort_by(|a, b| {
        (&a.dataset, &a.algo, a.seed, a.fold).cmp(&(&b.dataset, &b.algo, b.seed, b.fold))
    });
    Ok(records)
}
