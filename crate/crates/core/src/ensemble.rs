//! Ensembles of decision trees combined by (weighted) plurality vote, and the
//! evolutionary ways of building them: bagging, AdaBoost.M1 and joint search
//! over all trees at once.

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{GreedyNode, GreedyTree};
use crate::dataset::{apply_normalizer, bootstrap_sample, Dataset, NormalizationStats};
use crate::error::{Error, Result};
use crate::evolution::{evolve_tree, Objective, OptimizationResult, Optimizer};
use crate::rng::{derive_seed, seeded};
use crate::tree::{
    accuracy_of, attach_leaves, decode, score_predictions, DecisionTree, LabeledTree, TreeShape,
};

/// Identifies the JSON model format.
pub const MODEL_FORMAT: &str = "evodt-ensemble";
pub const MODEL_VERSION: u32 = 1;

/// One voting member.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeModel {
    /// Fixed-depth complete tree, as produced by genotype decoding.
    Complete(LabeledTree),
    /// Arbitrary binary tree grown greedily.
    Greedy(GreedyTree),
}

impl TreeModel {
    fn n_features(&self) -> usize {
        match self {
            TreeModel::Complete(t) => t.shape().n_features,
            TreeModel::Greedy(t) => t.n_features(),
        }
    }

    fn max_label(&self) -> usize {
        match self {
            TreeModel::Complete(t) => t.leaf_labels().iter().copied().max().unwrap_or(0),
            TreeModel::Greedy(t) => t
                .nodes()
                .iter()
                .filter_map(|n| match n {
                    GreedyNode::Leaf { label } => Some(*label),
                    GreedyNode::Split { .. } => None,
                })
                .max()
                .unwrap_or(0),
        }
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> usize {
        match self {
            TreeModel::Complete(t) => t.predict_unchecked(x),
            TreeModel::Greedy(t) => t.predict_unchecked(x),
        }
    }
}

/// A trained classifier: trees, optional per-tree vote weights, class names and
/// optionally the feature scaling fitted on its training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleDocument", into = "EnsembleDocument")]
pub struct Ensemble {
    trees: Vec<TreeModel>,
    tree_weights: Option<Vec<f64>>,
    class_names: Vec<String>,
    n_features: usize,
    normalization: Option<NormalizationStats>,
}

impl Ensemble {
    pub fn new(
        trees: Vec<TreeModel>,
        tree_weights: Option<Vec<f64>>,
        class_names: Vec<String>,
        n_features: usize,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidData("ensemble has no trees".into()));
        }
        if let Some(t) = trees.iter().find(|t| t.n_features() != n_features) {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                actual: t.n_features(),
            });
        }
        if trees.iter().any(|t| t.max_label() >= class_names.len()) {
            return Err(Error::InvalidData("leaf label out of class range".into()));
        }
        if let Some(w) = &tree_weights {
            if w.len() != trees.len() || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidData(
                    "tree weights must be finite, >= 0 and one per tree".into(),
                ));
            }
        }
        Ok(Ensemble {
            trees,
            tree_weights,
            class_names,
            n_features,
            normalization: None,
        })
    }

    /// A one-tree ensemble.
    pub fn single(tree: TreeModel, class_names: Vec<String>) -> Result<Self> {
        let n_features = tree.n_features();
        Ensemble::new(vec![tree], None, class_names, n_features)
    }

    pub fn with_normalization(mut self, stats: NormalizationStats) -> Result<Self> {
        if stats.n_features() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: stats.n_features(),
            });
        }
        self.normalization = Some(stats);
        Ok(self)
    }

    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn tree_weights(&self) -> Option<&[f64]> {
        self.tree_weights.as_deref()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn normalization(&self) -> Option<&NormalizationStats> {
        self.normalization.as_ref()
    }

    /// Class with the largest total vote weight, ties to the lowest class id.
    /// `x` must already be on the training scale.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    /// Predicts on raw features, applying the stored scaling first if any.
    pub fn predict_raw(&self, x: &[f64]) -> Result<usize> {
        match &self.normalization {
            Some(s) if x.len() == self.n_features => {
                let scaled: Vec<f64> = x.iter().enumerate().map(|(j, &v)| s.scale(j, v)).collect();
                self.predict(&scaled)
            }
            _ => self.predict(x),
        }
    }

    fn predict_unchecked(&self, x: &[f64]) -> usize {
        let mut scores = vec![0.0; self.n_classes()];
        for (t, tree) in self.trees.iter().enumerate() {
            let w = self.tree_weights.as_ref().map_or(1.0, |w| w[t]);
            scores[tree.predict_unchecked(x)] += w;
        }
        argmax(&scores)
    }

    pub fn predict_all(&self, data: &Dataset) -> Result<Vec<usize>> {
        self.check_data(data)?;
        Ok(data.rows().map(|x| self.predict_unchecked(x)).collect())
    }

    /// Fraction correct, or weight of correct predictions for weighted data.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        self.check_data(data)?;
        Ok(accuracy_of(|x| self.predict_unchecked(x), data))
    }

    /// Scales raw data with the stored normalization, if any.
    pub fn prepare(&self, data: &Dataset) -> Result<Dataset> {
        match &self.normalization {
            Some(s) => apply_normalizer(data, s),
            None => Ok(data.clone()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.n_features() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: data.n_features(),
            });
        }
        if data.labels().iter().any(|&l| l >= self.n_classes()) {
            return Err(Error::InvalidData(
                "label outside the model's classes".into(),
            ));
        }
        Ok(())
    }
}

/// Prediction of `ensemble` for one sample.
pub fn vote_predict(ensemble: &Ensemble, x: &[f64]) -> Result<usize> {
    ensemble.predict(x)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = c;
        }
    }
    best
}

#[derive(Serialize, Deserialize)]
struct EnsembleDocument {
    format: String,
    version: u32,
    n_features: usize,
    class_names: Vec<String>,
    tree_weights: Option<Vec<f64>>,
    #[serde(default)]
    normalization: Option<NormalizationStats>,
    trees: Vec<TreeDocument>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TreeDocument {
    Complete {
        depth: usize,
        features: Vec<usize>,
        thresholds: Vec<f64>,
        leaf_labels: Vec<usize>,
    },
    Greedy {
        nodes: Vec<GreedyNode>,
    },
}

impl From<Ensemble> for EnsembleDocument {
    fn from(e: Ensemble) -> Self {
        let trees = e
            .trees
            .into_iter()
            .map(|t| match t {
                TreeModel::Complete(t) => TreeDocument::Complete {
                    depth: t.shape().depth,
                    features: t.tree().features().to_vec(),
                    thresholds: t.tree().thresholds().to_vec(),
                    leaf_labels: t.leaf_labels().to_vec(),
                },
                TreeModel::Greedy(t) => TreeDocument::Greedy {
                    nodes: t.nodes().to_vec(),
                },
            })
            .collect();
        EnsembleDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            n_features: e.n_features,
            class_names: e.class_names,
            tree_weights: e.tree_weights,
            normalization: e.normalization,
            trees,
        }
    }
}

impl TryFrom<EnsembleDocument> for Ensemble {
    type Error = Error;

    fn try_from(doc: EnsembleDocument) -> Result<Self> {
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(Error::InvalidData(format!(
                "unsupported model format {} v{}",
                doc.format, doc.version
            )));
        }
        let f = doc.n_features;
        let trees = doc
            .trees
            .into_iter()
            .map(|t| match t {
                TreeDocument::Complete {
                    depth,
                    features,
                    thresholds,
                    leaf_labels,
                } => {
                    let shape = TreeShape::new(depth, f)?;
                    let tree = DecisionTree::from_nodes(shape, features, thresholds)?;
                    Ok(TreeModel::Complete(LabeledTree::new(tree, leaf_labels)?))
                }
                TreeDocument::Greedy { nodes } => {
                    Ok(TreeModel::Greedy(GreedyTree::from_nodes(nodes, f)?))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let e = Ensemble::new(trees, doc.tree_weights, doc.class_names, f)?;
        match doc.normalization {
            Some(s) => e.with_normalization(s),
            None => Ok(e),
        }
    }
}

/// Bagged evolved trees. Tree `b` is evolved on the bootstrap resample seeded by
/// `derive_seed(seed, 2b)` with optimizer seed `derive_seed(seed, 2b + 1)`, and
/// its leaves are labeled on that resample. With `feature_subsample`, each tree
/// only sees `round(sqrt(F))` randomly chosen features.
pub fn train_evo_rf(
    train: &Dataset,
    shape: TreeShape,
    n_trees: usize,
    optimizer: &Optimizer,
    seed: u64,
    feature_subsample: bool,
) -> Result<Ensemble> {
    if n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
    }
    check_shape(train, shape)?;
    let one = |b: usize| -> Result<TreeModel> {
        let b = b as u64;
        let boot_seed = derive_seed(seed, 2 * b);
        let sample = bootstrap_sample(train, boot_seed)?;
        if !feature_subsample {
            let (tree, _) = evolve_tree(&sample, shape, optimizer, derive_seed(seed, 2 * b + 1))?;
            return Ok(TreeModel::Complete(tree));
        }
        let f = shape.n_features;
        let m = ((f as f64).sqrt().round() as usize).clamp(1, f);
        let mut columns = sample_indices(&mut seeded(derive_seed(boot_seed, 1)), f, m).into_vec();
        columns.sort_unstable();
        let projected = sample.select_features(&columns)?;
        let sub_shape = TreeShape::new(shape.depth, m)?;
        let (tree, _) = evolve_tree(
            &projected,
            sub_shape,
            optimizer,
            derive_seed(seed, 2 * b + 1),
        )?;
        let full = tree.tree().clone().remap_features(&columns, f)?;
        Ok(TreeModel::Complete(LabeledTree::new(
            full,
            tree.leaf_labels().to_vec(),
        )?))
    };
    let trees = if optimizer.parallel() {
        (0..n_trees)
            .into_par_iter()
            .map(one)
            .collect::<Result<Vec<_>>>()?
    } else {
        (0..n_trees).map(one).collect::<Result<Vec<_>>>()?
    };
    Ensemble::new(
        trees,
        None,
        train.class_names().to_vec(),
        train.n_features(),
    )
}

fn check_shape(train: &Dataset, shape: TreeShape) -> Result<()> {
    if train.n_features() != shape.n_features {
        return Err(Error::DimensionMismatch {
            expected: shape.n_features,
            actual: train.n_features(),
        });
    }
    Ok(())
}

/// One boosting round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    /// Weighted training error of this round's tree.
    pub epsilon: f64,
    /// Vote weight given to the tree; 0 when it was discarded.
    pub alpha: f64,
    /// `sum_i w_i exp(-alpha y_i h(x_i))` before renormalization, with labels
    /// and predictions as +-1. 1 for a discarded tree.
    pub normalizer: f64,
    pub accepted: bool,
    /// Sample weights after this round.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostOutcome {
    pub ensemble: Ensemble,
    pub rounds: Vec<BoostRound>,
}

impl BoostOutcome {
    /// Product of the round normalizers. Equals the mean of
    /// `exp(-y_i f(x_i))` over the training set, which bounds the training
    /// error of the weighted vote from above.
    pub fn loss_bound(&self) -> f64 {
        self.rounds.iter().map(|r| r.normalizer).product()
    }
}

/// AdaBoost.M1 on a binary task. `fit` receives the training set carrying the
/// current sample weights and the round index.
///
/// Stops early on a perfect tree, whose error is taken as `1/(2n)` when
/// setting its vote, or on a tree with error >= 0.5, which is discarded unless
/// it is the first, in which case it is kept with vote weight 1.
pub(crate) fn boost<F>(train: &Dataset, rounds: usize, mut fit: F) -> Result<BoostOutcome>
where
    F: FnMut(&Dataset, usize) -> Result<TreeModel>,
{
    if rounds == 0 {
        return Err(Error::InvalidConfig("rounds must be >= 1".into()));
    }
    if train.n_classes() != 2 {
        return Err(Error::InvalidConfig(format!(
            "boosting needs exactly 2 classes, got {}",
            train.n_classes()
        )));
    }
    if train.is_empty() {
        return Err(Error::InvalidData("empty training set".into()));
    }
    let n = train.n_samples();
    let base = train.clone().without_weights();
    let mut w = vec![1.0 / n as f64; n];
    let mut trees = Vec::new();
    let mut alphas = Vec::new();
    let mut history = Vec::new();

    for t in 0..rounds {
        let weighted = base.clone().with_weights(w.clone())?;
        let model = fit(&weighted, t)?;
        let miss: Vec<bool> = base
            .rows()
            .zip(base.labels())
            .map(|(x, &y)| model.predict_unchecked(x) != y)
            .collect();
        let epsilon: f64 = w
            .iter()
            .zip(&miss)
            .filter(|(_, &m)| m)
            .map(|(wi, _)| wi)
            .sum();

        if epsilon >= 0.5 {
            let first = trees.is_empty();
            let alpha: f64 = if first { 1.0 } else { 0.0 };
            let normalizer = if first {
                (1.0 - epsilon) * (-alpha).exp() + epsilon * alpha.exp()
            } else {
                1.0
            };
            if first {
                trees.push(model);
                alphas.push(alpha);
            }
            history.push(BoostRound {
                epsilon,
                alpha,
                normalizer,
                accepted: first,
                weights: w.clone(),
            });
            break;
        }

        let perfect = epsilon == 0.0;
        let eff = if perfect {
            1.0 / (2 * n) as f64
        } else {
            epsilon
        };
        let alpha = 0.5 * ((1.0 - eff) / eff).ln();
        let normalizer = (1.0 - epsilon) * (-alpha).exp() + epsilon * alpha.exp();
        trees.push(model);
        alphas.push(alpha);
        if !perfect {
            for (wi, &m) in w.iter_mut().zip(&miss) {
                *wi *= if m { alpha.exp() } else { (-alpha).exp() };
            }
            let sum: f64 = w.iter().sum();
            w.iter_mut().for_each(|wi| *wi /= sum);
        }
        history.push(BoostRound {
            epsilon,
            alpha,
            normalizer,
            accepted: true,
            weights: w.clone(),
        });
        if perfect {
            break;
        }
    }
    let ensemble = Ensemble::new(
        trees,
        Some(alphas),
        train.class_names().to_vec(),
        train.n_features(),
    )?;
    Ok(BoostOutcome {
        ensemble,
        rounds: history,
    })
}

/// AdaBoost.M1 over evolved trees; round `t` optimizes weighted training
/// accuracy with seed `derive_seed(seed, t)`.
pub fn train_evo_boost(
    train: &Dataset,
    shape: TreeShape,
    rounds: usize,
    optimizer: &Optimizer,
    seed: u64,
) -> Result<BoostOutcome> {
    check_shape(train, shape)?;
    boost(train, rounds, |weighted, t| {
        let (tree, _) = evolve_tree(weighted, shape, optimizer, derive_seed(seed, t as u64))?;
        Ok(TreeModel::Complete(tree))
    })
}

/// Training accuracy of the unweighted vote of `n_trees` trees decoded from
/// consecutive slices of one genotype, each labeled on the full training set.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleObjective<'a> {
    data: &'a Dataset,
    shape: TreeShape,
    n_trees: usize,
}

impl<'a> EnsembleObjective<'a> {
    pub fn new(data: &'a Dataset, shape: TreeShape, n_trees: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidData("empty training set".into()));
        }
        if n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
        }
        check_shape(data, shape)?;
        Ok(EnsembleObjective {
            data,
            shape,
            n_trees,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_trees * self.shape.genotype_len()
    }

    /// The labeled ensemble a genotype encodes.
    pub fn decode(&self, genotype: &[f64]) -> Result<Ensemble> {
        self.check_len(genotype)?;
        let trees = genotype
            .chunks(self.shape.genotype_len())
            .map(|g| {
                Ok(TreeModel::Complete(attach_leaves(
                    &decode(g, self.shape)?,
                    self.data,
                )?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(
            trees,
            None,
            self.data.class_names().to_vec(),
            self.data.n_features(),
        )
    }

    fn check_len(&self, genotype: &[f64]) -> Result<()> {
        if genotype.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: genotype.len(),
            });
        }
        Ok(())
    }
}

impl Objective for EnsembleObjective<'_> {
    fn evaluate(&self, genotype: &[f64]) -> Result<f64> {
        self.check_len(genotype)?;
        let data = self.data;
        let (n, k) = (data.n_samples(), data.n_classes());
        let n_leaves = self.shape.n_leaves();
        let mut votes = vec![0u32; n * k];
        let mut leaf_of = vec![0usize; n];
        let mut counts = vec![0.0; n_leaves * k];
        for g in genotype.chunks(self.shape.genotype_len()) {
            let tree = decode(g, self.shape)?;
            counts.fill(0.0);
            for (i, x) in data.rows().enumerate() {
                let leaf = tree.leaf_index(x);
                leaf_of[i] = leaf;
                counts[leaf * k + data.label(i)] += data.weight(i);
            }
            // Every sample sits in a nonempty leaf, so ancestor fallback for
            // empty leaves never affects the vote here.
            let labels: Vec<usize> = counts.chunks(k).map(argmax).collect();
            for (i, &leaf) in leaf_of.iter().enumerate() {
                votes[i * k + labels[leaf]] += 1;
            }
        }
        let predicted: Vec<usize> = votes
            .chunks(k)
            .map(|v| {
                let mut best = 0;
                for (c, &x) in v.iter().enumerate() {
                    if x > v[best] {
                        best = c;
                    }
                }
                best
            })
            .collect();
        Ok(score_predictions(&predicted, data))
    }
}

/// Searches all trees jointly. The optimizer runs with `seed` itself, so a
/// one-tree ensemble reproduces [`evolve_tree`] exactly.
pub fn train_evo_ensemble(
    train: &Dataset,
    shape: TreeShape,
    n_trees: usize,
    optimizer: &Optimizer,
    seed: u64,
) -> Result<(Ensemble, OptimizationResult)> {
    let objective = EnsembleObjective::new(train, shape, n_trees)?;
    let result = optimizer.run(&objective, objective.dim(), seed)?;
    Ok((objective.decode(&result.best)?, result))
}
