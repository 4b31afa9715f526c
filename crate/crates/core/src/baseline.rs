//! Greedy top-down decision trees grown by weighted Gini impurity, plus bagged
//! and boosted ensembles of them.

use serde::{Deserialize, Serialize};

use crate::dataset::{bootstrap_sample, Dataset};
use crate::ensemble::{boost, BoostOutcome, Ensemble, TreeModel};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Minimum impurity decrease for a later candidate to replace the current best
/// split. Keeps ties on the lowest feature, then lowest threshold.
const SPLIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreedyTreeConfig {
    /// Maximum number of splits on any root-to-leaf path.
    pub max_depth: usize,
    /// Nodes with fewer samples become leaves.
    pub min_samples_split: usize,
}

impl Default for GreedyTreeConfig {
    fn default() -> Self {
        GreedyTreeConfig {
            max_depth: 3,
            min_samples_split: 2,
        }
    }
}

impl GreedyTreeConfig {
    pub fn unbounded() -> Self {
        GreedyTreeConfig {
            max_depth: usize::MAX,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: usize,
    },
}

/// A binary tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyTree {
    nodes: Vec<GreedyNode>,
    n_features: usize,
}

impl GreedyTree {
    /// Checks that child links point forward, every node is reachable exactly
    /// once and features are in range.
    pub fn from_nodes(nodes: Vec<GreedyNode>, n_features: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidData("tree has no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        seen[0] = true;
        for (i, node) in nodes.iter().enumerate() {
            if let GreedyNode::Split {
                feature,
                threshold,
                left,
                right,
            } = *node
            {
                if feature >= n_features || !threshold.is_finite() {
                    return Err(Error::InvalidData(format!("bad split at node {i}")));
                }
                for child in [left, right] {
                    if child <= i || child >= nodes.len() || seen[child] {
                        return Err(Error::InvalidData(format!("bad child link at node {i}")));
                    }
                    seen[child] = true;
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidData("unreachable node".into()));
        }
        Ok(GreedyTree { nodes, n_features })
    }

    pub fn nodes(&self) -> &[GreedyNode] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, GreedyNode::Leaf { .. }))
            .count()
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            if let GreedyNode::Split { left, right, .. } = *node {
                depth[left] = depth[i] + 1;
                depth[right] = depth[i] + 1;
                max = max.max(depth[i] + 1);
            }
        }
        max
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                GreedyNode::Leaf { label } => return label,
                GreedyNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// `1 - sum_c p_c^2` of a (weighted) class histogram. Zero for an empty one.
pub fn gini(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>()
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

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

struct Builder<'a> {
    data: &'a Dataset,
    cfg: GreedyTreeConfig,
    nodes: Vec<GreedyNode>,
}

impl Builder<'_> {
    fn histogram(&self, idx: &[usize]) -> Vec<f64> {
        let mut h = vec![0.0; self.data.n_classes()];
        for &i in idx {
            h[self.data.label(i)] += self.data.weight(i);
        }
        h
    }

    /// Lowest weighted child impurity over all features and midpoints between
    /// consecutive distinct values.
    fn best_split(&self, idx: &[usize], total: &[f64]) -> Option<Split> {
        let k = total.len();
        let w_total: f64 = total.iter().sum();
        let mut best: Option<Split> = None;
        let mut order = idx.to_vec();
        for feature in 0..self.data.n_features() {
            let value = |i: usize| self.data.row(i)[feature];
            order.sort_by(|&a, &b| value(a).total_cmp(&value(b)));
            let mut left = vec![0.0; k];
            for pos in 0..order.len() - 1 {
                let i = order[pos];
                left[self.data.label(i)] += self.data.weight(i);
                let (a, b) = (value(i), value(order[pos + 1]));
                if a == b {
                    continue;
                }
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let (wl, wr) = (left.iter().sum::<f64>(), right.iter().sum::<f64>());
                let impurity = if w_total > 0.0 {
                    (wl * gini(&left) + wr * gini(&right)) / w_total
                } else {
                    0.0
                };
                if best
                    .as_ref()
                    .is_none_or(|s| impurity < s.impurity - SPLIT_TOLERANCE)
                {
                    best = Some(Split {
                        feature,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let total = self.histogram(&idx);
        self.nodes.push(GreedyNode::Leaf {
            label: argmax(&total),
        });
        let first = self.data.label(idx[0]);
        let pure = idx.iter().all(|&i| self.data.label(i) == first);
        if pure || depth >= self.cfg.max_depth || idx.len() < self.cfg.min_samples_split.max(2) {
            return id;
        }
        let Some(split) = self.best_split(&idx, &total) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.data.row(i)[split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = GreedyNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows a tree top-down, splitting each node on the feature and midpoint
/// threshold with the lowest weighted Gini impurity of the two children.
/// Splits that do not lower impurity are still taken while the node is impure.
pub fn train_greedy_tree(train: &Dataset, cfg: GreedyTreeConfig) -> Result<GreedyTree> {
    if train.is_empty() {
        return Err(Error::InvalidData("empty training set".into()));
    }
    let mut b = Builder {
        data: train,
        cfg,
        nodes: Vec::new(),
    };
    b.grow((0..train.n_samples()).collect(), 0);
    Ok(GreedyTree {
        nodes: b.nodes,
        n_features: train.n_features(),
    })
}

/// Greedy trees on independent bootstrap resamples, combined by plurality vote.
/// Tree `b` uses the resample seeded by `derive_seed(seed, b)`.
pub fn train_bagged_forest(
    train: &Dataset,
    cfg: GreedyTreeConfig,
    n_trees: usize,
    seed: u64,
) -> Result<Ensemble> {
    if n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
    }
    let trees = (0..n_trees)
        .map(|b| {
            let sample = bootstrap_sample(train, derive_seed(seed, b as u64))?;
            Ok(TreeModel::Greedy(train_greedy_tree(&sample, cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(
        trees,
        None,
        train.class_names().to_vec(),
        train.n_features(),
    )
}

/// AdaBoost.M1 over greedy trees fitted to the weighted training set.
pub fn train_adaboost_greedy(
    train: &Dataset,
    cfg: GreedyTreeConfig,
    rounds: usize,
) -> Result<BoostOutcome> {
    boost(train, rounds, |weighted, _| {
        Ok(TreeModel::Greedy(train_greedy_tree(weighted, cfg)?))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|c| format!("c{c}")).collect()
    }

    fn accuracy(t: &GreedyTree, d: &Dataset) -> f64 {
        let correct = d
            .rows()
            .zip(d.labels())
            .filter(|(x, &y)| t.predict(x).unwrap() == y)
            .count();
        correct as f64 / d.n_samples() as f64
    }

    #[test]
    fn gini_values() {
        assert!((gini(&[3.0, 1.0]) - 0.375).abs() < 1e-15);
        assert_eq!(gini(&[4.0, 0.0]), 0.0);
        assert_eq!(gini(&[0.0, 0.0]), 0.0);
        assert!((gini(&[1.0, 1.0, 1.0]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_points_split_at_midpoint() {
        let d = Dataset::new(vec![vec![0.2], vec![0.8]], vec![0, 1], names(2)).unwrap();
        let t = train_greedy_tree(&d, GreedyTreeConfig::default()).unwrap();
        assert_eq!(
            t.nodes()[0],
            GreedyNode::Split {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 2
            }
        );
        assert_eq!(t.predict(&[0.5]).unwrap(), 0);
        assert_eq!(t.predict(&[0.51]).unwrap(), 1);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // Both features separate the classes perfectly.
        let d = Dataset::new(vec![vec![0.1, 0.1], vec![0.9, 0.9]], vec![0, 1], names(2)).unwrap();
        let t = train_greedy_tree(&d, GreedyTreeConfig::default()).unwrap();
        assert!(matches!(t.nodes()[0], GreedyNode::Split { feature: 0, .. }));
    }

    #[test]
    fn xor_needs_a_zero_gain_split() {
        let d = Dataset::new(
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ],
            vec![0, 1, 1, 0],
            names(2),
        )
        .unwrap();
        let t = train_greedy_tree(&d, GreedyTreeConfig::unbounded()).unwrap();
        assert_eq!(accuracy(&t, &d), 1.0);
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn weighted_split_follows_the_heavy_samples() {
        let d = Dataset::new(
            vec![vec![0.1], vec![0.2], vec![0.3]],
            vec![0, 1, 1],
            names(2),
        )
        .unwrap();
        let stump = GreedyTreeConfig {
            max_depth: 0,
            min_samples_split: 2,
        };
        let t = train_greedy_tree(&d, stump).unwrap();
        assert_eq!(t.predict(&[0.1]).unwrap(), 1);
        let w = d.with_weights(vec![0.8, 0.1, 0.1]).unwrap();
        let t = train_greedy_tree(&w, stump).unwrap();
        assert_eq!(t.predict(&[0.1]).unwrap(), 0);
    }

    fn noisy(n: usize, seed: u64) -> Dataset {
        let mut rng = seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random()).collect())
            .collect();
        let labels = rows
            .iter()
            .map(|r| {
                let flip = rng.random::<f64>() < 0.1;
                usize::from((r[0] + r[1] > 1.0) != flip) + 2 * usize::from(r[2] > 0.7)
            })
            .collect();
        Dataset::new(rows, labels, names(4)).unwrap()
    }

    #[test]
    fn accuracy_is_monotone_in_depth_and_unbounded_fits() {
        let d = noisy(200, 1);
        let mut prev = 0.0;
        for depth in 0..=12 {
            let cfg = GreedyTreeConfig {
                max_depth: depth,
                min_samples_split: 2,
            };
            let t = train_greedy_tree(&d, cfg).unwrap();
            assert!(t.depth() <= depth);
            let acc = accuracy(&t, &d);
            assert!(acc >= prev, "depth {depth}: {acc} < {prev}");
            prev = acc;
        }
        let t = train_greedy_tree(&d, GreedyTreeConfig::unbounded()).unwrap();
        assert_eq!(accuracy(&t, &d), 1.0);
    }

    #[test]
    fn min_samples_split_stops_growth() {
        let d = noisy(50, 2);
        let cfg = GreedyTreeConfig {
            max_depth: usize::MAX,
            min_samples_split: 51,
        };
        assert_eq!(train_greedy_tree(&d, cfg).unwrap().n_leaves(), 1);
    }

    #[test]
    fn arena_validation() {
        let good = vec![
            GreedyNode::Split {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 2,
            },
            GreedyNode::Leaf { label: 0 },
            GreedyNode::Leaf { label: 1 },
        ];
        assert!(GreedyTree::from_nodes(good.clone(), 1).is_ok());
        assert!(GreedyTree::from_nodes(good.clone(), 0).is_err());
        let mut cyclic = good;
        cyclic[0] = GreedyNode::Split {
            feature: 0,
            threshold: 0.5,
            left: 0,
            right: 2,
        };
        assert!(GreedyTree::from_nodes(cyclic, 1).is_err());
        assert!(GreedyTree::from_nodes(vec![], 1).is_err());
    }

    #[test]
    fn forest_is_deterministic() {
        let d = noisy(80, 3);
        let a = train_bagged_forest(&d, GreedyTreeConfig::default(), 5, 11).unwrap();
        let b = train_bagged_forest(&d, GreedyTreeConfig::default(), 5, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
    }
}
