//! Fixed-shape axis-parallel decision trees decoded from real-valued genotypes.
//!
//! A genotype of length `2M` encodes the `M = 2^d - 1` internal nodes of a
//! complete binary tree of depth `d`. Its first half orders the nodes and picks
//! their features: the smallest not-yet-used value is taken next, its position
//! modulo the feature count is the node's feature, and the second-half value at
//! the same position (clamped to `[0, 1]`) is its threshold. Nodes are placed
//! in heap order (slot 0 is the root, slot `i` has children `2i+1` and `2i+2`).
//!
//! A sample goes left when `x[feature] <= threshold`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Depth and feature count of a complete tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeShape {
    pub depth: usize,
    pub n_features: usize,
}

impl TreeShape {
    /// Largest supported depth; keeps node arrays addressable.
    pub const MAX_DEPTH: usize = 24;

    pub fn new(depth: usize, n_features: usize) -> Result<Self> {
        if depth == 0 || depth > Self::MAX_DEPTH {
            return Err(Error::InvalidConfig(format!(
                "tree depth must be in 1..={}, got {depth}",
                Self::MAX_DEPTH
            )));
        }
        if n_features == 0 {
            return Err(Error::InvalidConfig(
                "trees need at least one feature".into(),
            ));
        }
        Ok(TreeShape { depth, n_features })
    }

    pub fn n_internal(&self) -> usize {
        (1 << self.depth) - 1
    }

    pub fn n_leaves(&self) -> usize {
        1 << self.depth
    }

    pub fn n_slots(&self) -> usize {
        self.n_internal() + self.n_leaves()
    }

    pub fn genotype_len(&self) -> usize {
        2 * self.n_internal()
    }
}

/// A flat real vector: first half orders nodes and selects features, second
/// half holds thresholds. Values are not restricted to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genotype(Vec<f64>);

impl Genotype {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || !values.len().is_multiple_of(2) {
            return Err(Error::InvalidGenotype(format!(
                "length must be even and >= 2, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGenotype(format!("entry {i} is not finite")));
        }
        Ok(Genotype(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Internal nodes of a complete tree; leaves are not yet labeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    shape: TreeShape,
    features: Vec<usize>,
    thresholds: Vec<f64>,
}

impl DecisionTree {
    /// Builds a tree from explicit heap-ordered node arrays.
    pub fn from_nodes(
        shape: TreeShape,
        features: Vec<usize>,
        thresholds: Vec<f64>,
    ) -> Result<Self> {
        let m = shape.n_internal();
        if features.len() != m || thresholds.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: features.len().min(thresholds.len()),
            });
        }
        if let Some(&f) = features.iter().find(|&&f| f >= shape.n_features) {
            return Err(Error::InvalidConfig(format!(
                "feature index {f} out of range for {} features",
                shape.n_features
            )));
        }
        if thresholds.iter().any(|t| t.is_nan()) {
            return Err(Error::InvalidConfig("NaN threshold".into()));
        }
        Ok(DecisionTree {
            shape,
            features,
            thresholds,
        })
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Replaces every node's feature index through `map` (used when a tree was
    /// decoded over a feature subset).
    pub fn remap_features(mut self, map: &[usize], n_features: usize) -> Result<Self> {
        for f in &mut self.features {
            *f = *map.get(*f).ok_or(Error::DimensionMismatch {
                expected: self.shape.n_features,
                actual: map.len(),
            })?;
        }
        self.shape = TreeShape::new(self.shape.depth, n_features)?;
        if self.features.iter().any(|&f| f >= n_features) {
            return Err(Error::InvalidConfig("remapped feature out of range".into()));
        }
        Ok(self)
    }

    /// Leaf index (`0..n_leaves`) reached by `x`. Exactly `depth` comparisons.
    #[inline]
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut slot = 0;
        for _ in 0..self.shape.depth {
            slot = if x[self.features[slot]] <= self.thresholds[slot] {
                2 * slot + 1
            } else {
                2 * slot + 2
            };
        }
        slot - self.shape.n_internal()
    }

    /// Heap slots visited by `x`, root first, ending at the leaf slot.
    pub fn path(&self, x: &[f64]) -> Vec<usize> {
        let mut slot = 0;
        let mut path = vec![0];
        for _ in 0..self.shape.depth {
            slot = if x[self.features[slot]] <= self.thresholds[slot] {
                2 * slot + 1
            } else {
                2 * slot + 2
            };
            path.push(slot);
        }
        path
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.is_empty() {
            return Err(Error::InvalidData("empty dataset".into()));
        }
        if data.n_features() != self.shape.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.shape.n_features,
                actual: data.n_features(),
            });
        }
        Ok(())
    }
}

/// A tree whose every leaf carries a class id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTree {
    tree: DecisionTree,
    leaf_labels: Vec<usize>,
}

impl LabeledTree {
    pub fn new(tree: DecisionTree, leaf_labels: Vec<usize>) -> Result<Self> {
        if leaf_labels.len() != tree.shape.n_leaves() {
            return Err(Error::DimensionMismatch {
                expected: tree.shape.n_leaves(),
                actual: leaf_labels.len(),
            });
        }
        Ok(LabeledTree { tree, leaf_labels })
    }

    pub fn tree(&self) -> &DecisionTree {
        &self.tree
    }

    pub fn shape(&self) -> TreeShape {
        self.tree.shape
    }

    pub fn leaf_labels(&self) -> &[usize] {
        &self.leaf_labels
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.tree.shape.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.tree.shape.n_features,
                actual: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> usize {
        self.leaf_labels[self.tree.leaf_index(x)]
    }
}

impl fmt::Display for LabeledTree {
    /// One line per slot in heap order: `slot feature threshold` for internal
    /// nodes, `slot leaf label` for leaves.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.tree.shape.n_internal();
        for slot in 0..m {
            writeln!(
                f,
                "{slot} x{} <= {}",
                self.tree.features[slot], self.tree.thresholds[slot]
            )?;
        }
        for (i, label) in self.leaf_labels.iter().enumerate() {
            writeln!(f, "{} leaf {label}", m + i)?;
        }
        Ok(())
    }
}

/// Decodes a genotype into a tree with unlabeled leaves.
pub fn decode(genotype: &[f64], shape: TreeShape) -> Result<DecisionTree> {
    let m = shape.n_internal();
    if genotype.len() != 2 * m {
        return Err(Error::InvalidGenotype(format!(
            "length {} does not match {} for depth {}",
            genotype.len(),
            2 * m,
            shape.depth
        )));
    }
    if let Some(i) = genotype.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidGenotype(format!("entry {i} is not finite")));
    }
    let (order_part, threshold_part) = genotype.split_at(m);
    let mut consumed = vec![false; m];
    let mut features = Vec::with_capacity(m);
    let mut thresholds = Vec::with_capacity(m);
    for _ in 0..m {
        // Smallest remaining value; strict `<` keeps the lowest index on ties.
        let mut pick = usize::MAX;
        for (p, &v) in order_part.iter().enumerate() {
            if !consumed[p] && (pick == usize::MAX || v < order_part[pick]) {
                pick = p;
            }
        }
        consumed[pick] = true;
        features.push(pick % shape.n_features);
        thresholds.push(threshold_part[pick].clamp(0.0, 1.0));
    }
    Ok(DecisionTree {
        shape,
        features,
        thresholds,
    })
}

/// Per-slot, per-class weight of the samples routed through each slot.
pub(crate) struct RoutedCounts {
    /// `counts[slot * k + class]` over all `2^(d+1) - 1` slots.
    counts: Vec<f64>,
    /// Number of samples reaching each slot.
    hits: Vec<usize>,
    k: usize,
}

impl RoutedCounts {
    fn argmax(&self, slot: usize) -> usize {
        let row = &self.counts[slot * self.k..(slot + 1) * self.k];
        let mut best = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        best
    }
}

fn route_counts(tree: &DecisionTree, data: &Dataset) -> RoutedCounts {
    let k = data.n_classes();
    let slots = tree.shape.n_slots();
    let mut counts = vec![0.0; slots * k];
    let mut hits = vec![0usize; slots];
    for (i, x) in data.rows().enumerate() {
        let w = data.weight(i);
        let label = data.label(i);
        let mut slot = 0;
        loop {
            counts[slot * k + label] += w;
            hits[slot] += 1;
            if slot >= tree.shape.n_internal() {
                break;
            }
            slot = if x[tree.features[slot]] <= tree.thresholds[slot] {
                2 * slot + 1
            } else {
                2 * slot + 2
            };
        }
    }
    RoutedCounts { counts, hits, k }
}

/// Labels each leaf with the (weighted) majority class of the training samples
/// routed to it, ties to the lowest class id. An empty leaf takes the majority
/// of its nearest ancestor that received samples.
pub fn attach_leaves(tree: &DecisionTree, data: &Dataset) -> Result<LabeledTree> {
    tree.check_data(data)?;
    let routed = route_counts(tree, data);
    let m = tree.shape.n_internal();
    let leaf_labels = (0..tree.shape.n_leaves())
        .map(|leaf| {
            let mut slot = m + leaf;
            while routed.hits[slot] == 0 {
                slot = (slot - 1) / 2;
            }
            routed.argmax(slot)
        })
        .collect();
    Ok(LabeledTree {
        tree: tree.clone(),
        leaf_labels,
    })
}

/// Fraction of correct predictions, or the weight of correct predictions when
/// the dataset carries sample weights.
pub fn accuracy(tree: &LabeledTree, data: &Dataset) -> Result<f64> {
    tree.tree.check_data(data)?;
    Ok(accuracy_of(|x| tree.predict_unchecked(x), data))
}

pub(crate) fn accuracy_of(predict: impl Fn(&[f64]) -> usize, data: &Dataset) -> f64 {
    let predicted: Vec<usize> = data.rows().map(predict).collect();
    score_predictions(&predicted, data)
}

/// Accuracy of per-sample predictions, weighted when `data` carries weights.
pub(crate) fn score_predictions(predicted: &[usize], data: &Dataset) -> f64 {
    let hits = predicted.iter().zip(data.labels()).map(|(p, y)| p == y);
    match data.weights() {
        Some(w) => hits.zip(w).filter(|(h, _)| *h).map(|(_, &wi)| wi).sum(),
        None => hits.filter(|&h| h).count() as f64 / data.n_samples() as f64,
    }
}

/// Training accuracy of the majority-labeled tree, computed directly from the
/// routed class counts without materializing the labeled tree.
pub(crate) fn majority_fit(tree: &DecisionTree, data: &Dataset) -> f64 {
    let k = data.n_classes();
    let n_leaves = tree.shape.n_leaves();
    let mut counts = vec![0.0; n_leaves * k];
    let mut correct_count = vec![0usize; n_leaves * k];
    for (i, x) in data.rows().enumerate() {
        let leaf = tree.leaf_index(x);
        counts[leaf * k + data.label(i)] += data.weight(i);
        correct_count[leaf * k + data.label(i)] += 1;
    }
    let weighted = data.weights().is_some();
    let mut total = 0.0;
    let mut total_count = 0usize;
    for leaf in 0..n_leaves {
        let row = &counts[leaf * k..(leaf + 1) * k];
        let mut best = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        total += row[best];
        total_count += correct_count[leaf * k + best];
    }
    if weighted {
        total
    } else {
        total_count as f64 / data.n_samples() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(depth: usize, f: usize) -> TreeShape {
        TreeShape::new(depth, f).unwrap()
    }

    fn stump(t: f64) -> LabeledTree {
        let tree = DecisionTree::from_nodes(shape(1, 1), vec![0], vec![t]).unwrap();
        LabeledTree::new(tree, vec![0, 1]).unwrap()
    }

    #[test]
    fn shape_sizes() {
        let s = shape(3, 4);
        assert_eq!((s.n_internal(), s.n_leaves(), s.genotype_len()), (7, 8, 14));
        assert!(TreeShape::new(0, 2).is_err());
        assert!(TreeShape::new(2, 0).is_err());
    }

    #[test]
    fn decode_worked_example() {
        // Hand trace: first half [0.7, 0.2, 0.9] is consumed at positions 1, 0, 2.
        let g = [0.7, 0.2, 0.9, 0.5, 0.3, 0.8];
        let t = decode(&g, shape(2, 2)).unwrap();
        assert_eq!(t.features(), &[1, 0, 0]);
        assert_eq!(t.thresholds(), &[0.3, 0.5, 0.8]);
    }

    #[test]
    fn decode_tie_takes_lowest_position() {
        let g = [0.5, 0.5, 0.5, 0.1, 0.2, 0.3];
        let t = decode(&g, shape(2, 3)).unwrap();
        assert_eq!(t.features(), &[0, 1, 2]);
        assert_eq!(t.thresholds(), &[0.1, 0.2, 0.3]);
    }

    #[test]
    fn decode_clamps_thresholds_only() {
        let g = [0.3, 1.7];
        let t = decode(&g, shape(1, 1)).unwrap();
        assert_eq!(t.thresholds(), &[1.0]);
        let t = decode(&[-4.0, -0.2], shape(1, 1)).unwrap();
        assert_eq!(t.thresholds(), &[0.0]);
    }

    #[test]
    fn decode_errors() {
        assert!(matches!(
            decode(&[0.1, 0.2, 0.3, 0.4], shape(2, 1)),
            Err(Error::InvalidGenotype(_))
        ));
        assert!(matches!(
            decode(&[f64::NAN, 0.2], shape(1, 1)),
            Err(Error::InvalidGenotype(_))
        ));
        assert!(Genotype::new(vec![0.1, 0.2, 0.3]).is_err());
        assert!(Genotype::new(vec![0.1, f64::INFINITY]).is_err());
    }

    #[test]
    fn predict_boundary_is_inclusive() {
        let t = stump(0.5);
        assert_eq!(t.predict(&[0.3]).unwrap(), 0);
        assert_eq!(t.predict(&[0.5]).unwrap(), 0);
        assert_eq!(t.predict(&[0.9]).unwrap(), 1);
        assert!(matches!(
            t.predict(&[0.1, 0.2]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn data(xs: &[f64], ys: &[usize]) -> Dataset {
        Dataset::new(
            xs.iter().map(|&x| vec![x]).collect(),
            ys.to_vec(),
            vec!["A".into(), "B".into()],
        )
        .unwrap()
    }

    #[test]
    fn leaf_majority_and_ties() {
        let tree = DecisionTree::from_nodes(shape(1, 1), vec![0], vec![0.5]).unwrap();
        // Left leaf gets [A, A, B], right leaf gets [A, B].
        let d = data(&[0.1, 0.2, 0.3, 0.7, 0.8], &[0, 0, 1, 0, 1]);
        let t = attach_leaves(&tree, &d).unwrap();
        assert_eq!(t.leaf_labels(), &[0, 0]);
    }

    #[test]
    fn empty_leaf_inherits_from_parent() {
        let tree =
            DecisionTree::from_nodes(shape(2, 1), vec![0, 0, 0], vec![0.5, 0.2, 0.9]).unwrap();
        // Every sample in the right subtree falls in slot 5; slot 6 is empty.
        let d = data(&[0.1, 0.6, 0.7, 0.8], &[0, 1, 1, 0]);
        let t = attach_leaves(&tree, &d).unwrap();
        // Leaves (slots 3..7): slot 3 <- [A]; slot 4 empty <- parent slot 1 [A];
        // slot 5 <- [B, B, A]; slot 6 empty <- parent slot 2 [B, B, A].
        assert_eq!(t.leaf_labels(), &[0, 0, 1, 1]);
    }

    #[test]
    fn weighted_majority() {
        let tree = DecisionTree::from_nodes(shape(1, 1), vec![0], vec![0.5]).unwrap();
        let d = data(&[0.1, 0.2, 0.3], &[0, 0, 1])
            .with_weights(vec![0.1, 0.1, 0.8])
            .unwrap();
        let t = attach_leaves(&tree, &d).unwrap();
        assert_eq!(t.leaf_labels()[0], 1);
    }

    #[test]
    fn accuracy_counts() {
        let t = stump(0.5);
        let d = data(&[0.1, 0.2, 0.9], &[0, 0, 0]);
        assert!((accuracy(&t, &d).unwrap() - 2.0 / 3.0).abs() < 1e-15);

        let xs: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<usize> = xs.iter().map(|&x| usize::from(x > 0.5)).collect();
        assert_eq!(accuracy(&t, &data(&xs, &ys)).unwrap(), 1.0);
        let mut ys_bad = ys.clone();
        ys_bad[0] = 1;
        ys_bad[1] = 1;
        ys_bad[9] = 0;
        assert!((accuracy(&t, &data(&xs, &ys_bad)).unwrap() - 0.7).abs() < 1e-12);

        let w = data(&[0.1, 0.9, 0.2], &[0, 1, 1])
            .with_weights(vec![0.5, 0.25, 0.25])
            .unwrap();
        assert_eq!(accuracy(&t, &w).unwrap(), 0.75);
    }

    #[test]
    fn accuracy_rejects_empty() {
        let d = data(&[0.1], &[0]).subset(&[]);
        assert!(accuracy(&stump(0.5), &d).is_err());
        assert!(attach_leaves(stump(0.5).tree(), &d).is_err());
    }

    #[test]
    fn majority_fit_matches_labeled_accuracy() {
        let tree =
            DecisionTree::from_nodes(shape(2, 1), vec![0, 0, 0], vec![0.5, 0.2, 0.9]).unwrap();
        let d = data(&[0.1, 0.6, 0.7, 0.8, 0.95, 0.3], &[0, 1, 1, 0, 0, 1]);
        let labeled = attach_leaves(&tree, &d).unwrap();
        assert_eq!(majority_fit(&tree, &d), accuracy(&labeled, &d).unwrap());
        let dw = d.with_weights(vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.1]).unwrap();
        let labeled = attach_leaves(&tree, &dw).unwrap();
        assert!((majority_fit(&tree, &dw) - accuracy(&labeled, &dw).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn dump_lists_every_slot() {
        let s = stump(0.25).to_string();
        assert_eq!(s, "0 x0 <= 0.25\n1 leaf 0\n2 leaf 1\n");
    }
}
