use super::{Objective, OptimizationResult, Optimizer};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::tree::{attach_leaves, decode, majority_fit, LabeledTree, TreeShape};

/// Training accuracy of the decoded, majority-labeled tree. Weighted when the
/// dataset carries sample weights.
#[derive(Debug, Clone, Copy)]
pub struct TreeObjective<'a> {
    data: &'a Dataset,
    shape: TreeShape,
}

impl<'a> TreeObjective<'a> {
    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.shape.genotype_len()
    }
}

pub fn tree_objective(train: &Dataset, shape: TreeShape) -> Result<TreeObjective<'_>> {
    if train.is_empty() {
        return Err(Error::InvalidData("empty training set".into()));
    }
    if train.n_features() != shape.n_features {
        return Err(Error::DimensionMismatch {
            expected: shape.n_features,
            actual: train.n_features(),
        });
    }
    Ok(TreeObjective { data: train, shape })
}

impl Objective for TreeObjective<'_> {
    fn evaluate(&self, genotype: &[f64]) -> Result<f64> {
        let tree = decode(genotype, self.shape)?;
        Ok(majority_fit(&tree, self.data))
    }
}

/// Searches for a tree maximizing training accuracy and labels its leaves on
/// `train`.
pub fn evolve_tree(
    train: &Dataset,
    shape: TreeShape,
    optimizer: &Optimizer,
    seed: u64,
) -> Result<(LabeledTree, OptimizationResult)> {
    let objective = tree_objective(train, shape)?;
    let result = optimizer.run(&objective, objective.dim(), seed)?;
    let tree = attach_leaves(&decode(&result.best, shape)?, train)?;
    Ok((tree, result))
}
