//! Black-box maximization over real vectors.
//!
//! Two optimizers are provided: DE/rand/1/bin differential evolution with
//! one-to-one tournament replacement ([`de_optimize`]) and a single-individual
//! evolution strategy that steps along a Gaussian-perturbation gradient
//! estimate ([`es_optimize`]).
//!
//! Each run draws all of its randomness from one generator seeded by the
//! config's `seed`, in a fixed order (generation, then member or offset, then
//! dimension). Draws for a generation are made before any evaluation, so
//! turning on `parallel` evaluation never changes a result.

mod de;
mod es;
mod objective;
mod trace;

pub use de::{de_init, de_optimize, de_trial, DeConfig, DifferentialEvolution, TrialDraw};
pub use es::{es_init, es_optimize, es_step, EsConfig, EsStep, OffsetBatch};
pub use objective::{evolve_tree, tree_objective, TreeObjective};
pub use trace::{GenerationRecord, OptimizationTrace};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::DetRng;

/// A fitness function to maximize. Must be deterministic.
pub trait Objective: Sync {
    fn evaluate(&self, genotype: &[f64]) -> Result<f64>;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, genotype: &[f64]) -> Result<f64> {
        Ok(self(genotype))
    }
}

/// An initialization bound: one value for every dimension, or one per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Scalar(f64),
    PerDim(Vec<f64>),
}

impl Bound {
    pub fn at(&self, j: usize) -> f64 {
        match self {
            Bound::Scalar(v) => *v,
            Bound::PerDim(v) => v[j],
        }
    }

    fn check(&self, dim: usize, name: &str) -> Result<()> {
        match self {
            Bound::Scalar(v) if v.is_finite() => Ok(()),
            Bound::PerDim(v) if v.len() == dim && v.iter().all(|x| x.is_finite()) => Ok(()),
            _ => Err(Error::InvalidConfig(format!(
                "{name} must be a finite scalar or {dim} finite values"
            ))),
        }
    }
}

/// Best genotype found by a run, with its fitness and the per-generation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    pub trace: OptimizationTrace,
}

/// An optimizer and its settings. The settings' own `seed` is ignored by
/// [`Optimizer::run`], which takes the seed explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Optimizer {
    De(DeConfig),
    Es(EsConfig),
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Es(EsConfig::default())
    }
}

impl Optimizer {
    pub fn run<O: Objective + ?Sized>(
        &self,
        objective: &O,
        dim: usize,
        seed: u64,
    ) -> Result<OptimizationResult> {
        match self {
            Optimizer::De(cfg) => de_optimize(
                objective,
                dim,
                &DeConfig {
                    seed,
                    ..cfg.clone()
                },
            ),
            Optimizer::Es(cfg) => es_optimize(
                objective,
                dim,
                &EsConfig {
                    seed,
                    ..cfg.clone()
                },
            ),
        }
    }

    pub fn parallel(&self) -> bool {
        match self {
            Optimizer::De(cfg) => cfg.parallel,
            Optimizer::Es(cfg) => cfg.parallel,
        }
    }
}

fn check_bounds(x_min: &Bound, x_max: &Bound, dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidConfig("dimension must be >= 1".into()));
    }
    x_min.check(dim, "x_min")?;
    x_max.check(dim, "x_max")?;
    if (0..dim).any(|j| x_min.at(j) > x_max.at(j)) {
        return Err(Error::InvalidConfig("x_min exceeds x_max".into()));
    }
    Ok(())
}

/// `x_j = x_min_j + r (x_max_j - x_min_j)`, with a fresh uniform `r` per entry.
fn uniform_point(rng: &mut DetRng, dim: usize, x_min: &Bound, x_max: &Bound) -> Vec<f64> {
    (0..dim)
        .map(|j| {
            let r: f64 = rng.random();
            x_min.at(j) + r * (x_max.at(j) - x_min.at(j))
        })
        .collect()
}

/// Evaluates every point, in parallel if asked. Errors carry the lowest failing
/// member index regardless of evaluation order.
fn evaluate_all<O: Objective + ?Sized>(
    objective: &O,
    points: &[Vec<f64>],
    parallel: bool,
    generation: usize,
) -> Result<Vec<f64>> {
    let eval = |(member, p): (usize, &Vec<f64>)| -> Result<f64> {
        let wrap = |message: String| Error::Objective {
            generation,
            member,
            message,
        };
        let f = objective.evaluate(p).map_err(|e| wrap(e.to_string()))?;
        if !f.is_finite() {
            return Err(wrap(format!("non-finite fitness {f}")));
        }
        Ok(f)
    };
    let results: Vec<Result<f64>> = if parallel {
        points.par_iter().enumerate().map(eval).collect()
    } else {
        points.iter().enumerate().map(eval).collect()
    };
    results.into_iter().collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
