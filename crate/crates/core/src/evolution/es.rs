use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    check_bounds, evaluate_all, mean, uniform_point, Bound, GenerationRecord, Objective,
    OptimizationResult, OptimizationTrace,
};
use crate::error::{Error, Result};
use crate::rng::{seeded, DetRng};

/// Evolution strategy settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsConfig {
    /// Step size.
    pub alpha: f64,
    /// Perturbation scale, > 0.
    pub sigma: f64,
    /// Offsets sampled per iteration.
    pub n_offsets: usize,
    pub iterations: usize,
    pub x_min: Bound,
    pub x_max: Bound,
    pub seed: u64,
    /// Subtract the batch mean from each perturbed fitness before weighting.
    pub center_fitness: bool,
    pub parallel: bool,
}

impl Default for EsConfig {
    fn default() -> Self {
        EsConfig {
            alpha: 0.05,
            sigma: 0.1,
            n_offsets: 50,
            iterations: 100,
            x_min: Bound::Scalar(0.0),
            x_max: Bound::Scalar(1.0),
            seed: 0,
            center_fitness: false,
            parallel: false,
        }
    }
}

impl EsConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidConfig("alpha must be finite".into()));
        }
        if self.n_offsets == 0 {
            return Err(Error::InvalidConfig("n_offsets must be >= 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        check_bounds(&self.x_min, &self.x_max, dim)
    }
}

/// Standard-normal offset vectors for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetBatch {
    offsets: Vec<Vec<f64>>,
}

impl OffsetBatch {
    pub fn new(offsets: Vec<Vec<f64>>) -> Result<Self> {
        let dim = offsets.first().map_or(0, Vec::len);
        if offsets.is_empty() || dim == 0 {
            return Err(Error::InvalidConfig("offset batch must be nonempty".into()));
        }
        if offsets
            .iter()
            .any(|e| e.len() != dim || e.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidConfig(
                "offsets must be finite with equal dimension".into(),
            ));
        }
        Ok(OffsetBatch { offsets })
    }

    /// `n` vectors of `dim` draws, offset-major then dimension-major.
    pub fn sample(rng: &mut DetRng, n: usize, dim: usize) -> Self {
        let offsets = (0..n)
            .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        OffsetBatch { offsets }
    }

    pub fn offsets(&self) -> &[Vec<f64>] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.offsets[0].len()
    }
}

/// Initial individual, drawn uniformly in the bounds.
pub fn es_init(cfg: &EsConfig, dim: usize) -> Result<Vec<f64>> {
    cfg.validate(dim)?;
    Ok(uniform_point(
        &mut seeded(cfg.seed),
        dim,
        &cfg.x_min,
        &cfg.x_max,
    ))
}

/// Outcome of one update: the new individual and the evaluated perturbations.
#[derive(Debug, Clone, PartialEq)]
pub struct EsStep {
    pub next: Vec<f64>,
    /// `x + sigma * e_i` for each offset.
    pub points: Vec<Vec<f64>>,
    /// Fitness at each point.
    pub fitness: Vec<f64>,
}

/// `x <- x + alpha / (n sigma) * sum_i f(x + sigma e_i) e_i`.
pub fn es_step<O: Objective + ?Sized>(
    x: &[f64],
    objective: &O,
    cfg: &EsConfig,
    batch: &OffsetBatch,
) -> Result<EsStep> {
    es_step_at(x, objective, cfg, batch, 0)
}

fn es_step_at<O: Objective + ?Sized>(
    x: &[f64],
    objective: &O,
    cfg: &EsConfig,
    batch: &OffsetBatch,
    iteration: usize,
) -> Result<EsStep> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(cfg.sigma > 0.0) {
        return Err(Error::InvalidConfig("sigma must be > 0".into()));
    }
    if batch.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: batch.dim(),
        });
    }
    let points: Vec<Vec<f64>> = batch
        .offsets
        .iter()
        .map(|e| {
            x.iter()
                .zip(e)
                .map(|(xi, ei)| xi + cfg.sigma * ei)
                .collect()
        })
        .collect();
    let fitness = evaluate_all(objective, &points, cfg.parallel, iteration)?;
    let baseline = if cfg.center_fitness {
        mean(&fitness)
    } else {
        0.0
    };

    let mut direction = vec![0.0; x.len()];
    for (e, f) in batch.offsets.iter().zip(&fitness) {
        let w = f - baseline;
        for (d, ei) in direction.iter_mut().zip(e) {
            *d += w * ei;
        }
    }
    let scale = cfg.alpha / (batch.len() as f64 * cfg.sigma);
    let next = x
        .iter()
        .zip(&direction)
        .map(|(xi, d)| xi + scale * d)
        .collect();
    Ok(EsStep {
        next,
        points,
        fitness,
    })
}

/// Runs `cfg.iterations` updates and returns the best point ever evaluated
/// (the initial individual or any perturbation), first found on ties.
pub fn es_optimize<O: Objective + ?Sized>(
    objective: &O,
    dim: usize,
    cfg: &EsConfig,
) -> Result<OptimizationResult> {
    cfg.validate(dim)?;
    let mut rng = seeded(cfg.seed);
    let mut x = uniform_point(&mut rng, dim, &cfg.x_min, &cfg.x_max);
    let mut best_fitness = evaluate_all(objective, std::slice::from_ref(&x), false, 0)?[0];
    let mut best = x.clone();
    let mut trace = OptimizationTrace::default();

    for it in 1..=cfg.iterations {
        let batch = OffsetBatch::sample(&mut rng, cfg.n_offsets, dim);
        let step = es_step_at(&x, objective, cfg, &batch, it)?;
        for (p, &f) in step.points.iter().zip(&step.fitness) {
            if f > best_fitness {
                best_fitness = f;
                best.clone_from(p);
            }
        }
        trace.records.push(GenerationRecord {
            generation: it,
            best_fitness,
            mean_fitness: mean(&step.fitness),
            best_so_far: best.clone(),
        });
        x = step.next;
    }
    Ok(OptimizationResult {
        best,
        best_fitness,
        trace,
    })
}
