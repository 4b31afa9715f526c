use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_bounds, evaluate_all, mean, uniform_point, Bound, GenerationRecord, Objective,
    OptimizationResult, OptimizationTrace,
};
use crate::error::{Error, Result};
use crate::rng::{seeded, DetRng};

/// Differential evolution settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeConfig {
    /// Population size, at least 4.
    pub population_size: usize,
    /// Mutation scale.
    pub alpha: f64,
    /// Crossover rate in `[0, 1]`.
    pub cr: f64,
    pub generations: usize,
    pub x_min: Bound,
    pub x_max: Bound,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            population_size: 50,
            alpha: 0.5,
            cr: 0.9,
            generations: 100,
            x_min: Bound::Scalar(0.0),
            x_max: Bound::Scalar(1.0),
            seed: 0,
            parallel: false,
        }
    }
}

impl DeConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::InvalidConfig(format!(
                "DE population must be >= 4, got {}",
                self.population_size
            )));
        }
        if !(0.0..=1.0).contains(&self.cr) {
            return Err(Error::InvalidConfig(format!(
                "cr must be in [0, 1], got {}",
                self.cr
            )));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidConfig("alpha must be finite".into()));
        }
        if self.generations == 0 {
            return Err(Error::InvalidConfig("generations must be >= 1".into()));
        }
        check_bounds(&self.x_min, &self.x_max, dim)
    }
}

/// Random choices behind one trial vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDraw {
    pub j1: usize,
    pub j2: usize,
    pub j3: usize,
    /// Dimension that always takes the mutant value.
    pub l: usize,
    /// One uniform draw per dimension.
    pub r: Vec<f64>,
}

impl TrialDraw {
    /// Draws three distinct indices other than `target`, then `l`, then `r`.
    pub fn sample(rng: &mut DetRng, target: usize, population: usize, dim: usize) -> Self {
        let mut pick = |taken: &[usize]| loop {
            let j = rng.random_range(0..population);
            if j != target && !taken.contains(&j) {
                break j;
            }
        };
        let j1 = pick(&[]);
        let j2 = pick(&[j1]);
        let j3 = pick(&[j1, j2]);
        let l = rng.random_range(0..dim);
        let r = (0..dim).map(|_| rng.random()).collect();
        TrialDraw { j1, j2, j3, l, r }
    }
}

/// Initial population: `population_size` points drawn uniformly in the bounds.
pub fn de_init(cfg: &DeConfig, dim: usize) -> Result<Vec<Vec<f64>>> {
    cfg.validate(dim)?;
    Ok(init_population(&mut seeded(cfg.seed), cfg, dim))
}

fn init_population(rng: &mut DetRng, cfg: &DeConfig, dim: usize) -> Vec<Vec<f64>> {
    (0..cfg.population_size)
        .map(|_| uniform_point(rng, dim, &cfg.x_min, &cfg.x_max))
        .collect()
}

/// Builds the trial for member `target`: mutant `x_j1 + alpha (x_j2 - x_j3)`,
/// then binomial crossover against the target. No clamping.
pub fn de_trial(
    target: usize,
    population: &[Vec<f64>],
    cfg: &DeConfig,
    draw: &TrialDraw,
) -> Result<Vec<f64>> {
    let n = population.len();
    let idx = [target, draw.j1, draw.j2, draw.j3];
    if idx.iter().any(|&i| i >= n) {
        return Err(Error::InvalidConfig(format!(
            "trial index out of range for {n} members"
        )));
    }
    if (0..4).any(|a| (a + 1..4).any(|b| idx[a] == idx[b])) {
        return Err(Error::InvalidConfig(format!(
            "trial indices must be pairwise distinct: target {target}, draw ({}, {}, {})",
            draw.j1, draw.j2, draw.j3
        )));
    }
    let dim = population[target].len();
    if draw.l >= dim || draw.r.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: draw.r.len(),
        });
    }
    let (x1, x2, x3) = (
        &population[draw.j1],
        &population[draw.j2],
        &population[draw.j3],
    );
    Ok((0..dim)
        .map(|j| {
            if draw.r[j] <= cfg.cr || j == draw.l {
                x1[j] + cfg.alpha * (x2[j] - x3[j])
            } else {
                population[target][j]
            }
        })
        .collect())
}

/// A DE run that can be advanced one generation at a time.
pub struct DifferentialEvolution<'a, O: Objective + ?Sized> {
    objective: &'a O,
    cfg: DeConfig,
    rng: DetRng,
    population: Vec<Vec<f64>>,
    fitness: Vec<f64>,
    generation: usize,
    trace: OptimizationTrace,
}

impl<'a, O: Objective + ?Sized> DifferentialEvolution<'a, O> {
    /// Initializes and evaluates the population (reported as generation 0 on error).
    pub fn new(objective: &'a O, dim: usize, cfg: &DeConfig) -> Result<Self> {
        cfg.validate(dim)?;
        let mut rng = seeded(cfg.seed);
        let population = init_population(&mut rng, cfg, dim);
        let fitness = evaluate_all(objective, &population, cfg.parallel, 0)?;
        Ok(DifferentialEvolution {
            objective,
            cfg: cfg.clone(),
            rng,
            population,
            fitness,
            generation: 0,
            trace: OptimizationTrace::default(),
        })
    }

    pub fn population(&self) -> &[Vec<f64>] {
        &self.population
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn trace(&self) -> &OptimizationTrace {
        &self.trace
    }

    /// Index of the fittest member, lowest index on ties.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, &f) in self.fitness.iter().enumerate() {
            if f > self.fitness[best] {
                best = i;
            }
        }
        best
    }

    /// One generation: a trial per member, then one-to-one replacement where
    /// the trial wins ties.
    pub fn step(&mut self) -> Result<()> {
        let n = self.population.len();
        let dim = self.population[0].len();
        let draws: Vec<TrialDraw> = (0..n)
            .map(|i| TrialDraw::sample(&mut self.rng, i, n, dim))
            .collect();
        let trials = draws
            .iter()
            .enumerate()
            .map(|(i, d)| de_trial(i, &self.population, &self.cfg, d))
            .collect::<Result<Vec<_>>>()?;
        self.generation += 1;
        let trial_fitness =
            evaluate_all(self.objective, &trials, self.cfg.parallel, self.generation)?;
        for (i, (trial, f)) in trials.into_iter().zip(trial_fitness).enumerate() {
            if f >= self.fitness[i] {
                self.population[i] = trial;
                self.fitness[i] = f;
            }
        }
        let best = self.best_index();
        self.trace.records.push(GenerationRecord {
            generation: self.generation,
            best_fitness: self.fitness[best],
            mean_fitness: mean(&self.fitness),
            best_so_far: self.population[best].clone(),
        });
        Ok(())
    }

    pub fn into_result(self) -> OptimizationResult {
        let best = self.best_index();
        OptimizationResult {
            best_fitness: self.fitness[best],
            best: self.population[best].clone(),
            trace: self.trace,
        }
    }
}

/// Runs `cfg.generations` generations and returns the best final member.
pub fn de_optimize<O: Objective + ?Sized>(
    objective: &O,
    dim: usize,
    cfg: &DeConfig,
) -> Result<OptimizationResult> {
    let mut de = DifferentialEvolution::new(objective, dim, cfg)?;
    for _ in 0..cfg.generations {
        de.step()?;
    }
    Ok(de.into_result())
}
