//! Differential-evolution search over unit-diagonal covariance structures
//! for the best or worst case of a coefficient strategy.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::Strategy;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::numerics::{unit_diagonal_matrix, CovarianceStructure, Matrix4, RngStream, SIMULATION_MEANS};
use crate::variance_model;

/// Six off-diagonal correlations in `(ab, ac, bc, ad, bd, cd)` order.
pub type Candidate = [f64; 6];

pub const DEFAULT_BOUND: f64 = 0.995;
/// Redraws allowed per initial member before it is kept infeasible.
pub const MAX_INITIAL_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Look for the structure where the strategy reduces variance most.
    MaximizeReduction,
    /// Look for the structure where it reduces least (or increases most).
    MinimizeReduction,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::MaximizeReduction => "maximize_reduction",
            Objective::MinimizeReduction => "minimize_reduction",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "maximize" | "max" | "maximize_reduction" => Ok(Objective::MaximizeReduction),
            "minimize" | "min" | "minimize_reduction" => Ok(Objective::MinimizeReduction),
            other => Err(Error::InvalidConfig(format!("unknown objective `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchProblem {
    pub objective: Objective,
    pub strategy: Strategy,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
    pub mu: [f64; 4],
}

impl SearchProblem {
    pub fn new(objective: Objective, strategy: Strategy) -> Self {
        Self {
            objective,
            strategy,
            lower: -DEFAULT_BOUND,
            upper: DEFAULT_BOUND,
            n: 100,
            mu: SIMULATION_MEANS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower > -1.0 && self.upper < 1.0 && self.lower < self.upper) {
            return Err(Error::InvalidConfig(format!(
                "bounds [{}, {}] must be an interval inside (-1, 1)",
                self.lower, self.upper
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.mu[2] == 0.0 {
            return Err(Error::DegenerateDenominator);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DEConfig {
    pub population_size: usize,
    pub weight_f: f64,
    pub crossover_cr: f64,
    pub generations: usize,
    pub seed: u64,
}

impl Default for DEConfig {
    fn default() -> Self {
        Self {
            population_size: 40,
            weight_f: 0.7,
            crossover_cr: 0.9,
            generations: 200,
            seed: 0,
        }
    }
}

impl DEConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::InvalidConfig("population_size must be at least 4".into()));
        }
        if !(self.weight_f > 0.0 && self.weight_f < 2.0) {
            return Err(Error::InvalidConfig("weight_f must lie in (0, 2)".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_cr) {
            return Err(Error::InvalidConfig("crossover_cr must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub candidate: Candidate,
    pub sigma: Matrix4,
    pub objective: f64,
    /// Best objective of the initial population followed by the best after
    /// each generation.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

/// Variance difference of `problem.strategy` at the candidate, sign-adjusted
/// so that lower is better. Infeasible (non-PD) candidates and structures
/// where the strategy is undefined score `+inf`.
pub fn objective_value(candidate: &Candidate, problem: &SearchProblem) -> f64 {
    let Ok(structure) = CovarianceStructure::unit_diagonal(problem.mu, candidate) else {
        return f64::INFINITY;
    };
    if structure.check_positive_definite().is_err() {
        return f64::INFINITY;
    }
    match variance_model::variance_difference(&structure.moments(), problem.strategy, problem.n) {
        Ok(b) if b.difference.is_finite() => match problem.objective {
            Objective::MaximizeReduction => b.difference,
            Objective::MinimizeReduction => -b.difference,
        },
        _ => f64::INFINITY,
    }
}

fn uniform_candidate(rng: &mut RngStream, lo: f64, hi: f64) -> Candidate {
    std::array::from_fn(|_| rng.random_range(lo..hi))
}

pub fn differential_evolution(problem: &SearchProblem, config: &DEConfig) -> Result<SearchResult> {
    differential_evolution_with(problem, config, Execution::default())
}

/// Uniform initial population; infeasible members are redrawn up to
/// [`MAX_INITIAL_ATTEMPTS`] times each.
pub fn differential_evolution_with(
    problem: &SearchProblem,
    config: &DEConfig,
    exec: Execution,
) -> Result<SearchResult> {
    problem.validate()?;
    config.validate()?;
    let mut rng = RngStream::new(config.seed, 0);
    let mut evaluations = 0;
    let mut population = Vec::with_capacity(config.population_size);
    let mut scores = Vec::with_capacity(config.population_size);
    for _ in 0..config.population_size {
        let mut x = uniform_candidate(&mut rng, problem.lower, problem.upper);
        let mut f = objective_value(&x, problem);
        evaluations += 1;
        let mut attempts = 1;
        while !f.is_finite() && attempts < MAX_INITIAL_ATTEMPTS {
            x = uniform_candidate(&mut rng, problem.lower, problem.upper);
            f = objective_value(&x, problem);
            evaluations += 1;
            attempts += 1;
        }
        population.push(x);
        scores.push(f);
    }
    evolve(problem, config, exec, population, scores, evaluations, rng)
}

/// Runs the generations from a caller-supplied population.
pub fn differential_evolution_from(
    problem: &SearchProblem,
    config: &DEConfig,
    initial: Vec<Candidate>,
    exec: Execution,
) -> Result<SearchResult> {
    problem.validate()?;
    config.validate()?;
    if initial.len() != config.population_size {
        return Err(Error::InvalidConfig(format!(
            "initial population has {} members, config expects {}",
            initial.len(),
            config.population_size
        )));
    }
    let scores = exec::map_slice(&initial, exec, |x| objective_value(x, problem));
    let evaluations = initial.len();
    let rng = RngStream::new(config.seed, 0);
    evolve(problem, config, exec, initial, scores, evaluations, rng)
}

/// Out-of-range coordinates land halfway between the parent and the violated
/// bound. Plain clipping parks members on the box corners, which are
/// near-singular structures the search then cannot leave.
fn repair(v: f64, parent: f64, lo: f64, hi: f64) -> f64 {
    if v > hi {
        0.5 * (parent + hi)
    } else if v < lo {
        0.5 * (parent + lo)
    } else {
        v
    }
}

fn best_index(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = i;
        }
    }
    best
}

fn evolve(
    problem: &SearchProblem,
    config: &DEConfig,
    exec: Execution,
    mut population: Vec<Candidate>,
    mut scores: Vec<f64>,
    mut evaluations: usize,
    mut rng: RngStream,
) -> Result<SearchResult> {
    if scores.iter().all(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig(
            "no positive-definite member found in the initial population".into(),
        ));
    }
    let np = population.len();
    let mut trace = Vec::with_capacity(config.generations + 1);
    trace.push(scores[best_index(&scores)]);

    for _ in 0..config.generations {
        // Trial vectors are built sequentially from one stream, scored in
        // parallel, then selected synchronously.
        let trials: Vec<Candidate> = (0..np)
            .map(|i| {
                let pick = |rng: &mut RngStream, taken: &[usize]| loop {
                    let r = rng.random_range(0..np);
                    if !taken.contains(&r) {
                        break r;
                    }
                };
                let r1 = pick(&mut rng, &[i]);
                let r2 = pick(&mut rng, &[i, r1]);
                let r3 = pick(&mut rng, &[i, r1, r2]);
                let forced = rng.random_range(0..6);
                let mut trial = population[i];
                for j in 0..6 {
                    if j == forced || rng.random::<f64>() < config.crossover_cr {
                        let v = population[r1][j] + config.weight_f * (population[r2][j] - population[r3][j]);
                        trial[j] = repair(v, population[i][j], problem.lower, problem.upper);
                    }
                }
                trial
            })
            .collect();
        let trial_scores = exec::map_slice(&trials, exec, |x| objective_value(x, problem));
        evaluations += np;
        for i in 0..np {
            if trial_scores[i] < scores[i] {
                population[i] = trials[i];
                scores[i] = trial_scores[i];
            }
        }
        trace.push(scores[best_index(&scores)]);
    }

    let best = best_index(&scores);
    Ok(SearchResult {
        candidate: population[best],
        sigma: unit_diagonal_matrix(&population[best]),
        objective: scores[best],
        trace,
        evaluations,
    })
}
