//! Replication experiments over Gaussian covariance scenarios.
//!
//! Each replication draws a fresh sample on its own random stream
//! (`stream_id` = replication index), evaluates every requested
//! estimator/strategy combination on it, and the results are aggregated
//! in replication order. Output is therefore independent of the number of
//! worker threads.

mod report;
pub mod stats;

pub use report::{write_combinations_tsv, write_tsv, TSV_COLUMNS};

use serde::{Deserialize, Serialize};

use crate::coefficients::{self, CoefficientSet, Strategy};
use crate::error::{Error, Result};
use crate::estimators::{ratio_from_means, EstimatorKind, KnownMeans, SampleMeans};
use crate::exec::{self, Execution};
use crate::numerics::{
    estimate_moments, sample_gaussian, CovarianceStructure, MomentSet, RngStream, B, D, SIMULATION_MEANS,
};
use crate::variance_model;

use stats::Quantiles;

pub const DEFAULT_REPLICATIONS: usize = 10_000;

/// Built-in scenario names with their unit-diagonal off-diagonals in
/// `(ab, ac, bc, ad, bd, cd)` order.
pub const BUILTIN_SCENARIOS: [(&str, [f64; 6]); 3] = [
    ("best-case-optimal", [0.27, -0.99, -0.29, 0.95, -0.02, -0.95]),
    ("worst-case-gordon", [-0.99, 0.99, -0.99, -0.02, 0.02, -0.01]),
    ("best-case-gordon", [-0.58, -0.99, 0.57, 0.99, -0.49, -0.99]),
];

/// Where the control-variate coefficients come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientMode {
    /// Re-estimated from each replication's own sample.
    #[default]
    Plugin,
    /// Computed once from the population moments of the structure.
    Population,
}

impl std::str::FromStr for CoefficientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plugin" | "plug-in" => Ok(CoefficientMode::Plugin),
            "population" => Ok(CoefficientMode::Population),
            other => Err(Error::InvalidConfig(format!("unknown coefficient mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Combination {
    pub kind: EstimatorKind,
    pub strategy: Strategy,
}

impl Combination {
    pub const BASELINE: Combination = Combination {
        kind: EstimatorKind::McMc,
        strategy: Strategy::None,
    };

    /// Whether the strategy is meaningful for this estimator kind.
    pub fn is_supported(self) -> bool {
        use EstimatorKind::*;
        match self.kind {
            McMc => self.strategy == Strategy::None,
            CvMc | AcvMc => matches!(self.strategy, Strategy::Classical | Strategy::NumeratorOnly),
            CvCv | AcvAcv => matches!(
                self.strategy,
                Strategy::Classical | Strategy::Gordon | Strategy::Optimal | Strategy::LinearCv
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub structure: CovarianceStructure,
    pub n: usize,
    /// Extra `(B, D)` draws for the approximate-CV kinds.
    pub m: usize,
    pub replications: usize,
    pub strategies: Vec<Strategy>,
    pub estimator_kinds: Vec<EstimatorKind>,
    #[serde(default)]
    pub coefficient_mode: CoefficientMode,
}

impl Scenario {
    /// Scenario with the default strategies and the estimator kinds that
    /// make sense for `m`.
    pub fn new(name: impl Into<String>, structure: CovarianceStructure, n: usize, m: usize) -> Self {
        let mut kinds = vec![EstimatorKind::McMc, EstimatorKind::CvMc, EstimatorKind::CvCv];
        if m > 0 {
            kinds.extend([EstimatorKind::AcvMc, EstimatorKind::AcvAcv]);
        }
        Self {
            name: name.into(),
            structure,
            n,
            m,
            replications: DEFAULT_REPLICATIONS,
            strategies: vec![
                Strategy::Classical,
                Strategy::Gordon,
                Strategy::Optimal,
                Strategy::NumeratorOnly,
            ],
            estimator_kinds: kinds,
            coefficient_mode: CoefficientMode::Plugin,
        }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let (_, off) = BUILTIN_SCENARIOS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| {
                let known: Vec<&str> = BUILTIN_SCENARIOS.iter().map(|(n, _)| *n).collect();
                Error::InvalidConfig(format!("unknown scenario `{name}` (known: {})", known.join(", ")))
            })?;
        let structure = CovarianceStructure::unit_diagonal(SIMULATION_MEANS, off)?;
        Ok(Self::new(name, structure, 100, 0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::InsufficientSamples { needed: 2, got: self.n });
        }
        self.structure.check_positive_definite()?;
        Ok(())
    }

    /// The MC/MC baseline followed by every supported requested pair, in
    /// kind-then-strategy order.
    pub fn combinations(&self) -> Vec<Combination> {
        let mut kinds = self.estimator_kinds.clone();
        kinds.sort();
        kinds.dedup();
        let mut strategies = self.strategies.clone();
        strategies.sort();
        strategies.dedup();
        let mut out = vec![Combination::BASELINE];
        for &kind in &kinds {
            for &strategy in &strategies {
                let c = Combination { kind, strategy };
                if c != Combination::BASELINE && c.is_supported() {
                    out.push(c);
                }
            }
        }
        out
    }

    fn known_means(&self) -> KnownMeans {
        let mu = self.structure.mu();
        KnownMeans { b: mu[B], d: mu[D] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinationSummary {
    pub kind: EstimatorKind,
    pub strategy: Strategy,
    pub successful: usize,
    pub failed_replications: usize,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub quantiles: Option<Quantiles>,
    pub rvr_vs_mc_mc: Option<f64>,
    /// Standard error of the RVR from the paired variance gap.
    pub rvr_std_error: Option<f64>,
}

/// `rvr(first) − rvr(second)` for two strategies sharing an estimator kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RvrComparison {
    pub kind: EstimatorKind,
    pub first: Strategy,
    pub second: Strategy,
    pub rvr_difference: f64,
    pub std_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub scenario: String,
    pub n: usize,
    pub m: usize,
    pub replications: usize,
    pub seed: u64,
    pub coefficient_mode: CoefficientMode,
    pub true_ratio: f64,
    pub combinations: Vec<CombinationSummary>,
    pub comparisons: Vec<RvrComparison>,
}

impl ReplicationSummary {
    pub fn get(&self, kind: EstimatorKind, strategy: Strategy) -> Option<&CombinationSummary> {
        self.combinations
            .iter()
            .find(|c| c.kind == kind && c.strategy == strategy)
    }

    pub fn comparison(&self, kind: EstimatorKind, first: Strategy, second: Strategy) -> Option<&RvrComparison> {
        self.comparisons
            .iter()
            .find(|c| c.kind == kind && c.first == first && c.second == second)
    }
}

/// `(var_base − var_new) / var_base`.
pub fn rvr(var_base: f64, var_new: f64) -> Result<f64> {
    if !(var_base > 0.0) {
        return Err(Error::ZeroBaseVariance);
    }
    Ok((var_base - var_new) / var_base)
}

pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<ReplicationSummary> {
    run_scenario_with(scenario, seed, Execution::default())
}

pub fn run_scenario_with(scenario: &Scenario, seed: u64, exec: Execution) -> Result<ReplicationSummary> {
    let outcomes = replicate(scenario, seed, exec)?;
    summarize(scenario, seed, &outcomes)
}

/// Per-replication values in replication order, one slot per combination
/// (`None` when that combination failed in that replication).
pub fn replicate(scenario: &Scenario, seed: u64, exec: Execution) -> Result<Vec<Vec<Option<f64>>>> {
    scenario.validate()?;
    let combos = scenario.combinations();
    let mut strategies: Vec<Strategy> = combos.iter().map(|c| c.strategy).collect();
    strategies.sort();
    strategies.dedup();
    let population: Option<Vec<Option<CoefficientSet>>> = match scenario.coefficient_mode {
        CoefficientMode::Population => {
            let m = scenario.structure.moments();
            Some(strategies.iter().map(|&s| coefficients::for_strategy(&m, s).ok()).collect())
        }
        CoefficientMode::Plugin => None,
    };
    let known = scenario.known_means();

    let rows = exec::map_indexed(scenario.replications, exec, |i| {
        let mut rng = RngStream::new(seed, i as u64);
        let failed = || vec![None; combos.len()];
        let Ok(sample) = sample_gaussian(&scenario.structure, scenario.n, scenario.m, &mut rng) else {
            return failed();
        };
        let Ok(means) = SampleMeans::of(&sample) else {
            return failed();
        };
        let coeffs: Vec<Option<CoefficientSet>> = match &population {
            Some(p) => p.clone(),
            None => match estimate_moments(&sample) {
                Ok(m) => strategies.iter().map(|&s| coefficients::for_strategy(&m, s).ok()).collect(),
                Err(_) => return failed(),
            },
        };
        combos
            .iter()
            .map(|c| {
                let idx = strategies.binary_search(&c.strategy).expect("strategy listed");
                let set = coeffs[idx]?;
                ratio_from_means(&means, &set, c.kind, Some(known)).ok()
            })
            .collect()
    });
    Ok(rows)
}

fn column(outcomes: &[Vec<Option<f64>>], k: usize) -> Vec<f64> {
    outcomes.iter().filter_map(|row| row[k]).collect()
}

fn paired_columns(outcomes: &[Vec<Option<f64>>], i: usize, j: usize) -> (Vec<f64>, Vec<f64>) {
    outcomes
        .iter()
        .filter_map(|row| Some((row[i]?, row[j]?)))
        .unzip()
}

pub fn summarize(scenario: &Scenario, seed: u64, outcomes: &[Vec<Option<f64>>]) -> Result<ReplicationSummary> {
    let (combinations, comparisons) = aggregate(&scenario.combinations(), outcomes)?;
    Ok(ReplicationSummary {
        scenario: scenario.name.clone(),
        n: scenario.n,
        m: scenario.m,
        replications: scenario.replications,
        seed,
        coefficient_mode: scenario.coefficient_mode,
        true_ratio: scenario.structure.ratio(),
        combinations,
        comparisons,
    })
}

/// Per-combination statistics and same-kind RVR comparisons. `combos[0]`
/// must be the MC/MC baseline.
pub(crate) fn aggregate(
    combos: &[Combination],
    outcomes: &[Vec<Option<f64>>],
) -> Result<(Vec<CombinationSummary>, Vec<RvrComparison>)> {
    debug_assert_eq!(combos.first(), Some(&Combination::BASELINE));
    let base = column(outcomes, 0);
    if base.is_empty() {
        return Err(Error::AllReplicationsFailed {
            replications: outcomes.len(),
        });
    }
    let base_var = stats::sample_variance(&base).filter(|b| *b > 0.0);

    let mut summaries = Vec::with_capacity(combos.len());
    let mut variances = Vec::with_capacity(combos.len());
    for (k, c) in combos.iter().enumerate() {
        let values = column(outcomes, k);
        let variance = stats::sample_variance(&values);
        variances.push(variance);
        let (rvr_value, rvr_se) = match (base_var, variance) {
            (Some(b), Some(v)) => {
                let (x, y) = paired_columns(outcomes, 0, k);
                let se = if k == 0 {
                    Some(0.0)
                } else {
                    stats::variance_gap_std_error(&x, &y).map(|se| se / b)
                };
                (rvr(b, v).ok(), se)
            }
            _ => (None, None),
        };
        summaries.push(CombinationSummary {
            kind: c.kind,
            strategy: c.strategy,
            successful: values.len(),
            failed_replications: outcomes.len() - values.len(),
            mean: stats::mean(&values),
            variance,
            quantiles: Quantiles::of(&values),
            rvr_vs_mc_mc: rvr_value,
            rvr_std_error: rvr_se,
        });
    }

    let mut comparisons = Vec::new();
    if let Some(b) = base_var {
        for i in 1..combos.len() {
            for j in 1..combos.len() {
                if i == j || combos[i].kind != combos[j].kind {
                    continue;
                }
                let (Some(vi), Some(vj)) = (variances[i], variances[j]) else {
                    continue;
                };
                let (x, y) = paired_columns(outcomes, j, i);
                comparisons.push(RvrComparison {
                    kind: combos[i].kind,
                    first: combos[i].strategy,
                    second: combos[j].strategy,
                    rvr_difference: (vj - vi) / b,
                    std_error: stats::variance_gap_std_error(&x, &y).map(|se| se / b),
                });
            }
        }
    }
    Ok((summaries, comparisons))
}

/// Delta-method prediction next to the empirical variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub kind: EstimatorKind,
    pub strategy: Strategy,
    pub predicted_variance: Option<f64>,
    pub empirical_variance: Option<f64>,
    /// `|empirical − predicted| / predicted`.
    pub relative_gap: Option<f64>,
}

/// Population-moment variance of one combination.
pub fn predicted_variance(moments: &MomentSet, combo: Combination, n: usize, m: usize) -> Result<f64> {
    let coeffs = coefficients::for_strategy(moments, combo.strategy)?;
    let alpha = if combo.kind.controls_numerator() { coeffs.alpha } else { 0.0 };
    let beta = if combo.kind.controls_denominator() { coeffs.beta } else { 0.0 };
    let exact = variance_model::var_cv_cv(moments, alpha, beta, n)?;
    if combo.kind.is_approximate() {
        let base = variance_model::var_mc_mc(moments, n)?;
        Ok(base + variance_model::acv_scaling(exact - base, n, m))
    } else {
        Ok(exact)
    }
}

pub fn predicted_vs_empirical(scenario: &Scenario, summary: &ReplicationSummary) -> Vec<PredictionRow> {
    let moments = scenario.structure.moments();
    summary
        .combinations
        .iter()
        .map(|c| {
            let combo = Combination {
                kind: c.kind,
                strategy: c.strategy,
            };
            let predicted = predicted_variance(&moments, combo, scenario.n, scenario.m).ok();
            let relative_gap = match (predicted, c.variance) {
                (Some(p), Some(e)) if p > 0.0 => Some((e - p).abs() / p),
                _ => None,
            };
            PredictionRow {
                kind: c.kind,
                strategy: c.strategy,
                predicted_variance: predicted,
                empirical_variance: c.variance,
                relative_gap,
            }
        })
        .collect()
}
