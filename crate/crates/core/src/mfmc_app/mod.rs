//! Multi-fidelity application: paired high/low-fidelity samples of a
//! numerator and a denominator quantity, and the subsampling bootstrap that
//! compares coefficient strategies for the approximate-CV ratio estimator.
//!
//! Mapping: `A` = HF numerator, `C` = HF denominator, `B` and `D` their
//! low-fidelity counterparts.

mod io;

pub use io::{detect_delimiter, load_dataset, parse_dataset, write_dataset, ColumnSchema};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::{self, CoefficientSet, Strategy};
use crate::error::{Error, Result};
use crate::estimators::{ratio_from_means, EstimatorKind, SampleMeans};
use crate::exec::{self, Execution};
use crate::numerics::{
    cholesky, correlation_matrix, estimate_moments, sample_gaussian, unit_diagonal_matrix, CovarianceStructure,
    JointSample, Matrix4, RngStream, B, D,
};
use crate::simulation::{self, Combination, CombinationSummary, RvrComparison};

/// Smallest dataset accepted: two paired rows for moments plus extras.
pub const MIN_ROWS: usize = 4;

/// Reference HF/LF correlations in `(ab, ac, bc, ad, bd, cd)`
/// order.
pub const PAPER_CORRELATION: [f64; 6] = [0.51, 0.77, 0.4, 0.83, 0.78, 0.74];

/// Stand-in magnitudes for `(A, B, C, D)`: a ~1.5 t component mass against
/// a ~60 t total, HF coefficient of variation 7% vs 5%.
pub const SYNTHETIC_MEANS: [f64; 4] = [1500.0, 1450.0, 60000.0, 58000.0];
pub const SYNTHETIC_SCALES: [f64; 4] = [105.0, 100.0, 3000.0, 2900.0];

pub fn paper_correlation_matrix() -> Matrix4 {
    unit_diagonal_matrix(&PAPER_CORRELATION)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub hf_numerator: f64,
    pub hf_denominator: f64,
    pub lf_numerator: f64,
    pub lf_denominator: f64,
}

impl FidelityRow {
    pub fn from_abcd(v: [f64; 4]) -> Self {
        Self {
            hf_numerator: v[0],
            lf_numerator: v[1],
            hf_denominator: v[2],
            lf_denominator: v[3],
        }
    }

    pub fn abcd(&self) -> [f64; 4] {
        [self.hf_numerator, self.lf_numerator, self.hf_denominator, self.lf_denominator]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelityDataset {
    pub rows: Vec<FidelityRow>,
    pub source_path: Option<String>,
}

impl FidelityDataset {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn as_sample(&self) -> JointSample {
        JointSample::new(self.rows.iter().map(FidelityRow::abcd).collect(), vec![])
    }

    /// Correlation matrix of all rows, `(A, B, C, D)` order.
    pub fn correlation(&self) -> Result<Matrix4> {
        correlation_matrix(&estimate_moments(&self.as_sample())?)
    }
}

/// Gaussian rows with the given correlation, means and standard deviations.
pub fn synthesize_dataset(
    correlation: &Matrix4,
    means: [f64; 4],
    scales: [f64; 4],
    rows: usize,
    seed: u64,
) -> Result<FidelityDataset> {
    cholesky(correlation)?;
    if scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidConfig("scales must be positive".into()));
    }
    let mut sigma = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            sigma[i][j] = correlation[i][j] * (scales[i] * scales[j]);
        }
    }
    let structure = CovarianceStructure::new(means, sigma)?;
    let mut rng = RngStream::new(seed, 0);
    let sample = sample_gaussian(&structure, rows, 0, &mut rng)?;
    Ok(FidelityDataset {
        rows: sample.paired.into_iter().map(FidelityRow::from_abcd).collect(),
        source_path: None,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    /// Draw the paired rows with replacement (sensitivity check).
    pub with_replacement: bool,
    /// Permit `n = row_count`, leaving no extra rows.
    pub allow_full: bool,
}

/// Combinations evaluated per configuration, baseline first.
pub const BOOTSTRAP_COMBINATIONS: [Combination; 6] = [
    Combination::BASELINE,
    Combination {
        kind: EstimatorKind::AcvMc,
        strategy: Strategy::Classical,
    },
    Combination {
        kind: EstimatorKind::AcvMc,
        strategy: Strategy::NumeratorOnly,
    },
    Combination {
        kind: EstimatorKind::AcvAcv,
        strategy: Strategy::Classical,
    },
    Combination {
        kind: EstimatorKind::AcvAcv,
        strategy: Strategy::Gordon,
    },
    Combination {
        kind: EstimatorKind::AcvAcv,
        strategy: Strategy::Optimal,
    },
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub row_count: usize,
    pub n: usize,
    /// Rows outside each paired set; they only feed the LF means.
    pub m: usize,
    pub configurations: usize,
    pub seed: u64,
    pub options: BootstrapOptions,
    pub correlation: Matrix4,
    /// Set when a single configuration leaves variances undefined.
    pub variance_undefined: bool,
    pub combinations: Vec<CombinationSummary>,
    pub comparisons: Vec<RvrComparison>,
}

impl BootstrapReport {
    pub fn get(&self, kind: EstimatorKind, strategy: Strategy) -> Option<&CombinationSummary> {
        self.combinations
            .iter()
            .find(|c| c.kind == kind && c.strategy == strategy)
    }
}

/// Paired row indices of configuration `config`.
pub fn configuration_indices(rows: usize, n: usize, seed: u64, config: usize, with_replacement: bool) -> Vec<usize> {
    let mut rng = RngStream::new(seed, config as u64);
    if with_replacement {
        (0..n).map(|_| rng.random_range(0..rows)).collect()
    } else {
        index::sample(&mut rng, rows, n).into_vec()
    }
}

/// Estimates from one configuration, in [`BOOTSTRAP_COMBINATIONS`] order.
pub fn evaluate_configuration(dataset: &FidelityDataset, indices: &[usize], full_lf_means: Option<(f64, f64)>) -> Vec<Option<f64>> {
    let mut chosen = vec![false; dataset.row_count()];
    for &i in indices {
        chosen[i] = true;
    }
    let paired: Vec<[f64; 4]> = indices.iter().map(|&i| dataset.rows[i].abcd()).collect();
    let extra: Vec<[f64; 2]> = dataset
        .rows
        .iter()
        .zip(&chosen)
        .filter(|(_, c)| !**c)
        .map(|(r, _)| [r.lf_numerator, r.lf_denominator])
        .collect();
    let sample = JointSample::new(paired, extra);
    let failed = vec![None; BOOTSTRAP_COMBINATIONS.len()];
    let Ok(mut means) = SampleMeans::of(&sample) else {
        return failed;
    };
    if let Some((b, d)) = full_lf_means {
        means.pooled_b = b;
        means.pooled_d = d;
    }
    let Ok(moments) = estimate_moments(&sample) else {
        return failed;
    };
    BOOTSTRAP_COMBINATIONS
        .iter()
        .map(|c| {
            let coeffs: CoefficientSet = coefficients::for_strategy(&moments, c.strategy).ok()?;
            ratio_from_means(&means, &coeffs, c.kind, None).ok()
        })
        .collect()
}

pub fn bootstrap_experiment(
    dataset: &FidelityDataset,
    n: usize,
    configurations: usize,
    seed: u64,
    options: BootstrapOptions,
) -> Result<BootstrapReport> {
    bootstrap_experiment_with(dataset, n, configurations, seed, options, Execution::default())
}

/// Each configuration draws `n` paired rows on its own stream; the LF means
/// always cover every row of the dataset.
pub fn bootstrap_experiment_with(
    dataset: &FidelityDataset,
    n: usize,
    configurations: usize,
    seed: u64,
    options: BootstrapOptions,
    exec: Execution,
) -> Result<BootstrapReport> {
    let rows = dataset.row_count();
    let too_many = if options.allow_full { n > rows } else { n >= rows };
    if too_many || n < 2 {
        return Err(Error::InsufficientRows {
            requested: n,
            available: rows,
        });
    }
    if configurations == 0 {
        return Err(Error::InvalidConfig("configurations must be at least 1".into()));
    }
    let full = dataset.as_sample();
    let correlation = correlation_matrix(&estimate_moments(&full)?)?;
    let full_lf_means = options.with_replacement.then(|| {
        let k = rows as f64;
        let b = full.paired.iter().map(|r| r[B]).sum::<f64>() / k;
        let d = full.paired.iter().map(|r| r[D]).sum::<f64>() / k;
        (b, d)
    });

    let outcomes = exec::map_indexed(configurations, exec, |c| {
        let idx = configuration_indices(rows, n, seed, c, options.with_replacement);
        evaluate_configuration(dataset, &idx, full_lf_means)
    });
    let (combinations, comparisons) = simulation::aggregate(&BOOTSTRAP_COMBINATIONS, &outcomes)?;
    Ok(BootstrapReport {
        row_count: rows,
        n,
        m: rows - n,
        configurations,
        seed,
        options,
        correlation,
        variance_undefined: configurations < 2,
        combinations,
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> FidelityDataset {
        FidelityDataset {
            rows: [
                [1.0, 2.0, 10.0, 20.0],
                [2.0, 1.0, 12.0, 21.0],
                [3.0, 4.0, 11.0, 25.0],
                [4.0, 3.0, 15.0, 22.0],
                [2.5, 2.0, 13.0, 24.0],
                [1.5, 2.5, 14.0, 23.0],
            ]
            .into_iter()
            .map(FidelityRow::from_abcd)
            .collect(),
            source_path: None,
        }
    }

    #[test]
    fn indices_are_distinct_without_replacement() {
        let idx = configuration_indices(50, 20, 9, 3, false);
        let mut s = idx.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 20);
        assert_eq!(idx, configuration_indices(50, 20, 9, 3, false));
    }

    #[test]
    fn full_paired_set_collapses_to_mc() {
        let ds = toy();
        let report = bootstrap_experiment(
            &ds,
            6,
            3,
            1,
            BootstrapOptions {
                allow_full: true,
                ..Default::default()
            },
        )
        .unwrap();
        let base = report.get(EstimatorKind::McMc, Strategy::None).unwrap().mean;
        for c in &report.combinations {
            assert_eq!(c.mean, base, "{:?}", c);
        }
        assert!(matches!(
            bootstrap_experiment(&ds, 6, 3, 1, BootstrapOptions::default()),
            Err(Error::InsufficientRows { .. })
        ));
    }

    #[test]
    fn single_configuration_flags_variance() {
        let r = bootstrap_experiment(&toy(), 4, 1, 2, BootstrapOptions::default()).unwrap();
        assert!(r.variance_undefined);
        assert!(r.combinations.iter().all(|c| c.variance.is_none() && c.successful == 1));
    }

    #[test]
    fn synthesize_is_deterministic() {
        let corr = paper_correlation_matrix();
        let a = synthesize_dataset(&corr, SYNTHETIC_MEANS, SYNTHETIC_SCALES, 30, 9).unwrap();
        let b = synthesize_dataset(&corr, SYNTHETIC_MEANS, SYNTHETIC_SCALES, 30, 9).unwrap();
        assert_eq!(a, b);
        let bad = unit_diagonal_matrix(&[0.99, 0.99, -0.99, 0.0, 0.0, 0.0]);
        assert!(matches!(
            synthesize_dataset(&bad, SYNTHETIC_MEANS, SYNTHETIC_SCALES, 30, 9),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
