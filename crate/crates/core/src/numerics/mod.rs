//! Numerical substrate: random streams, 4×4 Cholesky, Gaussian sampling of
//! `(A, B, C, D)` and sample-moment estimation.

mod linalg;
mod rng;

pub use linalg::{cholesky, is_positive_definite, lower_times_transpose, Matrix4, IDENTITY, PIVOT_TOLERANCE};
pub use rng::RngStream;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column indices of the four modelled variables.
pub const A: usize = 0;
pub const B: usize = 1;
pub const C: usize = 2;
pub const D: usize = 3;

pub const VARIABLE_NAMES: [&str; 4] = ["A", "B", "C", "D"];

/// Off-diagonal positions in lower-triangle row order:
/// `(B,A), (C,A), (C,B), (D,A), (D,B), (D,C)`.
pub const OFF_DIAGONAL: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

/// Builds a symmetric unit-diagonal matrix from its six lower off-diagonals
/// in [`OFF_DIAGONAL`] order.
pub fn unit_diagonal_matrix(off: &[f64; 6]) -> Matrix4 {
    let mut m = IDENTITY;
    for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
        m[i][j] = off[k];
        m[j][i] = off[k];
    }
    m
}

fn packed_index(i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

/// Mean vector and covariance of `(A, B, C, D)`.
///
/// The covariance is stored as its packed lower triangle and mirrored on
/// read, so it is symmetric by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StructureFile", into = "StructureFile")]
pub struct CovarianceStructure {
    mu: [f64; 4],
    lower: [f64; 10],
}

/// On-disk form: `{"mu": [4], "sigma": [[4×4]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StructureFile {
    pub mu: [f64; 4],
    pub sigma: Matrix4,
}

impl TryFrom<StructureFile> for CovarianceStructure {
    type Error = Error;

    fn try_from(f: StructureFile) -> Result<Self> {
        CovarianceStructure::new(f.mu, f.sigma)
    }
}

impl From<CovarianceStructure> for StructureFile {
    fn from(s: CovarianceStructure) -> Self {
        StructureFile {
            mu: s.mu,
            sigma: s.sigma(),
        }
    }
}

impl CovarianceStructure {
    /// Requires an exactly symmetric `sigma`, finite entries and `mu[C] != 0`.
    /// Positive definiteness is checked separately by [`Self::check_positive_definite`].
    pub fn new(mu: [f64; 4], sigma: Matrix4) -> Result<Self> {
        let mut lower = [0.0; 10];
        for i in 0..4 {
            for j in 0..=i {
                if sigma[i][j] != sigma[j][i] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
                lower[packed_index(i, j)] = sigma[i][j];
            }
        }
        if mu.iter().chain(lower.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("structure contains non-finite values".into()));
        }
        if mu[C] == 0.0 {
            return Err(Error::DegenerateDenominator);
        }
        Ok(Self { mu, lower })
    }

    /// Unit variances with the given off-diagonal correlations.
    pub fn unit_diagonal(mu: [f64; 4], off: &[f64; 6]) -> Result<Self> {
        Self::new(mu, unit_diagonal_matrix(off))
    }

    pub fn mu(&self) -> [f64; 4] {
        self.mu
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.lower[packed_index(i, j)]
    }

    pub fn sigma(&self) -> Matrix4 {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.cov(i, j);
            }
        }
        m
    }

    pub fn off_diagonal(&self) -> [f64; 6] {
        OFF_DIAGONAL.map(|(i, j)| self.cov(i, j))
    }

    pub fn check_positive_definite(&self) -> Result<Matrix4> {
        cholesky(&self.sigma())
    }

    pub fn ratio(&self) -> f64 {
        self.mu[A] / self.mu[C]
    }

    /// Population moments, for analysis mode.
    pub fn moments(&self) -> MomentSet {
        MomentSet::from_covariance(&self.sigma(), self.mu[A], self.mu[C])
            .expect("mu[C] != 0 is a construction invariant")
    }
}

/// Scalar moments consumed by every coefficient and variance formula.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub var_a: f64,
    pub var_b: f64,
    pub var_c: f64,
    pub var_d: f64,
    pub cov_ab: f64,
    pub cov_ac: f64,
    pub cov_ad: f64,
    pub cov_bc: f64,
    pub cov_bd: f64,
    pub cov_cd: f64,
    pub mean_a: f64,
    pub mean_c: f64,
    /// `mean_a / mean_c`.
    pub r: f64,
}

impl MomentSet {
    pub fn from_covariance(cov: &Matrix4, mean_a: f64, mean_c: f64) -> Result<Self> {
        if mean_c == 0.0 {
            return Err(Error::DegenerateDenominator);
        }
        Ok(Self {
            var_a: cov[A][A],
            var_b: cov[B][B],
            var_c: cov[C][C],
            var_d: cov[D][D],
            cov_ab: cov[A][B],
            cov_ac: cov[A][C],
            cov_ad: cov[A][D],
            cov_bc: cov[B][C],
            cov_bd: cov[B][D],
            cov_cd: cov[C][D],
            mean_a,
            mean_c,
            r: mean_a / mean_c,
        })
    }

    pub fn covariance_matrix(&self) -> Matrix4 {
        [
            [self.var_a, self.cov_ab, self.cov_ac, self.cov_ad],
            [self.cov_ab, self.var_b, self.cov_bc, self.cov_bd],
            [self.cov_ac, self.cov_bc, self.var_c, self.cov_cd],
            [self.cov_ad, self.cov_bd, self.cov_cd, self.var_d],
        ]
    }

    /// Correlation of the two control variates, `NaN` if either variance is zero.
    pub fn corr_bd(&self) -> f64 {
        self.cov_bd / (self.var_b * self.var_d).sqrt()
    }

    /// Same moments with `r` replaced, for callers plugging in a different
    /// ratio estimate.
    pub fn with_ratio(mut self, r: f64) -> Self {
        self.r = r;
        self
    }
}

/// `n` paired draws of `(a, b, c, d)` plus `m` extra draws of `(b, d)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JointSample {
    pub paired: Vec<[f64; 4]>,
    pub extra: Vec<[f64; 2]>,
}

impl JointSample {
    pub fn new(paired: Vec<[f64; 4]>, extra: Vec<[f64; 2]>) -> Self {
        Self { paired, extra }
    }

    pub fn n(&self) -> usize {
        self.paired.len()
    }

    pub fn m(&self) -> usize {
        self.extra.len()
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.paired.iter().map(|row| row[idx]).collect()
    }
}

/// Draws `n` i.i.d. rows of `N(mu, sigma)` and `m` independent `(B, D)` rows.
///
/// Extra rows are full draws with only the `B` and `D` components kept,
/// which samples the `(B, D)` marginal exactly.
pub fn sample_gaussian(
    structure: &CovarianceStructure,
    n: usize,
    m: usize,
    rng: &mut RngStream,
) -> Result<JointSample> {
    if n == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let l = structure.check_positive_definite()?;
    let mu = structure.mu();
    let draw = |rng: &mut RngStream| {
        let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let mut x = mu;
        for i in 0..4 {
            for k in 0..=i {
                x[i] += l[i][k] * z[k];
            }
        }
        x
    };
    let paired = (0..n).map(|_| draw(rng)).collect();
    let extra = (0..m)
        .map(|_| {
            let x = draw(rng);
            [x[B], x[D]]
        })
        .collect();
    Ok(JointSample { paired, extra })
}

/// Sample means and unbiased (1/(n−1)) covariances of the paired rows.
pub fn estimate_moments(sample: &JointSample) -> Result<MomentSet> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mut mean = [0.0; 4];
    for row in &sample.paired {
        for k in 0..4 {
            mean[k] += row[k];
        }
    }
    for v in &mut mean {
        *v /= nf;
    }
    let mut cov = [[0.0; 4]; 4];
    for row in &sample.paired {
        let dev: [f64; 4] = std::array::from_fn(|k| row[k] - mean[k]);
        for i in 0..4 {
            for j in 0..=i {
                cov[i][j] += dev[i] * dev[j];
            }
        }
    }
    for i in 0..4 {
        for j in 0..=i {
            cov[i][j] /= nf - 1.0;
            cov[j][i] = cov[i][j];
        }
    }
    MomentSet::from_covariance(&cov, mean[A], mean[C])
}

/// Linear correlation matrix implied by a moment set.
pub fn correlation_matrix(moments: &MomentSet) -> Result<Matrix4> {
    let cov = moments.covariance_matrix();
    for (k, name) in VARIABLE_NAMES.iter().enumerate() {
        if !(cov[k][k] > 0.0) {
            return Err(Error::ZeroVariance(name));
        }
    }
    let mut corr = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            corr[i][j] = if i == j {
                1.0
            } else {
                cov[i][j] / (cov[i][i] * cov[j][j]).sqrt()
            };
        }
    }
    Ok(corr)
}

/// Mean vector of the built-in simulation scenarios; gives `R = 5`.
pub const SIMULATION_MEANS: [f64; 4] = [50.0, 20.0, 10.0, 100.0];
