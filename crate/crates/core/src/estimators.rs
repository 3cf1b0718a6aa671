//! Mean and ratio-of-means point estimators.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::numerics::{JointSample, A, B, C, D};

/// Which mean estimator sits in the numerator and in the denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    McMc,
    CvMc,
    CvCv,
    AcvMc,
    AcvAcv,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::McMc,
        EstimatorKind::CvMc,
        EstimatorKind::CvCv,
        EstimatorKind::AcvMc,
        EstimatorKind::AcvAcv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::McMc => "mc_mc",
            EstimatorKind::CvMc => "cv_mc",
            EstimatorKind::CvCv => "cv_cv",
            EstimatorKind::AcvMc => "acv_mc",
            EstimatorKind::AcvAcv => "acv_acv",
        }
    }

    /// Exact control variates need `E[B]` (and `E[D]`).
    pub fn needs_known_means(self) -> bool {
        matches!(self, EstimatorKind::CvMc | EstimatorKind::CvCv)
    }

    pub fn is_approximate(self) -> bool {
        matches!(self, EstimatorKind::AcvMc | EstimatorKind::AcvAcv)
    }

    /// Whether the denominator carries a control variate (`beta` is used).
    pub fn controls_denominator(self) -> bool {
        matches!(self, EstimatorKind::CvCv | EstimatorKind::AcvAcv)
    }

    pub fn controls_numerator(self) -> bool {
        self != EstimatorKind::McMc
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '/'], "_");
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown estimator kind `{s}`")))
    }
}

/// Exact means of the control variates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownMeans {
    pub b: f64,
    pub d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub value: f64,
    pub kind: EstimatorKind,
    /// Coefficients actually applied: `alpha = beta = 0` for MC/MC and
    /// `beta = 0` for the `*_mc` kinds.
    pub coefficients: CoefficientSet,
    pub n: usize,
    pub m: usize,
    pub used_known_means: bool,
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Plain Monte Carlo mean.
pub fn mc_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(mean_of(values))
}

/// `mean(a) + alpha · (E[B] − mean(b))`.
pub fn cv_mean(a: &[f64], b: &[f64], known_mean_b: f64, alpha: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(mc_mean(a)? + alpha * (known_mean_b - mean_of(b)))
}

/// `mean(a) + alpha · (mean over n+m of b − mean over n of b)`; the pooled
/// mean covers the paired and the extra draws together.
pub fn acv_mean(a: &[f64], b_paired: &[f64], b_extra: &[f64], alpha: f64) -> Result<f64> {
    if a.len() != b_paired.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b_paired.len(),
        });
    }
    let abar = mc_mean(a)?;
    if b_extra.is_empty() {
        return Ok(abar);
    }
    let paired_sum: f64 = b_paired.iter().sum();
    let pooled = (paired_sum + b_extra.iter().sum::<f64>()) / (b_paired.len() + b_extra.len()) as f64;
    Ok(abar + alpha * (pooled - paired_sum / b_paired.len() as f64))
}

/// Column means of a joint sample, computed once and shared by every
/// estimator kind evaluated on it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleMeans {
    pub paired: [f64; 4],
    /// Means of `B` and `D` over the `n + m` pooled draws.
    pub pooled_b: f64,
    pub pooled_d: f64,
    pub n: usize,
    pub m: usize,
}

impl SampleMeans {
    pub fn of(sample: &JointSample) -> Result<Self> {
        let n = sample.n();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let mut sums = [0.0; 4];
        for row in &sample.paired {
            for k in 0..4 {
                sums[k] += row[k];
            }
        }
        let paired = sums.map(|s| s / n as f64);
        let m = sample.m();
        let (pooled_b, pooled_d) = if m == 0 {
            (paired[B], paired[D])
        } else {
            let (eb, ed) = sample
                .extra
                .iter()
                .fold((0.0, 0.0), |(sb, sd), r| (sb + r[0], sd + r[1]));
            let total = (n + m) as f64;
            ((sums[B] + eb) / total, (sums[D] + ed) / total)
        };
        Ok(Self {
            paired,
            pooled_b,
            pooled_d,
            n,
            m,
        })
    }
}

/// Ratio value from precomputed means.
pub fn ratio_from_means(
    means: &SampleMeans,
    coeffs: &CoefficientSet,
    kind: EstimatorKind,
    known: Option<KnownMeans>,
) -> Result<f64> {
    let p = &means.paired;
    let (target_b, target_d) = if kind.needs_known_means() {
        let k = known.ok_or(Error::MissingKnownMeans(kind.name()))?;
        (k.b, k.d)
    } else {
        (means.pooled_b, means.pooled_d)
    };
    let alpha = if kind.controls_numerator() { coeffs.alpha } else { 0.0 };
    let beta = if kind.controls_denominator() { coeffs.beta } else { 0.0 };
    let num = p[A] + alpha * (target_b - p[B]);
    let den = p[C] + beta * (target_d - p[D]);
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

/// Assembles the ratio estimator of the requested kind.
///
/// `known_means` is required for `cv_*`, ignored otherwise. The `acv_*`
/// kinds with `m = 0` equal their MC counterparts.
pub fn ratio_estimate(
    sample: &JointSample,
    coeffs: &CoefficientSet,
    kind: EstimatorKind,
    known_means: Option<KnownMeans>,
) -> Result<RatioEstimate> {
    let means = SampleMeans::of(sample)?;
    let value = ratio_from_means(&means, coeffs, kind, known_means)?;
    let mut applied = *coeffs;
    if !kind.controls_numerator() {
        applied.alpha = 0.0;
    }
    if !kind.controls_denominator() {
        applied.beta = 0.0;
    }
    Ok(RatioEstimate {
        value,
        kind,
        coefficients: applied,
        n: means.n,
        m: means.m,
        used_known_means: kind.needs_known_means(),
    })
}
