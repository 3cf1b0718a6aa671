//! Control-variate coefficient strategies for the ratio estimators.
//!
//! All formulas take a [`MomentSet`]; `alpha` weights the numerator control
//! `B`, `beta` the denominator control `D`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{estimate_moments, JointSample, MomentSet};

/// `|Corr(B, D)|` above `1 - COLLINEARITY_TOLERANCE` makes the jointly
/// optimal system singular.
pub const COLLINEARITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// `alpha = beta = 0`; every estimator collapses to MC/MC.
    None,
    /// Each mean's own variance-minimizing coefficient.
    Classical,
    /// Classical `alpha`, `beta` minimizing the ratio variance given it.
    Gordon,
    /// `(alpha, beta)` jointly minimizing the ratio variance.
    Optimal,
    /// Ratio-optimal `alpha` with `beta = 0` (the CV/MC estimator).
    NumeratorOnly,
    /// Minimizer family when `B = a·D + b`.
    LinearCv,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::None,
        Strategy::Classical,
        Strategy::Gordon,
        Strategy::Optimal,
        Strategy::NumeratorOnly,
        Strategy::LinearCv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Classical => "classical",
            Strategy::Gordon => "gordon",
            Strategy::Optimal => "optimal",
            Strategy::NumeratorOnly => "numerator_only",
            Strategy::LinearCv => "linear_cv",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == norm)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub alpha: f64,
    pub beta: f64,
    pub strategy: Strategy,
}

/// The modelled relation `B = slope · D + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearControl {
    pub slope: f64,
    pub offset: f64,
}

fn require_positive(v: f64, name: &'static str) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::ZeroVariance(name))
    }
}

fn require_ratio(m: &MomentSet) -> Result<()> {
    if m.r == 0.0 || !m.r.is_finite() {
        Err(Error::ZeroRatio)
    } else {
        Ok(())
    }
}

pub fn none() -> CoefficientSet {
    CoefficientSet {
        alpha: 0.0,
        beta: 0.0,
        strategy: Strategy::None,
    }
}

/// `alpha = Cov(A,B)/Var(B)`, `beta = Cov(C,D)/Var(D)`.
pub fn classical(m: &MomentSet) -> Result<CoefficientSet> {
    require_positive(m.var_b, "B")?;
    require_positive(m.var_d, "D")?;
    Ok(CoefficientSet {
        alpha: m.cov_ab / m.var_b,
        beta: m.cov_cd / m.var_d,
        strategy: Strategy::Classical,
    })
}

pub fn gordon(m: &MomentSet) -> Result<CoefficientSet> {
    require_positive(m.var_b, "B")?;
    require_positive(m.var_d, "D")?;
    require_ratio(m)?;
    let alpha = m.cov_ab / m.var_b;
    let beta = (m.r * m.cov_cd - m.cov_ad + alpha * m.cov_bd) / (m.r * m.var_d);
    Ok(CoefficientSet {
        alpha,
        beta,
        strategy: Strategy::Gordon,
    })
}

/// Unique minimizer of the CV/CV delta-method variance.
///
/// Solves the 2×2 stationarity system in closed form; requires
/// `|Corr(B, D)| < 1`.
pub fn optimal(m: &MomentSet) -> Result<CoefficientSet> {
    require_positive(m.var_b, "B")?;
    require_positive(m.var_d, "D")?;
    require_ratio(m)?;
    let corr = m.corr_bd();
    if corr.abs() > 1.0 - COLLINEARITY_TOLERANCE {
        return Err(Error::CollinearControls { correlation: corr });
    }
    let r = m.r;
    let det = m.var_b * m.var_d - m.cov_bd * m.cov_bd;
    let alpha = (m.var_d * m.cov_ab - r * m.var_d * m.cov_bc + r * m.cov_bd * m.cov_cd
        - m.cov_bd * m.cov_ad)
        / det;
    let beta = (m.cov_bd * m.cov_ab / r - m.cov_bd * m.cov_bc + m.var_b * m.cov_cd
        - m.var_b * m.cov_ad / r)
        / det;
    Ok(CoefficientSet {
        alpha,
        beta,
        strategy: Strategy::Optimal,
    })
}

/// `alpha = (Cov(A,B) − R·Cov(B,C)) / Var(B)`, `beta = 0`.
pub fn numerator_only(m: &MomentSet) -> Result<CoefficientSet> {
    require_positive(m.var_b, "B")?;
    Ok(CoefficientSet {
        alpha: (m.cov_ab - m.r * m.cov_bc) / m.var_b,
        beta: 0.0,
        strategy: Strategy::NumeratorOnly,
    })
}

/// Member of the minimizer family for `B = slope·D + offset` selected by
/// `beta_choice`. Every member attains the same variance.
pub fn linear_cv(m: &MomentSet, control: LinearControl, beta_choice: f64) -> Result<CoefficientSet> {
    if control.slope == 0.0 {
        return Err(Error::ZeroSlope);
    }
    require_positive(m.var_d, "D")?;
    let eta = (m.cov_ad - m.r * m.cov_cd) / m.var_d;
    Ok(CoefficientSet {
        alpha: (eta + beta_choice * m.r) / control.slope,
        beta: beta_choice,
        strategy: Strategy::LinearCv,
    })
}

/// Dispatches on `strategy`. For [`Strategy::LinearCv`] the slope is taken
/// as `Cov(B,D)/Var(D)` (exact when `B` is affine in `D`) and `beta = 0`.
pub fn for_strategy(m: &MomentSet, strategy: Strategy) -> Result<CoefficientSet> {
    match strategy {
        Strategy::None => Ok(none()),
        Strategy::Classical => classical(m),
        Strategy::Gordon => gordon(m),
        Strategy::Optimal => optimal(m),
        Strategy::NumeratorOnly => numerator_only(m),
        Strategy::LinearCv => {
            require_positive(m.var_d, "D")?;
            let control = LinearControl {
                slope: m.cov_bd / m.var_d,
                offset: 0.0,
            };
            linear_cv(m, control, 0.0)
        }
    }
}

/// Coefficients from the sample's own moments, with `R` plugged in as the
/// MC/MC estimate `mean_a / mean_c`.
pub fn plugin_coefficients(sample: &JointSample, strategy: Strategy) -> Result<CoefficientSet> {
    let moments = estimate_moments(sample)?;
    for_strategy(&moments, strategy)
}
