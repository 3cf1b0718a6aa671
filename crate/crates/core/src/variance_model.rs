//! First-order (delta-method) variances of the ratio estimators and the
//! closed-form variance differences for each coefficient strategy.
//!
//! Every variance here carries the common factor `1 / (n · E[C]^2)`.

use serde::{Deserialize, Serialize};

use crate::coefficients::{self, CoefficientSet, Strategy};
use crate::error::{Error, Result};
use crate::numerics::MomentSet;

/// Relative agreement demanded between the generic evaluation and a
/// dedicated closed form, measured against the sum of absolute terms.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-10;

fn prefactor(m: &MomentSet, n: usize) -> Result<f64> {
    if m.mean_c == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    if n == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    Ok(1.0 / (n as f64 * m.mean_c * m.mean_c))
}

/// The ten terms of the CV/CV variance before the common factor, in order:
/// `Var(A)`, `R²Var(C)`, `−2R·Cov(A,C)`, then the `alpha` and `beta` terms.
fn cv_cv_terms(m: &MomentSet, alpha: f64, beta: f64) -> [f64; 10] {
    let r = m.r;
    [
        m.var_a,
        r * r * m.var_c,
        -2.0 * r * m.cov_ac,
        alpha * alpha * m.var_b,
        -2.0 * alpha * m.cov_ab,
        2.0 * alpha * r * m.cov_bc,
        beta * beta * r * r * m.var_d,
        -2.0 * beta * r * r * m.cov_cd,
        2.0 * beta * r * m.cov_ad,
        -2.0 * alpha * beta * r * m.cov_bd,
    ]
}

pub fn var_mc_mc(m: &MomentSet, n: usize) -> Result<f64> {
    let k = prefactor(m, n)?;
    Ok(k * (m.var_a + m.r * m.r * m.var_c - 2.0 * m.r * m.cov_ac))
}

pub fn var_cv_mc(m: &MomentSet, alpha: f64, n: usize) -> Result<f64> {
    var_cv_cv(m, alpha, 0.0, n)
}

pub fn var_cv_cv(m: &MomentSet, alpha: f64, beta: f64, n: usize) -> Result<f64> {
    let k = prefactor(m, n)?;
    Ok(k * cv_cv_terms(m, alpha, beta).iter().sum::<f64>())
}

/// `(∂/∂alpha, ∂/∂beta)` of [`var_cv_cv`].
pub fn var_cv_cv_gradient(m: &MomentSet, alpha: f64, beta: f64, n: usize) -> Result<[f64; 2]> {
    let k = prefactor(m, n)?;
    let r = m.r;
    let da = 2.0 * alpha * m.var_b - 2.0 * m.cov_ab + 2.0 * r * m.cov_bc - 2.0 * beta * r * m.cov_bd;
    let db = 2.0 * beta * r * r * m.var_d - 2.0 * r * r * m.cov_cd + 2.0 * r * m.cov_ad
        - 2.0 * alpha * r * m.cov_bd;
    Ok([k * da, k * db])
}

/// Constant Hessian of [`var_cv_cv`] in `(alpha, beta)`.
pub fn var_cv_cv_hessian(m: &MomentSet, n: usize) -> Result<[[f64; 2]; 2]> {
    let k = prefactor(m, n)?;
    let off = -2.0 * m.r * m.cov_bd * k;
    Ok([[2.0 * m.var_b * k, off], [off, 2.0 * m.r * m.r * m.var_d * k]])
}

pub fn hessian_determinant(m: &MomentSet, n: usize) -> Result<f64> {
    let h = var_cv_cv_hessian(m, n)?;
    Ok(h[0][0] * h[1][1] - h[0][1] * h[1][0])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceBreakdown {
    pub strategy: Strategy,
    pub coefficients: CoefficientSet,
    pub var_mc_mc: f64,
    pub var_estimator: f64,
    /// `var_estimator − var_mc_mc`.
    pub difference: f64,
    /// `None` when `var_mc_mc` is zero.
    pub rvr: Option<f64>,
    pub n: usize,
    /// Extra control-variate draws; `None` for exact control variates.
    pub m: Option<usize>,
    /// 1 for exact CV, `m / (n + m)` for ACV.
    pub scaling: f64,
    /// Value of the dedicated closed form, when the strategy has one.
    pub closed_form_difference: Option<f64>,
}

fn rvr_of(var_mc: f64, difference: f64) -> Option<f64> {
    (var_mc > 0.0).then(|| -difference / var_mc)
}

/// `T / (Var(B)·Var(D))`, the classical-coefficient difference before the
/// common factor.
fn classical_core(m: &MomentSet) -> f64 {
    let r = m.r;
    let t = -m.cov_ab * m.cov_ab * m.var_d - r * r * m.cov_cd * m.cov_cd * m.var_b
        + 2.0 * r * m.cov_ab * m.cov_bc * m.var_d
        + 2.0 * r * m.cov_cd * m.cov_ad * m.var_b
        - 2.0 * r * m.cov_ab * m.cov_cd * m.cov_bd;
    t / (m.var_b * m.var_d)
}

pub fn classical_difference_closed_form(m: &MomentSet, n: usize) -> Result<f64> {
    Ok(prefactor(m, n)? * classical_core(m))
}

pub fn gordon_difference_closed_form(m: &MomentSet, n: usize) -> Result<f64> {
    let extra = (-m.cov_ad * m.cov_ad * m.var_b + 2.0 * m.cov_ab * m.cov_bd * m.cov_ad)
        / (m.var_b * m.var_d)
        - m.cov_ab * m.cov_ab * m.cov_bd * m.cov_bd / (m.var_b * m.var_b * m.var_d);
    Ok(prefactor(m, n)? * (classical_core(m) + extra))
}

/// `−Var(x·D − y·B) / (Var(B)Var(D) − Cov(B,D)²)` with
/// `x = R·Cov(B,C) − Cov(A,B)` and `y = R·Cov(C,D) − Cov(A,D)`.
pub fn optimal_difference_closed_form(m: &MomentSet, n: usize) -> Result<f64> {
    let x = m.r * m.cov_bc - m.cov_ab;
    let y = m.r * m.cov_cd - m.cov_ad;
    let det = m.var_b * m.var_d - m.cov_bd * m.cov_bd;
    let combo = x * x * m.var_d + y * y * m.var_b - 2.0 * x * y * m.cov_bd;
    Ok(-prefactor(m, n)? * combo / det)
}

pub fn numerator_only_difference_closed_form(m: &MomentSet, n: usize) -> Result<f64> {
    let g = m.cov_ab - m.r * m.cov_bc;
    Ok(-prefactor(m, n)? * g * g / m.var_b)
}

fn closed_form(m: &MomentSet, strategy: Strategy, n: usize) -> Result<Option<f64>> {
    Ok(match strategy {
        Strategy::Classical => Some(classical_difference_closed_form(m, n)?),
        Strategy::Gordon => Some(gordon_difference_closed_form(m, n)?),
        Strategy::Optimal => Some(optimal_difference_closed_form(m, n)?),
        Strategy::NumeratorOnly => Some(numerator_only_difference_closed_form(m, n)?),
        Strategy::None => Some(0.0),
        Strategy::LinearCv => None,
    })
}

/// Exact-CV variance of the estimator built with `strategy`'s coefficients,
/// compared against MC/MC. Strategies with a dedicated closed form are
/// cross-checked against it.
pub fn variance_difference(m: &MomentSet, strategy: Strategy, n: usize) -> Result<VarianceBreakdown> {
    let coeffs = coefficients::for_strategy(m, strategy)?;
    breakdown_for(m, coeffs, n)
}

/// As [`variance_difference`] but for caller-supplied coefficients. The
/// closed-form check only applies when they came from `coeffs.strategy`.
pub fn breakdown_for(m: &MomentSet, coeffs: CoefficientSet, n: usize) -> Result<VarianceBreakdown> {
    let k = prefactor(m, n)?;
    let var_mc = var_mc_mc(m, n)?;
    let terms = cv_cv_terms(m, coeffs.alpha, coeffs.beta);
    let var_est = k * terms.iter().sum::<f64>();
    let difference = var_est - var_mc;
    let closed = closed_form(m, coeffs.strategy, n)?;
    if let Some(cf) = closed {
        let fresh = coefficients::for_strategy(m, coeffs.strategy)?;
        if fresh == coeffs {
            let scale = k * terms.iter().map(|t| t.abs()).sum::<f64>();
            if (cf - difference).abs() > CLOSED_FORM_TOLERANCE * scale {
                return Err(Error::ClosedFormMismatch {
                    strategy: coeffs.strategy.name(),
                    generic: difference,
                    closed_form: cf,
                });
            }
        }
    }
    Ok(VarianceBreakdown {
        strategy: coeffs.strategy,
        coefficients: coeffs,
        var_mc_mc: var_mc,
        var_estimator: var_est,
        difference,
        rvr: rvr_of(var_mc, difference),
        n,
        m: None,
        scaling: 1.0,
        closed_form_difference: closed,
    })
}

/// `m / (n + m)`; zero when there are no extra draws.
pub fn acv_factor(n: usize, m: usize) -> f64 {
    if m == 0 {
        0.0
    } else {
        m as f64 / (n + m) as f64
    }
}

pub fn acv_scaling(difference_exact: f64, n: usize, m: usize) -> f64 {
    acv_factor(n, m) * difference_exact
}

/// ACV counterpart of [`variance_difference`]: the exact-CV difference
/// scaled by `m / (n + m)`.
pub fn acv_variance_difference(
    moments: &MomentSet,
    strategy: Strategy,
    n: usize,
    m: usize,
) -> Result<VarianceBreakdown> {
    let exact = variance_difference(moments, strategy, n)?;
    Ok(scale_breakdown(exact, n, m))
}

pub fn scale_breakdown(exact: VarianceBreakdown, n: usize, m: usize) -> VarianceBreakdown {
    let s = acv_factor(n, m);
    let var_estimator = exact.var_mc_mc + s * exact.difference;
    let difference = var_estimator - exact.var_mc_mc;
    VarianceBreakdown {
        var_estimator,
        difference,
        rvr: rvr_of(exact.var_mc_mc, difference),
        m: Some(m),
        scaling: s,
        closed_form_difference: exact.closed_form_difference.map(|d| s * d),
        ..exact
    }
}

/// `τ = Cov(A − R·C, D)`.
pub fn linear_cv_tau(m: &MomentSet) -> f64 {
    m.cov_ad - m.r * m.cov_cd
}

/// Variance difference attained by every member of the linear-control
/// minimizer family: `−τ² / (Var(D) · n · E[C]²)`.
pub fn linear_cv_variance_difference(m: &MomentSet, n: usize) -> Result<f64> {
    if !(m.var_d > 0.0) {
        return Err(Error::ZeroVariance("D"));
    }
    let tau = linear_cv_tau(m);
    Ok(-prefactor(m, n)? * tau * tau / m.var_d)
}

/// Whether the linear-control estimator strictly reduces variance: `τ != 0`.
pub fn linear_cv_reduction_predicate(m: &MomentSet) -> bool {
    linear_cv_tau(m) != 0.0
}

/// The older textbook expression `τ·(1 − 2τ²/Var(D)) / (n·E[C]²)`, kept for
/// reporting. It does not match [`var_cv_cv`] at the minimizers.
pub fn published_linear_cv_difference(m: &MomentSet, n: usize) -> Result<f64> {
    if !(m.var_d > 0.0) {
        return Err(Error::ZeroVariance("D"));
    }
    let tau = linear_cv_tau(m);
    Ok(prefactor(m, n)? * tau * (1.0 - 2.0 * tau * tau / m.var_d))
}

/// Companion condition `τ ∈ (−√(Var(D)/2), 0) ∪ (√(Var(D)/2), ∞)`.
pub fn published_linear_cv_condition(tau: f64, var_d: f64) -> bool {
    let edge = (var_d / 2.0).sqrt();
    (tau > -edge && tau < 0.0) || tau > edge
}
