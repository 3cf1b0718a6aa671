//! Summary statistics over replication outputs.

use serde::{Deserialize, Serialize};

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Unbiased sample variance; needs two values.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let mu = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - mu) * (x - mu)).sum();
    Some(ss / (xs.len() - 1) as f64)
}

/// Linear-interpolation quantile of sorted data (the common "type 7").
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Five-number boxplot summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        Some(Self {
            min: s[0],
            q1: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q3: quantile_sorted(&s, 0.75),
            max: s[s.len() - 1],
        })
    }
}

/// Standard error of `Var(x) − Var(y)` for paired series, from the
/// per-pair differences of squared deviations.
pub fn variance_gap_std_error(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let k = x.len();
    if k < 3 {
        return None;
    }
    let (mx, my) = (mean(x)?, mean(y)?);
    let d: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (a - mx) - (b - my) * (b - my))
        .collect();
    Some((sample_variance(&d)? / k as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_eq!(quantile_sorted(&s, 0.25), 1.75);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
        let q = Quantiles::of(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!((q.min, q.median, q.max), (1.0, 2.0, 3.0));
    }

    #[test]
    fn variance_basics() {
        assert_eq!(sample_variance(&[1.0, 2.0, 3.0]), Some(1.0));
        assert_eq!(sample_variance(&[1.0]), None);
        assert_eq!(mean(&[]), None);
    }

    #[test]
    fn gap_error_zero_for_identical_series() {
        let x = [0.1, 0.5, -0.3, 0.9];
        assert_eq!(variance_gap_std_error(&x, &x), Some(0.0));
    }
}
