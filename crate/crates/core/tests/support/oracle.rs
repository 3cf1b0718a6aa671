//! Independent numerical oracles: nothing here calls the closed-form
//! coefficient or variance-difference code under test.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratio_cv::numerics::{is_positive_definite, unit_diagonal_matrix};
use ratio_cv::{CovarianceStructure, MomentSet};

pub const MU: [f64; 4] = [50.0, 20.0, 10.0, 100.0];

/// Ratio variance straight from the linearization `A − αB − R(C − βD)`,
/// evaluated as a quadratic form in the covariance matrix.
pub fn ratio_variance(m: &MomentSet, alpha: f64, beta: f64, n: usize) -> f64 {
    let w = [1.0, -alpha, -m.r, m.r * beta];
    let s = m.covariance_matrix();
    let mut q = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            q += w[i] * s[i][j] * w[j];
        }
    }
    q / (n as f64 * m.mean_c * m.mean_c)
}

/// Unit-diagonal PD structures with off-diagonals uniform in `(-bound, bound)`.
pub fn random_structures(count: usize, bound: f64, seed: u64) -> Vec<CovarianceStructure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let off: [f64; 6] = std::array::from_fn(|_| rng.random_range(-bound..bound));
        if is_positive_definite(&unit_diagonal_matrix(&off)) {
            out.push(CovarianceStructure::unit_diagonal(MU, &off).unwrap());
        }
    }
    out
}

/// Central differences of `f` at `x` with step `h`.
pub fn gradient_fd(f: impl Fn(f64, f64) -> f64, x: [f64; 2], h: f64) -> [f64; 2] {
    [
        (f(x[0] + h, x[1]) - f(x[0] - h, x[1])) / (2.0 * h),
        (f(x[0], x[1] + h) - f(x[0], x[1] - h)) / (2.0 * h),
    ]
}

/// Golden-section minimization on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    while (hi - lo).abs() > tol {
        if f(c) < f(d) {
            hi = d;
        } else {
            lo = c;
        }
        c = hi - g * (hi - lo);
        d = lo + g * (hi - lo);
    }
    0.5 * (lo + hi)
}

/// Nelder–Mead in two dimensions, with restarts around the incumbent.
pub fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: f64, iters: usize) -> [f64; 2] {
    let mut best = start;
    let mut scale = step;
    for _ in 0..6 {
        best = nelder_mead_once(&f, best, scale, iters);
        scale *= 0.1;
    }
    best
}

fn nelder_mead_once(f: &impl Fn([f64; 2]) -> f64, start: [f64; 2], step: f64, iters: usize) -> [f64; 2] {
    let mut pts = [start, [start[0] + step, start[1]], [start[0], start[1] + step]];
    let mut vals = pts.map(f);
    for _ in 0..iters {
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.map(|i| pts[i]);
        vals = order.map(|i| vals[i]);
        let spread = (pts[2][0] - pts[0][0]).abs().max((pts[2][1] - pts[0][1]).abs());
        if spread < 1e-14 * (1.0 + pts[0][0].abs() + pts[0][1].abs()) {
            break;
        }
        let c = [(pts[0][0] + pts[1][0]) / 2.0, (pts[0][1] + pts[1][1]) / 2.0];
        let along = |t: f64| [c[0] + t * (pts[2][0] - c[0]), c[1] + t * (pts[2][1] - c[1])];
        let xr = along(-1.0);
        let fr = f(xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(xe);
            if fe < fr {
                pts[2] = xe;
                vals[2] = fe;
            } else {
                pts[2] = xr;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            pts[2] = xr;
            vals[2] = fr;
        } else {
            let xc = if fr < vals[2] { along(-0.5) } else { along(0.5) };
            let fc = f(xc);
            if fc < vals[2].min(fr) {
                pts[2] = xc;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    pts[k] = [(pts[0][0] + pts[k][0]) / 2.0, (pts[0][1] + pts[k][1]) / 2.0];
                    vals[k] = f(pts[k]);
                }
            }
        }
    }
    let mut i = 0;
    for k in 1..3 {
        if vals[k] < vals[i] {
            i = k;
        }
    }
    pts[i]
}

/// Sample variance with the `n − 1` divisor.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}
