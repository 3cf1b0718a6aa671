use crate::error::{Error, Result};

/// Dense 4×4 matrix, row-major.
pub type Matrix4 = [[f64; 4]; 4];

/// Pivots at or below this value count as a Cholesky failure.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

pub const IDENTITY: Matrix4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = sigma`.
///
/// Only the lower triangle of `sigma` is read. Fails with
/// [`Error::NotPositiveDefinite`] naming the 1-based leading minor whose
/// pivot is `<= PIVOT_TOLERANCE`.
pub fn cholesky(sigma: &Matrix4) -> Result<Matrix4> {
    let mut l = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut pivot = sigma[j][j];
        for k in 0..j {
            pivot -= l[j][k] * l[j][k];
        }
        if pivot.is_nan() || pivot <= PIVOT_TOLERANCE {
            return Err(Error::NotPositiveDefinite {
                minor: j + 1,
                pivot,
            });
        }
        let d = pivot.sqrt();
        l[j][j] = d;
        for i in (j + 1)..4 {
            let mut s = sigma[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / d;
        }
    }
    Ok(l)
}

pub fn is_positive_definite(sigma: &Matrix4) -> bool {
    cholesky(sigma).is_ok()
}

/// `L · Lᵀ` for a lower-triangular `L`.
pub fn lower_times_transpose(l: &Matrix4) -> Matrix4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| l[i][k] * l[j][k]).sum();
        }
    }
    out
}
