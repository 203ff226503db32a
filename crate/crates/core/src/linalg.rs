//! Small dense helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `‖X − Xᵀ‖∞ / ‖X‖∞`, zero for the zero matrix.
pub fn asymmetry(x: &DMatrix<f64>) -> f64 {
    let norm = inf_norm(x);
    if norm == 0.0 {
        return 0.0;
    }
    inf_norm(&(x - x.transpose())) / norm
}

/// Inverse by LU with partial pivoting. Rejects the matrix as singular at
/// `z` when `|det| < singular_tol · ‖m‖∞^n`.
pub fn invert_checked(m: &DMatrix<f64>, z: f64, singular_tol: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let lu = m.clone().lu();
    let det = lu.determinant();
    let threshold = singular_tol * inf_norm(m).powi(n as i32);
    if !det.is_finite() || det.abs() < threshold || det == 0.0 {
        return Err(Error::Singular { z, det: det.abs() });
    }
    lu.try_inverse().ok_or(Error::Singular { z, det: det.abs() })
}

/// Lower-triangular `L` with `G = L Lᵀ`. A pivot below `rel_tol` times the
/// original diagonal entry of its row counts as loss of positive
/// definiteness at working precision.
pub fn cholesky_checked(g: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        let scale = g[(j, j)].abs();
        if !(d > rel_tol * scale) {
            return Err(Error::Positivity { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Inverse of a nonsingular lower-triangular matrix by forward substitution.
pub fn lower_triangular_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::<f64>::zeros(n, n);
    for col in 0..n {
        inv[(col, col)] = 1.0 / l[(col, col)];
        for i in (col + 1)..n {
            let mut s = 0.0;
            for k in col..i {
                s += l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = -s / l[(i, i)];
        }
    }
    inv
}
