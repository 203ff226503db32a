//! Explicit solutions of the symmetry system for ρ = 1 and ρ = 2.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{
    require_full_rank, require_nonsingular, BuildOptions, FreeRow, Provenance, SymmetrizerPair,
};
use crate::error::{Error, Result};
use crate::quadrature::chebyshev_grid;
use crate::sobolev::{MatrixFunction, MatrixWeight};

fn require_rho(w: &MatrixWeight, rho: usize) -> Result<()> {
    if w.rho() == rho {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "builder needs rho = {rho}, weight has rho = {}",
            w.rho()
        )))
    }
}

fn scan_grid(w: &MatrixWeight, opts: &BuildOptions) -> Vec<f64> {
    let (a, b) = w.interval();
    chebyshev_grid(opts.grid_points, a, b)
}

/// Closed-form `B` for ρ = 1 with the default free row `(m̃₁,₁, 0)`:
///
/// ```text
/// B = [ m̃₁,₀   m̃₀,₀ − m̃₁,₀²/m̃₁,₁ ]
///     [ m̃₁,₁   0                  ]
/// ```
fn rho1_default(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (m00, m10, m11) = (m[(0, 0)], m[(1, 0)], m[(1, 1)]);
    DMatrix::from_row_slice(2, 2, &[m10, m00 - m10 * m10 / m11, m11, 0.0])
}

/// Row 0 from a given row 1 `(b₁,₀, b₁,₁)`.
fn rho1_general(m: &DMatrix<f64>, b10: f64, b11: f64) -> DMatrix<f64> {
    let (m00, m10, m11) = (m[(0, 0)], m[(1, 0)], m[(1, 1)]);
    let b00 = b10 * m10 / m11;
    let b01 = (b10 * (m00 - m10 * m10 / m11) + b11 * m10) / m11;
    DMatrix::from_row_slice(2, 2, &[b00, b01, b10, b11])
}

pub fn build_b_rho1(w: &MatrixWeight, free: Option<FreeRow>) -> Result<SymmetrizerPair> {
    build_b_rho1_with(w, free, &BuildOptions::default())
}

/// Symmetrizer for ρ = 1. With `free = None` the closed form above is used;
/// otherwise row 0 is solved from the supplied row 1.
pub fn build_b_rho1_with(
    w: &MatrixWeight,
    free: Option<FreeRow>,
    opts: &BuildOptions,
) -> Result<SymmetrizerPair> {
    require_rho(w, 1)?;
    require_full_rank(w, opts)?;
    let weight = w.clone();
    let (b, row) = match free {
        None => (
            MatrixFunction::new(2, None, move |z| Ok(rho1_default(&weight.eval(z)?))),
            FreeRow::closed_form_default(1).expect("rho = 1 has a default row"),
        ),
        Some(row) => {
            if row.len() != 2 {
                return Err(Error::Dimension {
                    expected: 2,
                    found: row.len(),
                });
            }
            let r = row.clone();
            (
                MatrixFunction::new(2, None, move |z| {
                    let m = weight.eval(z)?;
                    let v = r.eval(z, &m)?;
                    Ok(rho1_general(&m, v[0], v[1]))
                }),
                row,
            )
        }
    };
    require_nonsingular(&b, &scan_grid(w, opts), opts.singular_tol)?;
    Ok(SymmetrizerPair::from_b(b, Provenance::ClosedFormRho1, row))
}

/// Closed-form `B` for ρ = 2 with the default free row `(2m̃₂,₂², 0, 0)`.
fn rho2_default(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = |i, j| m[(i, j)];
    let (m00, m01, m02) = (e(0, 0), e(0, 1), e(0, 2));
    let (m10, m11, m12) = (e(1, 0), e(1, 1), e(1, 2));
    let (m20, m21, m22) = (e(2, 0), e(2, 1), e(2, 2));
    DMatrix::from_row_slice(
        3,
        3,
        &[
            2.0 * m20 * m22,
            m10 * m22 - m20 * m12,
            2.0 * m22 * m00 - m12 * m10 + m20 * m12 * m12 / m22 - 2.0 * m20 * m20,
            2.0 * m21 * m22,
            m11 * m22 - m21 * m21,
            2.0 * m22 * m01 - m12 * m11 + m12 * m12 * m12 / m22 - 2.0 * m21 * m02,
            2.0 * m22 * m22,
            0.0,
            0.0,
        ],
    )
}

/// Rows 0 and 1 from a given row 2, by successive elimination:
/// `b₁,₀` from row 2 alone, then `b₀,₀` from `b₁,₀`, then `b₀,₁`, `b₁,₁`, and
/// finally `b₀,₂`, `b₁,₂`.
fn rho2_general(m: &DMatrix<f64>, row: &[f64]) -> Result<DMatrix<f64>> {
    let e = |i, j| m[(i, j)];
    let (m00, m01, m02) = (e(0, 0), e(0, 1), e(0, 2));
    let (m10, m11, m12) = (e(1, 0), e(1, 1), e(1, 2));
    let (m20, m21, m22) = (e(2, 0), e(2, 1), e(2, 2));
    let (b20, b21, b22) = (row[0], row[1], row[2]);

    let delta1 = -m02 / m22 + m12 * m12 / (2.0 * m22 * m22);
    let delta2 = m22 * m11 - m12 * m12;
    if !(delta2 > 0.0) {
        return Err(Error::Weight(format!(
            "m22*m11 - m12^2 = {delta2:e} is not positive"
        )));
    }

    let b10 = b20 * m21 / m22;
    let b00 = (m22 * b10 * (m10 - m20 * m12 / m22) - b20 * (m21 * m10 - m20 * m11)) / delta2;
    let b01 = b20 * m10 / (2.0 * m22) + b21 * m20 / m22 - b00 * m12 / (2.0 * m22);
    let b11 = b20 * m11 / (2.0 * m22) + b21 * m21 / m22 - b10 * m12 / (2.0 * m22);
    let b02 = b20 * (m00 / m22 - m12 * m10 / (2.0 * m22 * m22))
        + b21 * (m10 / m22 - m12 * m20 / (m22 * m22))
        + b22 * m20 / m22
        + b00 * delta1;
    let b12 = b20 * (m01 / m22 - m12 * m11 / (2.0 * m22 * m22))
        + b21 * (m11 / m22 - m12 * m21 / (m22 * m22))
        + b22 * m21 / m22
        + b10 * delta1;
    Ok(DMatrix::from_row_slice(
        3,
        3,
        &[b00, b01, b02, b10, b11, b12, b20, b21, b22],
    ))
}

fn require_delta2(w: &MatrixWeight, grid: &[f64]) -> Result<()> {
    for &z in grid {
        let m = w.eval(z)?;
        let delta2 = m[(2, 2)] * m[(1, 1)] - m[(1, 2)] * m[(1, 2)];
        if !(delta2 > 0.0) {
            return Err(Error::Weight(format!(
                "m22*m11 - m12^2 = {delta2:e} <= 0 at z = {z}"
            )));
        }
    }
    Ok(())
}

pub fn build_b_rho2(w: &MatrixWeight, free: Option<FreeRow>) -> Result<SymmetrizerPair> {
    build_b_rho2_with(w, free, &BuildOptions::default())
}

/// Symmetrizer for ρ = 2. With `free = None` the explicit matrix for the
/// row `(2m̃₂,₂², 0, 0)` is used; otherwise rows 0 and 1 are eliminated from
/// the supplied row 2.
pub fn build_b_rho2_with(
    w: &MatrixWeight,
    free: Option<FreeRow>,
    opts: &BuildOptions,
) -> Result<SymmetrizerPair> {
    require_rho(w, 2)?;
    require_full_rank(w, opts)?;
    let grid = scan_grid(w, opts);
    require_delta2(w, &grid)?;
    let weight = w.clone();
    let (b, row) = match free {
        None => (
            MatrixFunction::new(3, None, move |z| Ok(rho2_default(&weight.eval(z)?))),
            FreeRow::closed_form_default(2).expect("rho = 2 has a default row"),
        ),
        Some(row) => {
            if row.len() != 3 {
                return Err(Error::Dimension {
                    expected: 3,
                    found: row.len(),
                });
            }
            let r = row.clone();
            (
                MatrixFunction::new(3, None, move |z| {
                    let m = weight.eval(z)?;
                    rho2_general(&m, &r.eval(z, &m)?)
                }),
                row,
            )
        }
    };
    require_nonsingular(&b, &grid, opts.singular_tol)?;
    Ok(SymmetrizerPair::from_b(b, Provenance::ClosedFormRho2, row))
}

/// Residuals of the six scalar symmetry equations for ρ = 2 at `z`, each
/// `|LHS − RHS| / max(1, |LHS|, |RHS|)`.
pub fn check_rho2_system(b: &MatrixFunction, w: &MatrixWeight, z: f64) -> Result<[f64; 6]> {
    if b.dim() != 3 || w.dim() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            found: b.dim().min(w.dim()),
        });
    }
    let m = w.eval(z)?;
    let bm = b.eval(z)?;
    let b_ = |i, j| bm[(i, j)];
    let m_ = |i, j| m[(i, j)];
    let sides = [
        (
            b_(1, 0) * m_(0, 0) + b_(1, 1) * m_(1, 0) + b_(1, 2) * m_(2, 0),
            b_(0, 0) * m_(0, 1) + b_(0, 1) * m_(1, 1) + b_(0, 2) * m_(2, 1),
        ),
        (
            b_(1, 0) * m_(1, 0) + 2.0 * b_(1, 1) * m_(2, 0),
            b_(0, 0) * m_(1, 1) + 2.0 * b_(0, 1) * m_(2, 1),
        ),
        (
            b_(2, 0) * m_(0, 0) + b_(2, 1) * m_(1, 0) + b_(2, 2) * m_(2, 0),
            b_(0, 0) * m_(0, 2) + b_(0, 1) * m_(1, 2) + b_(0, 2) * m_(2, 2),
        ),
        (
            b_(2, 0) * m_(1, 0) + 2.0 * b_(2, 1) * m_(2, 0),
            b_(0, 0) * m_(1, 2) + 2.0 * b_(0, 1) * m_(2, 2),
        ),
        (
            b_(2, 0) * m_(0, 1) + b_(2, 1) * m_(1, 1) + b_(2, 2) * m_(2, 1),
            b_(1, 0) * m_(0, 2) + b_(1, 1) * m_(1, 2) + b_(1, 2) * m_(2, 2),
        ),
        (
            b_(2, 0) * m_(1, 1) + 2.0 * b_(2, 1) * m_(2, 1),
            b_(1, 0) * m_(1, 2) + 2.0 * b_(1, 1) * m_(2, 2),
        ),
    ];
    Ok(sides.map(|(l, r)| (l - r).abs() / 1f64.max(l.abs()).max(r.abs())))
}

/// The elimination coefficients `c₁,₀`, `c₂,₀` evaluated from their long
/// expressions, next to `m̃₂,₂·det M₀` and `m̃₂,₁·det M₀` computed directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rho2DetIdentities {
    pub z: f64,
    pub c10: f64,
    pub c20: f64,
    pub det_m0: f64,
    pub m22_det: f64,
    pub m21_det: f64,
    /// `|c₁,₀ − m̃₂,₂ det M₀| / (max|m̃ᵢⱼ| · |det M₀|)`.
    pub rel_diff_c10: f64,
    /// `|c₂,₀ − m̃₂,₁ det M₀| / (max|m̃ᵢⱼ| · |det M₀|)`.
    pub rel_diff_c20: f64,
}

pub fn rho2_det_identities(w: &MatrixWeight, z: f64) -> Result<Rho2DetIdentities> {
    if w.dim() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            found: w.dim(),
        });
    }
    let m = w.eval(z)?;
    let e = |i, j| m[(i, j)];
    let (m00, m01, m02) = (e(0, 0), e(0, 1), e(0, 2));
    let (m10, m11, m12) = (e(1, 0), e(1, 1), e(1, 2));
    let (m20, m21, m22) = (e(2, 0), e(2, 1), e(2, 2));
    let delta1 = -m02 / m22 + m12 * m12 / (2.0 * m22 * m22);
    let delta2 = m22 * m11 - m12 * m12;

    let shared = m22 * m01 - 0.5 * m12 * m11 + m22 * m21 * delta1;
    let c10 = m22 * m00 * delta2 - 0.5 * m12 * m10 * delta2 + m20 * m22 * delta1 * delta2
        - shared * (m22 * m10 - m20 * m12);
    let c20 = delta2 * (m21 * m00 - m20 * m01)
        + (m12 * m20 * m11 - m12 * m21 * m10) / (2.0 * m22) * delta2
        - (m21 * m10 - m20 * m11) * shared;

    let det_m0 = m.determinant();
    let m22_det = m22 * det_m0;
    let m21_det = m21 * det_m0;
    let scale = (m.amax() * det_m0.abs()).max(f64::MIN_POSITIVE);
    Ok(Rho2DetIdentities {
        z,
        c10,
        c20,
        det_m0,
        m22_det,
        m21_det,
        rel_diff_c10: (c10 - m22_det).abs() / scale,
        rel_diff_c20: (c20 - m21_det).abs() / scale,
    })
}
