//! Symmetrizing factorizations `𝒜 = 𝒞ℬ⁻¹` of the multiplication operator.
//!
//! Matrix operators act on row vectors from the right, `u ↦ u(z)·D(z)`. A
//! pair `(B, C)` with `C = B·A` factors the Leibniz matrix as
//! `A = B⁻¹C`, and the operators `ℬ`, `𝒞` are symmetric in `L²(M)` as soon as
//! `B·M₀` and `B̂·M₀` are symmetric, where `B̂ᵢⱼ = j·bᵢ,ⱼ₋₁` so that
//! `C = zB + B̂`.

mod closed_form;
mod general;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::{asymmetry, inf_norm, invert_checked};
use crate::par;
use crate::report::{CheckRecord, VerificationReport};
use crate::sobolev::{
    validate_weight, MatrixFunction, MatrixWeight, DEFAULT_MIN_EIGENVALUE,
    DEFAULT_VALIDATION_POINTS,
};

pub use closed_form::{
    build_b_rho1, build_b_rho1_with, build_b_rho2, build_b_rho2_with, check_rho2_system,
    rho2_det_identities, Rho2DetIdentities,
};
pub use general::{solve_b_general, solve_b_general_with, GeneralPoint, GeneralSolution};

pub const DEFAULT_SINGULAR_TOL: f64 = 1e-12;
pub const DEFAULT_GRID_POINTS: usize = 201;

/// `A(z)`: `z` on the diagonal, `1, 2, …, ρ` on the superdiagonal.
pub fn leibniz_matrix(rho: usize, z: f64) -> DMatrix<f64> {
    let n = rho + 1;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            z
        } else if j == i + 1 {
            j as f64
        } else {
            0.0
        }
    })
}

pub fn leibniz_function(rho: usize) -> MatrixFunction {
    MatrixFunction::new(rho + 1, Some(1), move |z| Ok(leibniz_matrix(rho, z)))
}

/// `(j·bᵢ,ⱼ₋₁)`, column 0 zero.
pub fn hat_matrix(b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| {
        if j == 0 {
            0.0
        } else {
            j as f64 * b[(i, j - 1)]
        }
    })
}

pub fn hat_b(b: &MatrixFunction) -> MatrixFunction {
    let b = b.clone();
    MatrixFunction::new(b.dim(), b.degree(), move |z| Ok(hat_matrix(&b.eval(z)?)))
}

/// Which construction produced a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedFormRho1,
    ClosedFormRho2,
    GeneralSolver,
}

type RowFn = Arc<dyn Fn(f64, &DMatrix<f64>) -> Result<Vec<f64>> + Send + Sync>;

/// Values of the last row `b_ρ,0 … b_ρ,ρ` of `B`, the free parameters of
/// the symmetry system. May depend on `z` and on `M₀(z)`.
#[derive(Clone)]
pub struct FreeRow {
    label: String,
    len: usize,
    f: RowFn,
}

impl FreeRow {
    pub fn custom<F>(label: impl Into<String>, len: usize, f: F) -> Self
    where
        F: Fn(f64, &DMatrix<f64>) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        FreeRow {
            label: label.into(),
            len,
            f: Arc::new(f),
        }
    }

    /// The row behind the displayed closed forms: `(m̃₁,₁, 0)` for ρ = 1 and
    /// `(2m̃₂,₂², 0, 0)` for ρ = 2.
    pub fn closed_form_default(rho: usize) -> Option<FreeRow> {
        match rho {
            1 => Some(FreeRow::custom("(m11, 0)", 2, |_, m| Ok(vec![m[(1, 1)], 0.0]))),
            2 => Some(FreeRow::custom("(2*m22^2, 0, 0)", 3, |_, m| {
                Ok(vec![2.0 * m[(2, 2)] * m[(2, 2)], 0.0, 0.0])
            })),
            _ => None,
        }
    }

    /// `b_ρ,0 = 1`, all other entries zero.
    pub fn leading_unit(rho: usize) -> FreeRow {
        let mut row = vec![0.0; rho + 1];
        row[0] = 1.0;
        FreeRow::constant(row)
    }

    pub fn constant(values: Vec<f64>) -> FreeRow {
        let label = format!("{values:?}");
        let len = values.len();
        FreeRow::custom(label, len, move |_, _| Ok(values.clone()))
    }

    /// One expression in `z` per entry.
    pub fn from_exprs(exprs: Vec<Expr>) -> FreeRow {
        let label = exprs
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        let len = exprs.len();
        FreeRow::custom(format!("({label})"), len, move |z, _| {
            exprs.iter().map(|e| e.eval(z)).collect()
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn eval(&self, z: f64, m0: &DMatrix<f64>) -> Result<Vec<f64>> {
        let row = (self.f)(z, m0)?;
        if row.len() != self.len {
            return Err(Error::Dimension {
                expected: self.len,
                found: row.len(),
            });
        }
        Ok(row)
    }
}

impl fmt::Debug for FreeRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("FreeRow").field(&self.label).finish()
    }
}

/// `B(z)` and `C(z) = B(z)·A(z)`.
#[derive(Clone, Debug)]
pub struct SymmetrizerPair {
    pub b: MatrixFunction,
    pub c: MatrixFunction,
    pub rho: usize,
    pub provenance: Provenance,
    pub free_row: FreeRow,
}

impl SymmetrizerPair {
    pub fn from_b(b: MatrixFunction, provenance: Provenance, free_row: FreeRow) -> Self {
        let rho = b.dim() - 1;
        let bb = b.clone();
        let c = MatrixFunction::new(b.dim(), b.degree().map(|d| d + 1), move |z| {
            Ok(bb.eval(z)? * leibniz_matrix(rho, z))
        });
        SymmetrizerPair {
            b,
            c,
            rho,
            provenance,
            free_row,
        }
    }

    pub fn b_hat(&self) -> MatrixFunction {
        hat_b(&self.b)
    }

    /// Pointwise `B(z)⁻¹`, failing where `B` is numerically singular.
    pub fn b_inverse(&self, singular_tol: f64) -> MatrixFunction {
        let b = self.b.clone();
        MatrixFunction::new(b.dim(), None, move |z| invert_checked(&b.eval(z)?, z, singular_tol))
    }
}

/// Tolerances shared by the builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Chebyshev points used to scan `det B`.
    pub grid_points: usize,
    pub singular_tol: f64,
    pub validation_points: usize,
    pub min_eigenvalue: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            grid_points: DEFAULT_GRID_POINTS,
            singular_tol: DEFAULT_SINGULAR_TOL,
            validation_points: DEFAULT_VALIDATION_POINTS,
            min_eigenvalue: DEFAULT_MIN_EIGENVALUE,
        }
    }
}

pub(crate) fn require_full_rank(w: &MatrixWeight, opts: &BuildOptions) -> Result<()> {
    let report = validate_weight(w, opts.validation_points, opts.min_eigenvalue);
    let first = report.failing().next().map(|check| {
        Error::Weight(format!(
            "{} failed (value {:e} at z = {:?})",
            check.name, check.max_residual, check.worst_point
        ))
    });
    first.map_or(Ok(()), Err)
}

/// `|det B(z)| / ‖B(z)‖∞^(ρ+1)` on the grid, or the first point where `B`
/// cannot be evaluated.
fn relative_dets(b: &MatrixFunction, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = b.dim() as i32;
    par::try_map(grid, |&z| {
        let m = b.eval(z)?;
        let det = m.determinant();
        let norm = inf_norm(&m).powi(n);
        Ok((det, if norm > 0.0 { det.abs() / norm } else { 0.0 }))
    })
}

pub(crate) fn require_nonsingular(b: &MatrixFunction, grid: &[f64], singular_tol: f64) -> Result<()> {
    let dets = relative_dets(b, grid)?;
    match dets.iter().zip(grid).find(|((_, rel), _)| !(*rel >= singular_tol)) {
        None => Ok(()),
        Some(((det, _), &z)) => Err(Error::Singular { z, det: det.abs() }),
    }
}

/// `B(z)⁻¹` by LU with partial pivoting, rejecting `|det| < 1e-12·‖B‖∞^(ρ+1)`.
pub fn invert_b_at(b: &MatrixFunction, z: f64) -> Result<DMatrix<f64>> {
    invert_checked(&b.eval(z)?, z, DEFAULT_SINGULAR_TOL)
}

fn max_with_point(grid: &[f64], values: &[f64]) -> (f64, Option<f64>) {
    par::argmax(values).map_or((0.0, None), |(i, v)| (v, Some(grid[i])))
}

/// Normalized asymmetry of `B·M₀`, `B̂·M₀` and `C·M₀` over the grid.
pub fn check_symmetry(
    pair: &SymmetrizerPair,
    w: &MatrixWeight,
    grid: &[f64],
    tol: f64,
) -> VerificationReport {
    let mut report = VerificationReport::new("check_symmetry");
    let samples = par::map(grid, |&z| -> Result<[f64; 3]> {
        let m = w.eval(z)?;
        let b = pair.b.eval(z)?;
        let c = pair.c.eval(z)?;
        Ok([
            asymmetry(&(&b * &m)),
            asymmetry(&(hat_matrix(&b) * &m)),
            asymmetry(&(c * &m)),
        ])
    });
    let names = ["B_M0_symmetry", "Bhat_M0_symmetry", "C_M0_symmetry"];
    if let Some((i, Err(e))) = samples.iter().enumerate().find(|(_, s)| s.is_err()) {
        for name in names {
            report.push(CheckRecord::failed(name, e.to_string()).at(Some(grid[i])));
        }
        return report;
    }
    let samples: Vec<[f64; 3]> = samples.into_iter().map(|s| s.expect("checked")).collect();
    for (k, name) in names.iter().enumerate() {
        let column: Vec<f64> = samples.iter().map(|s| s[k]).collect();
        let (v, z) = max_with_point(grid, &column);
        report.push(CheckRecord::upper(*name, v, tol).at(z));
    }
    report
}

/// `max ‖B⁻¹C − A‖∞ / (1 + ‖A‖∞)` over the grid. The reversed product
/// `CB⁻¹ − A`, which need not vanish, is recorded for information.
pub fn verify_factorization(
    pair: &SymmetrizerPair,
    grid: &[f64],
    tol: f64,
    singular_tol: f64,
) -> VerificationReport {
    let mut report = VerificationReport::new("verify_factorization");
    let rho = pair.rho;
    let samples = par::map(grid, |&z| -> Result<(f64, f64)> {
        let b = pair.b.eval(z)?;
        let c = pair.c.eval(z)?;
        let inv = invert_checked(&b, z, singular_tol)?;
        let a = leibniz_matrix(rho, z);
        let scale = 1.0 + inf_norm(&a);
        Ok((
            inf_norm(&(&inv * &c - &a)) / scale,
            inf_norm(&(&c * &inv - &a)) / scale,
        ))
    });
    if let Some((i, Err(e))) = samples.iter().enumerate().find(|(_, s)| s.is_err()) {
        report.push(CheckRecord::failed("factorization_Binv_C_eq_A", e.to_string()).at(Some(grid[i])));
        return report;
    }
    let samples: Vec<(f64, f64)> = samples.into_iter().map(|s| s.expect("checked")).collect();
    let left: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let right: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (v, z) = max_with_point(grid, &left);
    report.push(CheckRecord::upper("factorization_Binv_C_eq_A", v, tol).at(z));
    let (v, z) = max_with_point(grid, &right);
    report.push(CheckRecord::info("reversed_C_Binv_minus_A", v).at(z));
    report
}

/// Smallest `|det B(z)| / ‖B(z)‖∞^(ρ+1)` over the grid, plus the smallest raw
/// `|det B(z)|`.
pub fn det_scan(pair: &SymmetrizerPair, grid: &[f64], singular_tol: f64) -> VerificationReport {
    let mut report = VerificationReport::new("det_scan");
    let dets = match relative_dets(&pair.b, grid) {
        Ok(d) => d,
        Err(e) => {
            report.push(CheckRecord::failed("det_B_nonzero", e.to_string()));
            return report;
        }
    };
    let neg_rel: Vec<f64> = dets.iter().map(|(_, r)| -r).collect();
    let (v, z) = max_with_point(grid, &neg_rel);
    let min_abs = dets.iter().map(|(d, _)| d.abs()).fold(f64::INFINITY, f64::min);
    report.push(
        CheckRecord::lower("det_B_nonzero", -v, singular_tol)
            .at(z)
            .with_detail(json!({ "min_abs_det": min_abs })),
    );
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leibniz_examples() {
        assert_eq!(leibniz_matrix(0, 3.0), DMatrix::from_element(1, 1, 3.0));
        assert_eq!(
            leibniz_matrix(2, 5.0),
            DMatrix::from_row_slice(3, 3, &[5.0, 1.0, 0.0, 0.0, 5.0, 2.0, 0.0, 0.0, 5.0])
        );
        assert_eq!(
            leibniz_matrix(1, 0.5),
            DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.5])
        );
    }

    #[test]
    fn hat_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(hat_matrix(&i2), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        let m11 = 2.5;
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, m11, 0.0]);
        assert_eq!(hat_matrix(&b), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, m11]));
        let b = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 2.0, 0.0, 1.0, 0.0, 2.0, 0.0, 0.0]);
        assert_eq!(
            hat_matrix(&b),
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 2.0, 0.0])
        );
    }

    #[test]
    fn c_equals_z_b_plus_hat() {
        let b = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, 1.5, -1.0, 4.0, 2.0]);
        let z = 0.37;
        let lhs = &b * leibniz_matrix(2, z);
        let rhs = &b * z + hat_matrix(&b);
        assert!((lhs - rhs).amax() < 1e-15);
    }

    #[test]
    fn free_rows() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.2, 0.1, 3.0, 0.3, 0.2, 0.3, 1.5]);
        assert_eq!(FreeRow::closed_form_default(2).unwrap().eval(0.0, &m).unwrap(), vec![4.5, 0.0, 0.0]);
        assert!(FreeRow::closed_form_default(3).is_none());
        assert_eq!(FreeRow::leading_unit(3).eval(0.0, &m).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let row = FreeRow::from_exprs(vec![crate::expr::parse_expr("z+1").unwrap()]);
        assert_eq!(row.eval(2.0, &m).unwrap(), vec![3.0]);
        let bad = FreeRow::custom("short", 2, |_, _| Ok(vec![1.0]));
        assert!(matches!(bad.eval(0.0, &m), Err(Error::Dimension { .. })));
    }
}
