//! Pointwise numerical solution of the symmetry system for any ρ ≥ 1.
//!
//! For every pair `j < i` the conditions `(B M₀)ᵢⱼ = (B M₀)ⱼᵢ` and
//! `(B̂ M₀)ᵢⱼ = (B̂ M₀)ⱼᵢ` give `ρ(ρ+1)` linear equations in the entries of
//! `B`. With row ρ pinned to a free row the remaining `ρ(ρ+1)` unknowns form
//! a square system, solved here by SVD.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use super::{hat_matrix, require_full_rank, BuildOptions, FreeRow, Provenance, SymmetrizerPair};
use crate::error::{Error, Result};
use crate::linalg::{asymmetry, inf_norm};
use crate::par;
use crate::sobolev::{MatrixFunction, MatrixWeight};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Diagnostics at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralPoint {
    pub z: f64,
    pub rank: usize,
    pub unknowns: usize,
    /// `σ_max / σ_min` of the system matrix.
    pub condition: f64,
    /// Full rank: the free row determines `B(z)` uniquely.
    pub solvable: bool,
    /// `‖Kx − r‖∞ / max(1, ‖r‖∞, ‖K‖∞‖x‖∞)` of the solved system.
    pub linear_residual: f64,
    /// `max(asym(B M₀), asym(B̂ M₀))` of the assembled `B(z)`.
    pub symmetry_residual: f64,
    pub residual: f64,
    pub abs_det: f64,
    /// `|det B| / ‖B‖∞^(ρ+1)`.
    pub rel_det: f64,
    pub nonsingular: bool,
    /// `B(z)`, row-major.
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GeneralSolution {
    pub pair: SymmetrizerPair,
    pub points: Vec<GeneralPoint>,
    pub min_abs_det: f64,
    pub min_rel_det: f64,
    /// `max_k ‖B(z_{k+1}) − B(z_k)‖∞ / (z_{k+1} − z_k)`.
    pub continuity: f64,
    /// Largest residual over the solvable points.
    pub max_residual: f64,
    pub all_solvable: bool,
    pub all_nonsingular: bool,
}

impl GeneralSolution {
    /// Summary fields, without the per-point list.
    pub fn summary_json(&self) -> Value {
        json!({
            "rho": self.pair.rho,
            "free_row": self.pair.free_row.label(),
            "grid_points": self.points.len(),
            "solvable_points": self.points.iter().filter(|p| p.solvable).count(),
            "nonsingular_points": self.points.iter().filter(|p| p.nonsingular).count(),
            "min_abs_det": self.min_abs_det,
            "min_rel_det": self.min_rel_det,
            "continuity": self.continuity,
            "max_residual": self.max_residual,
            "all_solvable": self.all_solvable,
            "all_nonsingular": self.all_nonsingular,
        })
    }
}

struct PointSolve {
    b: DMatrix<f64>,
    rank: usize,
    condition: f64,
    linear_residual: f64,
}

fn idx(rho: usize, i: usize, k: usize) -> usize {
    i * (rho + 1) + k
}

/// Square system `K x = r` at one point; `x` holds rows `0..ρ` of `B`.
fn assemble(m: &DMatrix<f64>, last: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let n = m.nrows();
    let rho = n - 1;
    let unknowns = rho * n;
    let mut k = DMatrix::zeros(unknowns, unknowns);
    let mut r = DVector::zeros(unknowns);
    let mut eq = 0;
    // Adds `coef · b_{i,col}` to equation `eq`.
    let put = |k: &mut DMatrix<f64>, r: &mut DVector<f64>, eq: usize, i: usize, col: usize, coef: f64| {
        if i == rho {
            r[eq] -= coef * last[col];
        } else {
            k[(eq, idx(rho, i, col))] += coef;
        }
    };
    for i in 1..n {
        for j in 0..i {
            for c in 0..n {
                put(&mut k, &mut r, eq, i, c, m[(c, j)]);
                put(&mut k, &mut r, eq, j, c, -m[(c, i)]);
            }
            eq += 1;
            for c in 1..n {
                let f = c as f64;
                put(&mut k, &mut r, eq, i, c - 1, f * m[(c, j)]);
                put(&mut k, &mut r, eq, j, c - 1, -f * m[(c, i)]);
            }
            eq += 1;
        }
    }
    debug_assert_eq!(eq, unknowns);
    (k, r)
}

fn solve_point(m: &DMatrix<f64>, last: &[f64]) -> Result<PointSolve> {
    let n = m.nrows();
    if last.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: last.len(),
        });
    }
    let (k, r) = assemble(m, last);
    let svd = k.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = RANK_TOL * smax;
    let rank = svd.rank(eps);
    let solve = |rhs: &DVector<f64>| {
        svd.solve(rhs, eps)
            .map_err(|e| Error::InvalidArgument(format!("svd solve failed: {e}")))
    };
    let mut x = if smax > 0.0 { solve(&r)? } else { DVector::zeros(r.len()) };
    if smax > 0.0 {
        // One step of iterative refinement.
        let correction = solve(&(&r - &k * &x))?;
        x += correction;
    }
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let res = (&k * &x - &r).amax();
    let scale = 1f64.max(r.amax()).max(inf_norm(&k) * x.amax());
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        for c in 0..n {
            b[(i, c)] = x[idx(n - 1, i, c)];
        }
    }
    for c in 0..n {
        b[(n - 1, c)] = last[c];
    }
    Ok(PointSolve {
        b,
        rank,
        condition,
        linear_residual: res / scale,
    })
}

pub fn solve_b_general(w: &MatrixWeight, free: Option<FreeRow>, grid: &[f64]) -> Result<GeneralSolution> {
    solve_b_general_with(w, free, grid, &BuildOptions::default())
}

/// Solves for `B(z)` on `grid` with row ρ set to `free` (default
/// `b_ρ,0 = 1`, others 0). Rank deficiency or singular `B` at a point is
/// recorded in the diagnostics, not raised. The returned pair evaluates `B`
/// by solving the same system at any `z`.
pub fn solve_b_general_with(
    w: &MatrixWeight,
    free: Option<FreeRow>,
    grid: &[f64],
    opts: &BuildOptions,
) -> Result<GeneralSolution> {
    let rho = w.rho();
    if rho < 1 {
        return Err(Error::InvalidArgument("general solver needs rho >= 1".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    require_full_rank(w, opts)?;
    let row = free.unwrap_or_else(|| FreeRow::leading_unit(rho));
    if row.len() != rho + 1 {
        return Err(Error::Dimension {
            expected: rho + 1,
            found: row.len(),
        });
    }
    let n = rho + 1;
    let singular_tol = opts.singular_tol;

    let points = par::try_map(grid, |&z| -> Result<GeneralPoint> {
        let m = w.eval(z)?;
        let last = row.eval(z, &m)?;
        let s = solve_point(&m, &last)?;
        let symmetry_residual = asymmetry(&(&s.b * &m)).max(asymmetry(&(hat_matrix(&s.b) * &m)));
        let det = s.b.determinant();
        let norm = inf_norm(&s.b).powi(n as i32);
        let rel_det = if norm > 0.0 { det.abs() / norm } else { 0.0 };
        let unknowns = rho * n;
        Ok(GeneralPoint {
            z,
            rank: s.rank,
            unknowns,
            condition: s.condition,
            solvable: s.rank == unknowns,
            linear_residual: s.linear_residual,
            symmetry_residual,
            residual: s.linear_residual.max(symmetry_residual),
            abs_det: det.abs(),
            rel_det,
            nonsingular: rel_det >= singular_tol,
            b: s.b.transpose().as_slice().to_vec(),
        })
    })?;

    let mut continuity = 0.0f64;
    for pair in points.windows(2) {
        let dz = pair[1].z - pair[0].z;
        let jump = DMatrix::from_row_slice(n, n, &pair[1].b) - DMatrix::from_row_slice(n, n, &pair[0].b);
        if dz != 0.0 {
            continuity = continuity.max(inf_norm(&jump) / dz.abs());
        }
    }
    let min_abs_det = points.iter().map(|p| p.abs_det).fold(f64::INFINITY, f64::min);
    let min_rel_det = points.iter().map(|p| p.rel_det).fold(f64::INFINITY, f64::min);
    let max_residual = points
        .iter()
        .filter(|p| p.solvable)
        .map(|p| p.residual)
        .fold(0.0, f64::max);
    let all_solvable = points.iter().all(|p| p.solvable);
    let all_nonsingular = points.iter().all(|p| p.nonsingular);

    let weight = w.clone();
    let r = row.clone();
    let b = MatrixFunction::new(n, None, move |z| {
        let m = weight.eval(z)?;
        Ok(solve_point(&m, &r.eval(z, &m)?)?.b)
    });
    Ok(GeneralSolution {
        pair: SymmetrizerPair::from_b(b, Provenance::GeneralSolver, row),
        points,
        min_abs_det,
        min_rel_det,
        continuity,
        max_residual,
        all_solvable,
        all_nonsingular,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example_diag_weight, spd_polynomial_weight};
    use crate::quadrature::chebyshev_grid;
    use crate::symmetrizer::{build_b_rho1, build_b_rho2, check_rho2_system};

    #[test]
    fn system_is_square() {
        for rho in 1..5 {
            let m = DMatrix::identity(rho + 1, rho + 1);
            let (k, r) = assemble(&m, &vec![1.0; rho + 1]);
            assert_eq!(k.nrows(), rho * (rho + 1));
            assert_eq!(k.ncols(), rho * (rho + 1));
            assert_eq!(r.len(), rho * (rho + 1));
        }
    }

    #[test]
    fn reproduces_rho1_closed_form() {
        let w = example_diag_weight();
        let grid = chebyshev_grid(51, -1.0, 1.0);
        let sol = solve_b_general(&w, FreeRow::closed_form_default(1), &grid).unwrap();
        let closed = build_b_rho1(&w, None).unwrap();
        assert!(sol.all_solvable && sol.all_nonsingular);
        for p in &sol.points {
            let want = closed.b.eval(p.z).unwrap();
            let got = DMatrix::from_row_slice(2, 2, &p.b);
            assert!((want - got).amax() <= 1e-12);
        }
    }

    #[test]
    fn reproduces_rho2_closed_form() {
        let w = spd_polynomial_weight(2, 3, (-1.0, 1.0), 21).unwrap();
        let grid = chebyshev_grid(41, -1.0, 1.0);
        let sol = solve_b_general(&w, FreeRow::closed_form_default(2), &grid).unwrap();
        let closed = build_b_rho2(&w, None).unwrap();
        for p in &sol.points {
            let want = closed.b.eval(p.z).unwrap();
            let got = DMatrix::from_row_slice(3, 3, &p.b);
            assert!((&want - got).amax() <= 1e-10 * want.amax().max(1.0), "z = {}", p.z);
        }
        let r = check_rho2_system(&sol.pair.b, &w, 0.1).unwrap();
        assert!(r.iter().all(|x| *x <= 1e-10));
    }

    #[test]
    fn rho3_probe_is_mechanically_sound() {
        let w = spd_polynomial_weight(3, 3, (-1.0, 1.0), 5).unwrap();
        let grid = chebyshev_grid(21, -1.0, 1.0);
        let sol = solve_b_general(&w, None, &grid).unwrap();
        assert_eq!(sol.points.len(), 21);
        for p in sol.points.iter().filter(|p| p.solvable) {
            assert!(p.residual <= 1e-10, "{p:?}");
        }
        let again = solve_b_general(&w, None, &grid).unwrap();
        assert_eq!(sol.points, again.points);
    }

    #[test]
    fn zero_row_gives_zero_singular_b() {
        let w = MatrixWeight::identity(2, (-1.0, 1.0)).unwrap();
        let grid = chebyshev_grid(5, -1.0, 1.0);
        let sol = solve_b_general(&w, Some(FreeRow::constant(vec![0.0; 3])), &grid).unwrap();
        assert!(!sol.all_nonsingular);
        assert_eq!(sol.min_abs_det, 0.0);
    }

    #[test]
    fn rejects_rho0_and_bad_row() {
        let w = MatrixWeight::identity(0, (-1.0, 1.0)).unwrap();
        assert!(solve_b_general(&w, None, &[0.0]).is_err());
        let w = MatrixWeight::identity(1, (-1.0, 1.0)).unwrap();
        let r = solve_b_general(&w, Some(FreeRow::constant(vec![1.0])), &[0.0]);
        assert!(matches!(r, Err(Error::Dimension { .. })));
    }
}
