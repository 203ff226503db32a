//! Monic Sobolev orthogonal polynomials via Cholesky on the monomial Gram
//! matrix.

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_checked, lower_triangular_inverse};
use crate::poly::Polynomial;
use crate::report::{CheckRecord, VerificationReport};
use crate::sobolev::MatrixWeight;

/// Relative Cholesky pivot floor.
pub const PIVOT_TOL: f64 = 1e-10;
pub const MAX_DEGREE: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolevOPSet {
    /// Monic `y₀ … y_N`, ascending coefficients.
    pub polys: Vec<Polynomial>,
    /// `Aₙ = (yₙ, yₙ)` recomputed by quadrature.
    pub norms: Vec<f64>,
    /// `Aₙ` as delivered by the Cholesky pivots.
    pub cholesky_norms: Vec<f64>,
    /// `max_{n≠m} |(yₙ, yₘ)| / √(AₙAₘ)`.
    pub gram_residual: f64,
}

impl SobolevOPSet {
    pub fn degree(&self) -> usize {
        self.polys.len() - 1
    }
}

/// Falling factorial `i (i-1) … (i-r+1)`.
fn falling(i: usize, r: usize) -> f64 {
    (0..r).map(|k| (i - k) as f64).product()
}

/// Gram matrix `G` of the given polynomials under the Sobolev product, by
/// one vectorized quadrature over the upper triangle.
pub fn polynomial_gram(polys: &[Polynomial], w: &MatrixWeight) -> Result<DMatrix<f64>> {
    let n = polys.len();
    let rho = w.rho();
    let jets: Vec<Vec<Polynomial>> = polys
        .iter()
        .map(|p| {
            let mut out = Vec::with_capacity(rho + 1);
            let mut cur = p.clone();
            for _ in 0..=rho {
                let next = cur.derivative();
                out.push(cur);
                cur = next;
            }
            out
        })
        .collect();
    let max_deg = polys.iter().map(Polynomial::degree).max().unwrap_or(0);
    gram_from_jets(n, rho, 2 * max_deg, w, |z| {
        DMatrix::from_fn(n, rho + 1, |i, r| jets[i][r].eval(z))
    })
}

fn gram_from_jets<F>(n: usize, rho: usize, degree: usize, w: &MatrixWeight, jets_at: F) -> Result<DMatrix<f64>>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let out = w.integrate_weighted(Some(degree), |z, m| {
        let j = jets_at(z);
        debug_assert_eq!(j.ncols(), rho + 1);
        let g = &j * m * j.transpose();
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for k in i..n {
                upper.push(g[(i, k)]);
            }
        }
        Ok(upper)
    })?;
    let mut g = DMatrix::zeros(n, n);
    let mut it = out.value.into_iter();
    for i in 0..n {
        for k in i..n {
            let v = it.next().expect("upper triangle length");
            g[(i, k)] = v;
            g[(k, i)] = v;
        }
    }
    Ok(g)
}

/// `Gᵢⱼ = (zⁱ, zʲ)_{W²(M)}` for `0 ≤ i, j ≤ N`.
pub fn gram_matrix(degree: usize, w: &MatrixWeight) -> Result<DMatrix<f64>> {
    let n = degree + 1;
    let rho = w.rho();
    gram_from_jets(n, rho, 2 * degree, w, |z| {
        DMatrix::from_fn(n, rho + 1, |i, r| {
            if r > i {
                0.0
            } else {
                falling(i, r) * z.powi((i - r) as i32)
            }
        })
    })
}

fn max_offdiag_normalized(g: &DMatrix<f64>, norms: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            if i != j {
                worst = worst.max(g[(i, j)].abs() / (norms[i] * norms[j]).sqrt());
            }
        }
    }
    worst
}

/// Monic Sobolev orthogonal polynomials `y₀ … y_N` and their norms.
pub fn sobolev_ops(degree: usize, w: &MatrixWeight) -> Result<SobolevOPSet> {
    let g = gram_matrix(degree, w)?;
    let l = cholesky_checked(&g, PIVOT_TOL)?;
    let linv = lower_triangular_inverse(&l);
    let n = degree + 1;
    let polys: Vec<Polynomial> = (0..n)
        .map(|k| {
            let lkk = l[(k, k)];
            let mut coeffs: Vec<f64> = (0..=k).map(|j| lkk * linv[(k, j)]).collect();
            coeffs[k] = 1.0;
            Polynomial::new(coeffs)
        })
        .collect();
    let cholesky_norms: Vec<f64> = (0..n).map(|k| l[(k, k)] * l[(k, k)]).collect();
    let direct = polynomial_gram(&polys, w)?;
    let norms: Vec<f64> = (0..n).map(|k| direct[(k, k)]).collect();
    if let Some(k) = norms.iter().position(|a| !(*a > 0.0)) {
        return Err(Error::Positivity {
            index: k,
            pivot: norms[k],
        });
    }
    let gram_residual = max_offdiag_normalized(&direct, &norms);
    Ok(SobolevOPSet {
        polys,
        norms,
        cholesky_norms,
        gram_residual,
    })
}

/// Recomputes the Gram matrix of `ops.polys` by quadrature and compares it
/// with `diag(Aₙ)`.
pub fn check_orthogonality(ops: &SobolevOPSet, w: &MatrixWeight, tol: f64) -> VerificationReport {
    let mut report = VerificationReport::new("check_orthogonality");
    let g = match polynomial_gram(&ops.polys, w) {
        Ok(g) => g,
        Err(e) => {
            report.push(CheckRecord::failed("orthogonality", e.to_string()));
            return report;
        }
    };
    let offdiag = max_offdiag_normalized(&g, &ops.norms);
    let diag = (0..g.nrows())
        .map(|k| (g[(k, k)] - ops.norms[k]).abs() / ops.norms[k])
        .fold(0.0, f64::max);
    report.push(CheckRecord::upper("orthogonality_offdiag", offdiag, tol));
    report.push(CheckRecord::upper("orthogonality_diagonal", diag, tol));
    let chol = ops
        .norms
        .iter()
        .zip(&ops.cholesky_norms)
        .map(|(a, c)| (a - c).abs() / a)
        .fold(0.0, f64::max);
    report.push(CheckRecord::info("cholesky_norm_consistency", chol));
    report.insert_data("ops_gram_degree", json!(ops.degree()));
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sobolev::sobolev_inner;
    use approx::assert_relative_eq;

    fn identity(rho: usize) -> MatrixWeight {
        MatrixWeight::identity(rho, (-1.0, 1.0)).unwrap()
    }

    #[test]
    fn gram_examples() {
        let g = gram_matrix(0, &identity(1)).unwrap();
        assert_relative_eq!(g[(0, 0)], 2.0, epsilon = 1e-15);
        let g = gram_matrix(1, &identity(1)).unwrap();
        assert_relative_eq!(g[(0, 0)], 2.0, epsilon = 1e-15);
        assert!(g[(0, 1)].abs() < 1e-16);
        assert_relative_eq!(g[(1, 1)], 8.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn gram_matches_pairwise_inner_products() {
        let w = crate::fixtures::spd_polynomial_weight(2, 3, (-1.0, 1.0), 5).unwrap();
        let g = gram_matrix(4, &w).unwrap();
        for i in 0..=4 {
            for j in 0..=4 {
                let direct =
                    sobolev_inner(&Polynomial::monomial(i), &Polynomial::monomial(j), &w).unwrap();
                assert_relative_eq!(g[(i, j)], direct, max_relative = 1e-13, epsilon = 1e-14);
            }
        }
        assert!(cholesky_checked(&g, PIVOT_TOL).is_ok());
    }

    // Hand Gram–Schmidt with symbolic integrals over [-1, 1], ρ = 1, M₀ = I:
    //   (1,1) = 2, (z,z) = ∫z² + ∫1 = 8/3, (z²,1) = 2/3, (z²,z²) = 2/5 + 8/3.
    //   y₂ = z² − (2/3)/2 = z² − 1/3,
    //   A₂ = ∫(z² − 1/3)² + ∫(2z)² = 8/45 + 8/3 = 128/45.
    #[test]
    fn identity_weight_rho1_low_degrees() {
        let ops = sobolev_ops(2, &identity(1)).unwrap();
        assert_eq!(ops.polys[0].coeffs(), &[1.0]);
        assert_relative_eq!(ops.norms[0], 2.0, epsilon = 1e-14);
        assert!(ops.polys[1].coeffs()[0].abs() < 1e-15);
        assert_relative_eq!(ops.norms[1], 8.0 / 3.0, epsilon = 1e-14);
        let y2 = ops.polys[2].coeffs();
        assert_relative_eq!(y2[0], -1.0 / 3.0, epsilon = 1e-14);
        assert!(y2[1].abs() < 1e-15);
        assert_eq!(y2[2], 1.0);
        assert_relative_eq!(ops.norms[2], 128.0 / 45.0, epsilon = 1e-13);
    }

    #[test]
    fn scalar_case_is_monic_legendre() {
        let ops = sobolev_ops(3, &identity(0)).unwrap();
        let y3 = ops.polys[3].coeffs();
        assert!(y3[0].abs() < 1e-12 && y3[2].abs() < 1e-12);
        assert!((y3[1] + 0.6).abs() < 1e-12);
        assert!((ops.polys[2].coeffs()[0] + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn degree_zero_norm_is_integral_of_m00() {
        let w = crate::fixtures::spd_polynomial_weight(1, 2, (-1.0, 1.0), 9).unwrap();
        let ops = sobolev_ops(0, &w).unwrap();
        let direct = w
            .integrate_weighted(Some(0), |_, m| Ok(vec![m[(0, 0)]]))
            .unwrap()
            .value[0];
        assert_relative_eq!(ops.norms[0], direct, max_relative = 1e-14);
        assert_eq!(ops.gram_residual, 0.0);
    }

    #[test]
    fn orthogonality_report() {
        let w = identity(1);
        let ops = sobolev_ops(10, &w).unwrap();
        let r = check_orthogonality(&ops, &w, 1e-10);
        assert!(r.pass, "{:?}", r.checks);
        for (k, y) in ops.polys.iter().enumerate() {
            assert_eq!(y.degree(), k);
            assert_eq!(y.leading(), 1.0);
        }
        for (a, c) in ops.norms.iter().zip(&ops.cholesky_norms) {
            assert!((a - c).abs() <= 1e-10 * a);
        }

        let mut corrupted = ops.clone();
        let mut c = corrupted.polys[2].coeffs().to_vec();
        c[0] += 0.05;
        corrupted.polys[2] = Polynomial::new(c);
        assert!(!check_orthogonality(&corrupted, &w, 1e-10).pass);

        let ops0 = sobolev_ops(0, &w).unwrap();
        let r = check_orthogonality(&ops0, &w, 1e-10);
        assert_eq!(r.check("orthogonality_offdiag").unwrap().max_residual, 0.0);
    }

    #[test]
    fn high_degree_fails_cleanly_or_passes() {
        match sobolev_ops(MAX_DEGREE, &identity(1)) {
            Ok(ops) => assert!(ops.norms.iter().all(|a| *a > 0.0)),
            Err(Error::Positivity { .. }) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
