//! Seeded test weights: `M₀(z) = L(z)L(z)ᵀ + 0.1·I` with random polynomial
//! entries in `L`, which keeps the minimum eigenvalue at or above 0.1.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::poly::Polynomial;
use crate::sobolev::MatrixWeight;

pub const SPD_SHIFT: f64 = 0.1;

/// Entries of a random SPD polynomial weight of size `(ρ+1)×(ρ+1)`; each
/// entry of `L` has degree at most `l_degree` with coefficients in `[-1, 1]`.
pub fn spd_polynomial_entries(rho: usize, l_degree: usize, seed: u64) -> Vec<Vec<Polynomial>> {
    let n = rho + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l: Vec<Vec<Polynomial>> = (0..n)
        .map(|_| (0..n).map(|_| Polynomial::random(l_degree, &mut rng)).collect())
        .collect();
    let mut m = vec![vec![Polynomial::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let mut acc = if i == j {
                Polynomial::constant(SPD_SHIFT)
            } else {
                Polynomial::zero()
            };
            for k in 0..n {
                acc = &acc + &(&l[i][k] * &l[j][k]);
            }
            m[j][i] = acc.clone();
            m[i][j] = acc;
        }
    }
    m
}

pub fn spd_polynomial_weight(
    rho: usize,
    l_degree: usize,
    interval: (f64, f64),
    seed: u64,
) -> Result<MatrixWeight> {
    MatrixWeight::from_polynomials(interval, &spd_polynomial_entries(rho, l_degree, seed))
}

/// Expression texts for the same weight, suitable for a JSON config.
pub fn spd_polynomial_texts(rho: usize, l_degree: usize, seed: u64) -> Vec<Vec<String>> {
    spd_polynomial_entries(rho, l_degree, seed)
        .iter()
        .map(|row| row.iter().map(|p| p.to_expr().to_string()).collect())
        .collect()
}

/// Example weight `diag(1, m₁₁)` with `m₁₁ = "z^2+1"` on `[-1, 1]`.
pub fn example_diag_weight() -> MatrixWeight {
    MatrixWeight::parse((-1.0, 1.0), &[vec!["1", "0"], vec!["0", "z^2+1"]], "1")
        .expect("static weight parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    #[test]
    fn entries_symmetric_and_bounded_below() {
        let w = spd_polynomial_weight(2, 3, (-1.0, 1.0), 7).unwrap();
        assert_eq!(w.degree(), Some(6));
        for k in 0..50 {
            let z = -1.0 + 2.0 * k as f64 / 49.0;
            let m = w.eval_raw(z).unwrap();
            assert_eq!(m, m.transpose());
            let min = SymmetricEigen::new(m).eigenvalues.min();
            assert!(min >= SPD_SHIFT - 1e-12, "{min}");
        }
    }

    #[test]
    fn text_form_matches() {
        let texts = spd_polynomial_texts(1, 2, 11);
        let w = MatrixWeight::parse((-1.0, 1.0), &texts, "1").unwrap();
        let direct = spd_polynomial_weight(1, 2, (-1.0, 1.0), 11).unwrap();
        for z in [-1.0, -0.2, 0.5, 1.0] {
            assert_eq!(w.eval(z).unwrap(), direct.eval(z).unwrap());
        }
    }
}
