//! The operators 𝒜, ℬ, 𝒞 on jets, the indefinite form σ, and the
//! orthogonality relations of Sobolev polynomials under σ.

use nalgebra::{DMatrix, RowDVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, invert_checked};
use crate::orthopoly::{polynomial_gram, SobolevOPSet};
use crate::par;
use crate::poly::Polynomial;
use crate::report::{CheckRecord, VerificationReport};
use crate::sobolev::{jet, l2m_inner, sobolev_inner, MatrixFunction, MatrixWeight, VectorFunction};
use crate::symmetrizer::{leibniz_matrix, SymmetrizerPair, DEFAULT_SINGULAR_TOL};

pub const DEFAULT_SIGMA_TRIALS: usize = 50;
pub const DEFAULT_SIGMA_DEGREE: usize = 8;
pub const DEFAULT_SEED: u64 = 0x5EED;

/// `z ↦ u(z)·D(z)`.
pub fn apply_matrix_op(u: &VectorFunction, d: &MatrixFunction) -> Result<VectorFunction> {
    if u.dim() != d.dim() {
        return Err(Error::Dimension {
            expected: d.dim(),
            found: u.dim(),
        });
    }
    let (u, d) = (u.clone(), d.clone());
    let degree = u.degree().zip(d.degree()).map(|(a, b)| a + b);
    Ok(VectorFunction::from_fn(u.dim(), degree, move |z| Ok(u.eval(z)? * d.eval(z)?)))
}

/// `‖jet(p)·B⁻¹·C − jet(zp)‖ / ‖jet(zp)‖` in `L²(M)`; zero when `p = 0`.
pub fn verify_mult_operator(
    p: &Polynomial,
    pair: &SymmetrizerPair,
    w: &MatrixWeight,
    singular_tol: f64,
) -> Result<f64> {
    if p.is_zero() {
        return Ok(0.0);
    }
    let rho = w.rho();
    let u = jet(p, rho);
    let target = jet(&p.mul_z(), rho);
    let out = w.integrate_weighted(None, |z, m| {
        let b = pair.b.eval(z)?;
        let inv = invert_checked(&b, z, singular_tol)?;
        let v = u.eval(z)? * inv * pair.c.eval(z)?;
        let t = target.eval(z)?;
        let d = &v - &t;
        Ok(vec![(&d * m).dot(&d), (&t * m).dot(&t)])
    })?;
    let (num, den) = (out.value[0].max(0.0), out.value[1]);
    Ok(if den > 0.0 { (num / den).sqrt() } else { 0.0 })
}

/// `σ(f, g) = ∫ f·B⁻¹·M₀·gᵀ dμ`.
#[derive(Debug, Clone)]
pub struct IndefiniteForm {
    pub pair: SymmetrizerPair,
    pub weight: MatrixWeight,
    pub singular_tol: f64,
}

impl IndefiniteForm {
    pub fn new(pair: SymmetrizerPair, weight: MatrixWeight) -> Self {
        IndefiniteForm {
            pair,
            weight,
            singular_tol: DEFAULT_SINGULAR_TOL,
        }
    }

    fn binv(&self, z: f64) -> Result<DMatrix<f64>> {
        invert_checked(&self.pair.b.eval(z)?, z, self.singular_tol)
    }

    pub fn sigma(&self, f: &VectorFunction, g: &VectorFunction) -> Result<f64> {
        let dim = self.weight.dim();
        for found in [f.dim(), g.dim()] {
            if found != dim {
                return Err(Error::Dimension { expected: dim, found });
            }
        }
        let out = self.weight.integrate_weighted(None, |z, m| {
            let fz = f.eval(z)? * self.binv(z)?;
            Ok(vec![(fz * m).dot(&g.eval(z)?)])
        })?;
        Ok(out.value[0])
    }

    /// `σ(fᵢ, gⱼ)` for all pairs, in one quadrature pass.
    pub fn sigma_matrix<F, G>(&self, rows: usize, cols: usize, f: F, g: G) -> Result<DMatrix<f64>>
    where
        F: Fn(f64) -> Result<DMatrix<f64>>,
        G: Fn(f64) -> Result<DMatrix<f64>>,
    {
        let out = self.weight.integrate_weighted(None, |z, m| {
            let s = f(z)? * self.binv(z)? * m * g(z)?.transpose();
            Ok(s.transpose().as_slice().to_vec())
        })?;
        Ok(DMatrix::from_row_slice(rows, cols, &out.value))
    }
}

pub fn sigma_form(f: &VectorFunction, g: &VectorFunction, form: &IndefiniteForm) -> Result<f64> {
    form.sigma(f, g)
}

/// How `yₙ(𝒜)1` is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorollaryMode {
    /// The jet of `yₙ`.
    #[default]
    Jet,
    /// `Σₖ cₖ·(1, 0, …, 0)·A(z)ᵏ`, applying the Leibniz matrix repeatedly.
    Iterated,
}

/// Stacked `yₙ(𝒜)1` at `z`, one row per polynomial.
fn op_rows(polys: &[Polynomial], rho: usize, z: f64, mode: CorollaryMode) -> DMatrix<f64> {
    let n = rho + 1;
    let mut out = DMatrix::zeros(polys.len(), n);
    match mode {
        CorollaryMode::Jet => {
            for (i, p) in polys.iter().enumerate() {
                let j = jet(p, rho).eval(z).expect("polynomial jets evaluate");
                out.set_row(i, &j);
            }
        }
        CorollaryMode::Iterated => {
            let a = leibniz_matrix(rho, z);
            let max_deg = polys.iter().map(Polynomial::degree).max().unwrap_or(0);
            let mut powers = Vec::with_capacity(max_deg + 1);
            let mut e = RowDVector::zeros(n);
            e[0] = 1.0;
            for _ in 0..=max_deg {
                let next = &e * &a;
                powers.push(e);
                e = next;
            }
            for (i, p) in polys.iter().enumerate() {
                let mut row = RowDVector::zeros(n);
                for (k, c) in p.coeffs().iter().enumerate() {
                    row += &powers[k] * *c;
                }
                out.set_row(i, &row);
            }
        }
    }
    out
}

pub fn verify_corollary(
    ops: &SobolevOPSet,
    pair: &SymmetrizerPair,
    w: &MatrixWeight,
    tol: f64,
) -> VerificationReport {
    verify_corollary_with(ops, pair, w, tol, CorollaryMode::Jet)
}

/// `S[n][m] = σ(ℬ yₙ(𝒜)1, yₘ(𝒜)1)` against `Aₙ δₙₘ`, each entry divided by
/// `√(AₙAₘ)`. Also compares `S` with the Sobolev Gram matrix of the `yₙ`.
pub fn verify_corollary_with(
    ops: &SobolevOPSet,
    pair: &SymmetrizerPair,
    w: &MatrixWeight,
    tol: f64,
    mode: CorollaryMode,
) -> VerificationReport {
    let mut report = VerificationReport::new("verify_corollary");
    let n = ops.polys.len();
    let rho = w.rho();
    let form = IndefiniteForm::new(pair.clone(), w.clone());
    let s = form.sigma_matrix(
        n,
        n,
        |z| Ok(op_rows(&ops.polys, rho, z, mode) * pair.b.eval(z)?),
        |z| Ok(op_rows(&ops.polys, rho, z, mode)),
    );
    let s = match s {
        Ok(s) => s,
        Err(e) => {
            report.push(CheckRecord::failed("corollary_matrix", e.to_string()));
            return report;
        }
    };
    let norms = &ops.norms;
    let dev = DMatrix::from_fn(n, n, |i, j| {
        let expect = if i == j { norms[i] } else { 0.0 };
        (s[(i, j)] - expect).abs() / (norms[i] * norms[j]).sqrt()
    });
    report.push(CheckRecord::upper("corollary_matrix", dev.amax(), tol));
    match polynomial_gram(&ops.polys, w) {
        Ok(g) => {
            let diff = DMatrix::from_fn(n, n, |i, j| {
                (s[(i, j)] - g[(i, j)]).abs() / (norms[i] * norms[j]).sqrt()
            });
            report.push(CheckRecord::info("corollary_vs_sobolev_gram", diff.amax()));
        }
        Err(e) => report.push(CheckRecord::failed("corollary_vs_sobolev_gram", e.to_string())),
    }
    let rows: Vec<Vec<f64>> = dev.row_iter().map(|r| r.iter().copied().collect()).collect();
    report.insert_data("corollary_deviations", json!(rows));
    report.insert_data(
        "corollary_mode",
        json!(match mode {
            CorollaryMode::Jet => "jet",
            CorollaryMode::Iterated => "iterated",
        }),
    );
    report
}

struct TrialOutcome {
    a_sym: f64,
    b_sym: f64,
    cancel: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

fn sigma_trial(form: &IndefiniteForm, deg: usize, seed: u64) -> Result<TrialOutcome> {
    let w = &form.weight;
    let rho = w.rho();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Polynomial::random(deg, &mut rng);
    let g = Polynomial::random(deg, &mut rng);
    let u = Polynomial::random(deg, &mut rng);
    let v = Polynomial::random(deg, &mut rng);
    let norm = |p: &Polynomial| sobolev_inner(p, p, w).map(|x| x.max(0.0).sqrt());

    let (zf, zg) = (f.mul_z(), g.mul_z());
    let lhs = form.sigma(&jet(&zf, rho), &jet(&g, rho))?;
    let rhs = form.sigma(&jet(&f, rho), &jet(&zg, rho))?;
    let scale_a = (norm(&zf)? * norm(&g)?).max(norm(&f)? * norm(&zg)?);

    let (ju, jv) = (jet(&u, rho), jet(&v, rho));
    let bu = apply_matrix_op(&ju, &form.pair.b)?;
    let bv = apply_matrix_op(&jv, &form.pair.b)?;
    let lhs_b = form.sigma(&bu, &jv)?;
    let rhs_b = form.sigma(&ju, &bv)?;
    let inner = l2m_inner(&ju, &jv, w)?;
    let scale_b = norm(&u)? * norm(&v)?;

    Ok(TrialOutcome {
        a_sym: ratio((lhs - rhs).abs(), scale_a),
        b_sym: ratio((lhs_b - rhs_b).abs(), scale_b),
        cancel: ratio((lhs_b - inner).abs(), scale_b),
    })
}

/// Seeded trials of `σ(𝒜f, g) = σ(f, 𝒜g)`, `σ(ℬu, v) = σ(u, ℬv)` and
/// `σ(ℬu, v) = (u, v)`; trial `t` draws from seed `seed + t`.
pub fn verify_sigma_symmetry(
    pair: &SymmetrizerPair,
    w: &MatrixWeight,
    deg: usize,
    trials: usize,
    seed: u64,
    tol: f64,
) -> VerificationReport {
    let mut report = VerificationReport::new("verify_sigma_symmetry");
    let form = IndefiniteForm::new(pair.clone(), w.clone());
    let outcomes = par::try_map_range(trials, |t| sigma_trial(&form, deg, seed.wrapping_add(t as u64)));
    let outcomes = match outcomes {
        Ok(o) => o,
        Err(e) => {
            for name in ["sigma_A_symmetry", "sigma_B_symmetry", "sigma_B_cancellation"] {
                report.push(CheckRecord::failed(name, e.to_string()));
            }
            return report;
        }
    };
    let worst = |get: fn(&TrialOutcome) -> f64| {
        let v: Vec<f64> = outcomes.iter().map(get).collect();
        par::argmax(&v).map_or((0.0, None), |(i, x)| (x, Some(i)))
    };
    for (name, get) in [
        ("sigma_A_symmetry", (|o: &TrialOutcome| o.a_sym) as fn(&TrialOutcome) -> f64),
        ("sigma_B_symmetry", |o: &TrialOutcome| o.b_sym),
        ("sigma_B_cancellation", |o: &TrialOutcome| o.cancel),
    ] {
        let (v, trial) = worst(get);
        report.push(CheckRecord::upper(name, v, tol).with_detail(json!({ "worst_trial": trial })));
    }
    report.insert_data("sigma_trials", json!({ "trials": trials, "degree": deg, "seed": seed }));
    report
}

/// Pointwise symmetry of `B⁻¹M₀` and `A·B⁻¹·M₀` over the grid.
pub fn check_transport_symmetry(
    pair: &SymmetrizerPair,
    w: &MatrixWeight,
    grid: &[f64],
    tol: f64,
    singular_tol: f64,
) -> VerificationReport {
    let mut report = VerificationReport::new("check_transport_symmetry");
    let names = ["Binv_M0_symmetry", "A_Binv_M0_symmetry"];
    let samples = par::try_map(grid, |&z| -> Result<[f64; 2]> {
        let m = w.eval(z)?;
        let x = invert_checked(&pair.b.eval(z)?, z, singular_tol)? * m;
        let ax = leibniz_matrix(pair.rho, z) * &x;
        Ok([asymmetry(&x), asymmetry(&ax)])
    });
    let samples = match samples {
        Ok(s) => s,
        Err(e) => {
            for name in names {
                report.push(CheckRecord::failed(name, e.to_string()));
            }
            return report;
        }
    };
    for (k, name) in names.iter().enumerate() {
        let col: Vec<f64> = samples.iter().map(|s| s[k]).collect();
        let (v, z) = par::argmax(&col).map_or((0.0, None), |(i, x)| (x, Some(grid[i])));
        report.push(CheckRecord::upper(*name, v, tol).at(z));
    }
    report
}
