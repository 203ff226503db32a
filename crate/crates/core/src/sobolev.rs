//! Matrix weights, jets, and the L²(M) / Sobolev inner products.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, RowDVector, SymmetricEigen};
use serde_json::json;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::poly::Polynomial;
use crate::quadrature::{auto_order, chebyshev_grid, integrate_vec, Integral, DEFAULT_MAX_ORDER};
use crate::report::{CheckRecord, VerificationReport};

pub const DEFAULT_VALIDATION_POINTS: usize = 1001;
pub const DEFAULT_MIN_EIGENVALUE: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;

/// Real continuous matrix weight `M₀(z)` of size `(ρ+1)×(ρ+1)` on `[a, b]`,
/// together with the density of the admissible measure against `dz`.
#[derive(Debug, Clone)]
pub struct MatrixWeight {
    rho: usize,
    a: f64,
    b: f64,
    entries: Vec<Expr>,
    density: Expr,
    degree: Option<usize>,
    max_order: usize,
}

impl MatrixWeight {
    pub fn new(interval: (f64, f64), entries: Vec<Vec<Expr>>, density: Expr) -> Result<Self> {
        let (a, b) = interval;
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::Weight(format!(
                "interval [{a}, {b}] must be finite with a < b"
            )));
        }
        let dim = entries.len();
        if dim == 0 {
            return Err(Error::Weight("weight matrix is empty".into()));
        }
        if let Some(row) = entries.iter().find(|row| row.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: row.len(),
            });
        }
        let entries: Vec<Expr> = entries.into_iter().flatten().collect();
        let entry_degree = entries
            .iter()
            .map(Expr::poly_degree)
            .try_fold(0usize, |acc, d| d.map(|d| acc.max(d)));
        let degree = entry_degree.zip(density.poly_degree()).map(|(e, d)| e + d);
        Ok(MatrixWeight {
            rho: dim - 1,
            a,
            b,
            entries,
            density,
            degree,
            max_order: DEFAULT_MAX_ORDER,
        })
    }

    /// Builds a weight from expression texts.
    pub fn parse<S: AsRef<str>>(interval: (f64, f64), entries: &[Vec<S>], density: &str) -> Result<Self> {
        let parsed = entries
            .iter()
            .map(|row| row.iter().map(|s| parse_expr(s.as_ref())).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        MatrixWeight::new(interval, parsed, parse_expr(density)?)
    }

    /// `I_{ρ+1}` with Lebesgue density.
    pub fn identity(rho: usize, interval: (f64, f64)) -> Result<Self> {
        let entries = (0..=rho)
            .map(|i| (0..=rho).map(|j| Expr::Const(if i == j { 1.0 } else { 0.0 })).collect())
            .collect();
        MatrixWeight::new(interval, entries, Expr::Const(1.0))
    }

    /// Weight with polynomial entries.
    pub fn from_polynomials(interval: (f64, f64), entries: &[Vec<Polynomial>]) -> Result<Self> {
        let entries = entries
            .iter()
            .map(|row| row.iter().map(Polynomial::to_expr).collect())
            .collect();
        MatrixWeight::new(interval, entries, Expr::Const(1.0))
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order.max(1);
        self
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho + 1
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.dim() + j]
    }

    pub fn density(&self) -> &Expr {
        &self.density
    }

    /// Polynomial degree of `M₀(z)·density(z)` entries, if all are polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.degree
    }

    fn check_domain(&self, z: f64) -> Result<()> {
        let slack = 1e-12 * (self.b - self.a);
        if z.is_finite() && z >= self.a - slack && z <= self.b + slack {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "z = {z} outside [{}, {}]",
                self.a, self.b
            )))
        }
    }

    /// Entry values without symmetrization.
    pub fn eval_raw(&self, z: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let values = self
            .entries
            .iter()
            .map(|e| e.eval(z))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_row_slice(n, n, &values))
    }

    /// `M₀(z)`, symmetrized as `(M + Mᵀ)/2`.
    pub fn eval(&self, z: f64) -> Result<DMatrix<f64>> {
        self.check_domain(z)?;
        let m = self.eval_raw(z)?;
        Ok((&m + m.transpose()) * 0.5)
    }

    pub fn density_at(&self, z: f64) -> Result<f64> {
        self.density.eval(z)
    }

    /// Integrates a vector-valued integrand `f(z, M₀(z)·density(z))` over
    /// `[a, b]`. `integrand_degree` is the polynomial degree of `f` in `z`
    /// excluding the weight; `None` forces adaptive refinement.
    pub fn integrate_weighted<F>(&self, integrand_degree: Option<usize>, f: F) -> Result<Integral<Vec<f64>>>
    where
        F: Fn(f64, &DMatrix<f64>) -> Result<Vec<f64>>,
    {
        let plan = auto_order(self.degree, integrand_degree, self.max_order);
        integrate_vec(
            |z| {
                let m = self.eval(z)? * self.density_at(z)?;
                f(z, &m)
            },
            self.a,
            self.b,
            plan,
        )
    }
}

impl fmt::Display for MatrixWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M0 on [{}, {}]: [", self.a, self.b)?;
        for i in 0..self.dim() {
            if i > 0 {
                f.write_str("; ")?;
            }
            for j in 0..self.dim() {
                if j > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}", self.entry(i, j))?;
            }
        }
        write!(f, "], density {}", self.density)
    }
}

/// `M₀(z)` for `z ∈ [a, b]`.
pub fn weight_eval(w: &MatrixWeight, z: f64) -> Result<DMatrix<f64>> {
    w.eval(z)
}

/// Samples the weight on a Chebyshev grid and checks symmetry, positive
/// definiteness (minimum eigenvalue above `eps`), `det M₀ > 0`, and positive
/// density.
pub fn validate_weight(w: &MatrixWeight, grid_points: usize, eps: f64) -> VerificationReport {
    let mut report = VerificationReport::new("validate_weight");
    let (a, b) = w.interval();
    let grid = chebyshev_grid(grid_points.max(2), a, b);

    struct Sample {
        asym: f64,
        min_eig: f64,
        det: f64,
        density: f64,
    }
    let samples = crate::par::map(&grid, |&z| -> Result<Sample> {
        let raw = w.eval_raw(z)?;
        let scale = raw.amax().max(1.0);
        let asym = (&raw - raw.transpose()).amax() / scale;
        let m = (&raw + raw.transpose()) * 0.5;
        let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
        Ok(Sample {
            asym,
            min_eig,
            det: m.determinant(),
            density: w.density_at(z)?,
        })
    });

    if let Some((i, Err(e))) = samples.iter().enumerate().find(|(_, s)| s.is_err()) {
        report.push(CheckRecord::failed("weight_evaluation", e.to_string()).at(Some(grid[i])));
        return report;
    }
    let samples: Vec<Sample> = samples.into_iter().map(|s| s.expect("checked above")).collect();

    let worst_max = |values: Vec<f64>| crate::par::argmax(&values).map(|(i, v)| (grid[i], v));
    let worst_min = |values: Vec<f64>| {
        let neg: Vec<f64> = values.iter().map(|v| -v).collect();
        crate::par::argmax(&neg).map(|(i, v)| (grid[i], -v))
    };
    let failing = |values: &[f64], ok: &dyn Fn(f64) -> bool| {
        let bad: Vec<f64> = grid
            .iter()
            .zip(values)
            .filter(|(_, v)| !ok(**v))
            .map(|(z, _)| *z)
            .collect();
        json!({
            "failing_points": bad.len(),
            "failing_range": bad.first().map(|lo| [*lo, *bad.last().unwrap_or(lo)]),
        })
    };

    let asym: Vec<f64> = samples.iter().map(|s| s.asym).collect();
    let (z, v) = worst_max(asym).unwrap_or((a, 0.0));
    report.push(CheckRecord::upper("weight_symmetry", v, SYMMETRY_TOL).at(Some(z)));

    let eig: Vec<f64> = samples.iter().map(|s| s.min_eig).collect();
    let detail = failing(&eig, &|v| v > eps);
    let (z, v) = worst_min(eig).unwrap_or((a, 0.0));
    report.push(
        CheckRecord::lower("weight_min_eigenvalue", v, eps)
            .at(Some(z))
            .with_detail(detail),
    );

    let det: Vec<f64> = samples.iter().map(|s| s.det).collect();
    let detail = failing(&det, &|v| v > 0.0);
    let (z, v) = worst_min(det).unwrap_or((a, 0.0));
    report.push(
        CheckRecord::lower("weight_determinant", v, 0.0)
            .at(Some(z))
            .with_detail(detail),
    );

    let dens: Vec<f64> = samples.iter().map(|s| s.density).collect();
    let detail = failing(&dens, &|v| v > 0.0);
    let (z, v) = worst_min(dens).unwrap_or((a, 0.0));
    report.push(
        CheckRecord::lower("density_positive", v, 0.0)
            .at(Some(z))
            .with_detail(detail),
    );
    report
}

/// Pointwise evaluator shared by vector and matrix functions.
type PointFn<T> = Arc<dyn Fn(f64) -> Result<T> + Send + Sync>;

/// Row vector `(f₀(z), …, f_ρ(z))` of scalar functions.
#[derive(Clone)]
pub struct VectorFunction {
    dim: usize,
    repr: VectorRepr,
}

#[derive(Clone)]
enum VectorRepr {
    Polys(Vec<Polynomial>),
    Pointwise {
        f: PointFn<RowDVector<f64>>,
        degree: Option<usize>,
    },
}

impl VectorFunction {
    pub fn from_polys(components: Vec<Polynomial>) -> Self {
        VectorFunction {
            dim: components.len(),
            repr: VectorRepr::Polys(components),
        }
    }

    /// Wraps a pointwise evaluator. `degree` is a bound on the polynomial
    /// degree of every component, when one is known.
    pub fn from_fn<F>(dim: usize, degree: Option<usize>, f: F) -> Self
    where
        F: Fn(f64) -> Result<RowDVector<f64>> + Send + Sync + 'static,
    {
        VectorFunction {
            dim,
            repr: VectorRepr::Pointwise {
                f: Arc::new(f),
                degree,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn polynomials(&self) -> Option<&[Polynomial]> {
        match &self.repr {
            VectorRepr::Polys(p) => Some(p),
            VectorRepr::Pointwise { .. } => None,
        }
    }

    pub fn degree(&self) -> Option<usize> {
        match &self.repr {
            VectorRepr::Polys(p) => Some(p.iter().map(Polynomial::degree).max().unwrap_or(0)),
            VectorRepr::Pointwise { degree, .. } => *degree,
        }
    }

    pub fn eval(&self, z: f64) -> Result<RowDVector<f64>> {
        match &self.repr {
            VectorRepr::Polys(p) => Ok(RowDVector::from_iterator(
                p.len(),
                p.iter().map(|c| c.eval(z)),
            )),
            VectorRepr::Pointwise { f, .. } => {
                let v = f(z)?;
                if v.len() != self.dim {
                    return Err(Error::Dimension {
                        expected: self.dim,
                        found: v.len(),
                    });
                }
                Ok(v)
            }
        }
    }
}

impl fmt::Debug for VectorFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            VectorRepr::Polys(p) => f.debug_tuple("VectorFunction").field(p).finish(),
            VectorRepr::Pointwise { degree, .. } => f
                .debug_struct("VectorFunction")
                .field("dim", &self.dim)
                .field("degree", degree)
                .finish_non_exhaustive(),
        }
    }
}

/// Square matrix of continuous functions of `z`.
#[derive(Clone)]
pub struct MatrixFunction {
    dim: usize,
    degree: Option<usize>,
    f: PointFn<DMatrix<f64>>,
}

impl MatrixFunction {
    pub fn new<F>(dim: usize, degree: Option<usize>, f: F) -> Self
    where
        F: Fn(f64) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    {
        MatrixFunction {
            dim,
            degree,
            f: Arc::new(f),
        }
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "matrix function must be square");
        let dim = m.nrows();
        MatrixFunction::new(dim, Some(0), move |_| Ok(m.clone()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> Option<usize> {
        self.degree
    }

    pub fn eval(&self, z: f64) -> Result<DMatrix<f64>> {
        let m = (self.f)(z)?;
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: m.nrows(),
            });
        }
        Ok(m)
    }

    /// Pointwise product `self(z)·rhs(z)`.
    pub fn mul(&self, rhs: &MatrixFunction) -> Result<MatrixFunction> {
        if self.dim != rhs.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: rhs.dim,
            });
        }
        let (l, r) = (self.clone(), rhs.clone());
        let degree = self.degree.zip(rhs.degree).map(|(a, b)| a + b);
        Ok(MatrixFunction::new(self.dim, degree, move |z| Ok(l.eval(z)? * r.eval(z)?)))
    }
}

impl fmt::Debug for MatrixFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixFunction")
            .field("dim", &self.dim)
            .field("degree", &self.degree)
            .finish_non_exhaustive()
    }
}

/// `(p, p′, …, p^(ρ))`, derivatives exact on coefficients.
pub fn jet(p: &Polynomial, rho: usize) -> VectorFunction {
    let mut comps = Vec::with_capacity(rho + 1);
    let mut current = p.clone();
    for _ in 0..=rho {
        let next = current.derivative();
        comps.push(current);
        current = next;
    }
    VectorFunction::from_polys(comps)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

fn sum_degree(u: &VectorFunction, v: &VectorFunction) -> Option<usize> {
    u.degree().zip(v.degree()).map(|(a, b)| a + b)
}

/// `∫ u(z)·M₀(z)·v(z)ᵀ dμ`, with the integration plan reported.
pub fn l2m_inner_detailed(
    u: &VectorFunction,
    v: &VectorFunction,
    w: &MatrixWeight,
) -> Result<Integral<f64>> {
    check_dim(w.dim(), u.dim())?;
    check_dim(w.dim(), v.dim())?;
    let out = w.integrate_weighted(sum_degree(u, v), |z, m| {
        let uz = u.eval(z)?;
        let vz = v.eval(z)?;
        Ok(vec![(uz * m).dot(&vz)])
    })?;
    Ok(Integral {
        value: out.value[0],
        order: out.order,
        converged: out.converged,
    })
}

/// `(u, v)_{L²(M)}`.
pub fn l2m_inner(u: &VectorFunction, v: &VectorFunction, w: &MatrixWeight) -> Result<f64> {
    l2m_inner_detailed(u, v, w).map(|i| i.value)
}

/// `(p, q)_{W²(M)}`, the L²(M) product of the jets of `p` and `q`.
pub fn sobolev_inner(p: &Polynomial, q: &Polynomial, w: &MatrixWeight) -> Result<f64> {
    l2m_inner(&jet(p, w.rho()), &jet(q, w.rho()), w)
}
