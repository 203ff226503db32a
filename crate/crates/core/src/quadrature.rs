//! Gauss–Legendre quadrature on finite intervals.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::par::pairwise_sum;

/// Starting node count for adaptive doubling.
pub const ADAPTIVE_START: usize = 16;
/// Relative agreement required between successive adaptive refinements.
pub const ADAPTIVE_RTOL: f64 = 1e-12;
pub const DEFAULT_MAX_ORDER: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

/// `n`-point Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::InvalidArgument("quadrature order must be >= 1".into()));
    }
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::InvalidArgument(format!(
            "interval [{a}, {b}] must be finite with a < b"
        )));
    }
    let reference = reference_rule(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Ok(QuadratureRule {
        nodes: reference.0.iter().map(|x| mid + half * x).collect(),
        weights: reference.1.iter().map(|w| half * w).collect(),
        a,
        b,
    })
}

type Reference = Arc<(Vec<f64>, Vec<f64>)>;

fn reference_rule(n: usize) -> Reference {
    static CACHE: OnceLock<Mutex<HashMap<usize, Reference>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&n) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(legendre_nodes(n));
    cache
        .lock()
        .expect("rule cache poisoned")
        .entry(n)
        .or_insert(rule)
        .clone()
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
        p_prev = p;
        p = next;
    }
    let n = n as f64;
    let dp = n * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, descending in i.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() <= 1e-15 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        if n % 2 == 1 && i == m - 1 {
            x = 0.0;
            dp = legendre_with_derivative(n, 0.0).1;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    (nodes, weights)
}

/// `Σ wᵢ f(xᵢ)` with pairwise summation.
pub fn integrate<F>(f: F, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let terms = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| f(x).map(|v| w * v))
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&terms))
}

/// How many nodes to use for an integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderPlan {
    /// Polynomial integrand: this rule is exact.
    Exact(usize),
    /// Double from `start` until successive results agree or `max` is hit.
    Adaptive { start: usize, max: usize },
}

/// Picks the quadrature plan for an integrand of the given polynomial degree
/// against a weight of the given polynomial degree.
pub fn auto_order(
    weight_degree: Option<usize>,
    integrand_degree: Option<usize>,
    max_order: usize,
) -> OrderPlan {
    match (weight_degree, integrand_degree) {
        (Some(w), Some(i)) => OrderPlan::Exact((w + i) / 2 + 1),
        _ => OrderPlan::Adaptive {
            start: ADAPTIVE_START.min(max_order.max(1)),
            max: max_order.max(1),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub order: usize,
    pub converged: bool,
}

/// Integrates a vector-valued integrand componentwise over `[a, b]`.
///
/// In adaptive mode convergence is judged on all components at once against
/// the largest `∫|f_k|`, so components that integrate to zero do not stall
/// the refinement.
pub fn integrate_vec<F>(f: F, a: f64, b: f64, plan: OrderPlan) -> Result<Integral<Vec<f64>>>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let once = |n: usize| -> Result<(Vec<f64>, f64)> {
        let rule = gauss_legendre(n, a, b)?;
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let values = f(x)?;
            if columns.is_empty() {
                columns = vec![Vec::with_capacity(rule.order()); values.len()];
            } else if values.len() != columns.len() {
                return Err(Error::Dimension {
                    expected: columns.len(),
                    found: values.len(),
                });
            }
            for (col, v) in columns.iter_mut().zip(values) {
                col.push(w * v);
            }
        }
        let sums: Vec<f64> = columns.iter().map(|c| pairwise_sum(c)).collect();
        let scale = columns
            .iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok((sums, scale))
    };

    match plan {
        OrderPlan::Exact(n) => Ok(Integral {
            value: once(n)?.0,
            order: n,
            converged: true,
        }),
        OrderPlan::Adaptive { start, max } => {
            let mut n = start.max(1);
            let (mut prev, _) = once(n)?;
            loop {
                let next_n = 2 * n;
                if next_n > max {
                    return Ok(Integral {
                        value: prev,
                        order: n,
                        converged: false,
                    });
                }
                let (value, scale) = once(next_n)?;
                let diff = value
                    .iter()
                    .zip(&prev)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                if diff <= ADAPTIVE_RTOL * scale {
                    return Ok(Integral {
                        value,
                        order: next_n,
                        converged: true,
                    });
                }
                prev = value;
                n = next_n;
            }
        }
    }
}

/// Scalar convenience wrapper over [`integrate_vec`].
pub fn integrate_plan<F>(f: F, a: f64, b: f64, plan: OrderPlan) -> Result<Integral<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let out = integrate_vec(|x| f(x).map(|v| vec![v]), a, b, plan)?;
    Ok(Integral {
        value: out.value.first().copied().unwrap_or(0.0),
        order: out.order,
        converged: out.converged,
    })
}

/// Chebyshev–Lobatto points on `[a, b]` in ascending order, endpoints
/// included. A single point degenerates to the midpoint.
pub fn chebyshev_grid(n: usize, a: f64, b: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let last = (n - 1) as f64;
            (0..n)
                .map(|k| match k {
                    0 => a,
                    k if k == n - 1 => b,
                    k => mid + half * (PI * (2.0 * k as f64 - last) / (2.0 * last)).sin(),
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn one_and_two_point_rules() {
        let r = gauss_legendre(1, -1.0, 1.0).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert_relative_eq!(r.weights[0], 2.0, epsilon = 1e-15);

        let r = gauss_legendre(2, -1.0, 1.0).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert_relative_eq!(r.nodes[0], -s, epsilon = 1e-15);
        assert_relative_eq!(r.nodes[1], s, epsilon = 1e-15);
        assert_relative_eq!(r.weights[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.weights[1], 1.0, epsilon = 1e-15);
        let v = integrate(|z| Ok(z * z), &r).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn three_point_rule_on_shifted_interval() {
        let r = gauss_legendre(3, 0.0, 2.0).unwrap();
        let v = integrate(|z| Ok(z.powi(5)), &r).unwrap();
        assert_relative_eq!(v, 32.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn trivial_integrands() {
        let r = gauss_legendre(5, -1.0, 1.0).unwrap();
        assert_relative_eq!(integrate(|_| Ok(1.0), &r).unwrap(), 2.0, epsilon = 1e-14);
        assert!(integrate(|z| Ok(z), &r).unwrap().abs() < 1e-16);
    }

    #[test]
    fn rule_invariants() {
        for n in [1, 2, 3, 7, 16, 33, 128, 512] {
            let r = gauss_legendre(n, -0.5, 3.0).unwrap();
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]), "n={n}");
            assert!(r.nodes.iter().all(|&x| x > -0.5 && x < 3.0));
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert_relative_eq!(r.weights.iter().sum::<f64>(), 3.5, max_relative = 1e-13);
        }
    }

    #[test]
    fn bad_arguments() {
        assert!(gauss_legendre(0, 0.0, 1.0).is_err());
        assert!(gauss_legendre(3, 1.0, 1.0).is_err());
        assert!(gauss_legendre(3, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn order_selection() {
        assert_eq!(auto_order(Some(0), Some(7), 512), OrderPlan::Exact(4));
        assert_eq!(auto_order(Some(0), Some(0), 512), OrderPlan::Exact(1));
        assert_eq!(auto_order(Some(3), Some(4), 512), OrderPlan::Exact(4));
        assert_eq!(
            auto_order(None, Some(2), 512),
            OrderPlan::Adaptive { start: 16, max: 512 }
        );
    }

    #[test]
    fn adaptive_converges_on_smooth_function() {
        let plan = auto_order(None, Some(0), 512);
        let out = integrate_plan(|z| Ok(z.exp()), -1.0, 1.0, plan).unwrap();
        assert!(out.converged);
        assert_relative_eq!(out.value, 1f64.exp() - (-1f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn adaptive_reports_non_convergence() {
        // |z| has a kink; GL converges only algebraically.
        let plan = OrderPlan::Adaptive { start: 16, max: 64 };
        let out = integrate_plan(|z| Ok(z.abs()), -1.0, 1.0, plan).unwrap();
        assert!(!out.converged);
        assert_eq!(out.order, 64);
    }

    #[test]
    fn chebyshev_grid_is_sorted_with_endpoints() {
        let g = chebyshev_grid(201, -1.0, 2.0);
        assert_eq!(g.len(), 201);
        assert_eq!((g[0], g[200]), (-1.0, 2.0));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!((g[100] - 0.5).abs() < 1e-15);
        assert_eq!(chebyshev_grid(1, 0.0, 1.0), vec![0.5]);
    }

    #[test]
    fn positivity() {
        let r = gauss_legendre(9, 0.0, 1.0).unwrap();
        assert!(integrate(|z| Ok(1e-3 + (10.0 * z).sin().powi(2)), &r).unwrap() > 0.0);
    }

    fn exact_poly_integral(coeffs: &[f64], a: f64, b: f64) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let p = (k + 1) as i32;
                c * (b.powi(p) - a.powi(p)) / f64::from(p)
            })
            .sum()
    }

    proptest! {
        #[test]
        fn exact_for_degree_up_to_2n_minus_1(
            n in 1usize..24,
            coeffs in proptest::collection::vec(-1.0..1.0f64, 48),
            a in -1.0..0.0f64,
            len in 0.1..1.0f64,
        ) {
            let b = a + len;
            let deg = 2 * n - 1;
            let c = &coeffs[..=deg.min(47)];
            let rule = gauss_legendre(n, a, b).unwrap();
            let got = integrate(|z| Ok(c.iter().rev().fold(0.0, |acc, ci| acc * z + ci)), &rule).unwrap();
            let want = exact_poly_integral(c, a, b);
            prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()), "got {got} want {want}");
        }
    }
}
