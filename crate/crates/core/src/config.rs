//! JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::parse_expr;
use crate::operator::{DEFAULT_SEED, DEFAULT_SIGMA_DEGREE, DEFAULT_SIGMA_TRIALS};
use crate::quadrature::DEFAULT_MAX_ORDER;
use crate::sobolev::{MatrixWeight, DEFAULT_MIN_EIGENVALUE, DEFAULT_VALIDATION_POINTS};
use crate::symmetrizer::{BuildOptions, FreeRow, DEFAULT_GRID_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub symmetry: f64,
    pub orthogonality: f64,
    pub factorization: f64,
    pub singular: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            symmetry: 1e-10,
            orthogonality: 1e-8,
            factorization: 1e-10,
            singular: 1e-12,
        }
    }
}

fn default_density() -> String {
    "1".to_string()
}
fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}
fn default_quad_max_order() -> usize {
    DEFAULT_MAX_ORDER
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_validation_points() -> usize {
    DEFAULT_VALIDATION_POINTS
}
fn default_min_eigenvalue() -> f64 {
    DEFAULT_MIN_EIGENVALUE
}
fn default_sigma_trials() -> usize {
    DEFAULT_SIGMA_TRIALS
}
fn default_sigma_degree() -> usize {
    DEFAULT_SIGMA_DEGREE
}

/// ```json
/// {"interval":[-1,1],"rho":1,"weight":[["1","0"],["0","z^2+1"]],"density":"1","grid_points":201,"seed":24301}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub interval: [f64; 2],
    pub rho: usize,
    /// `(ρ+1)×(ρ+1)` expression texts in `z`.
    pub weight: Vec<Vec<String>>,
    #[serde(default = "default_density")]
    pub density: String,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_quad_max_order")]
    pub quad_max_order: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Row ρ of `B` as expression texts in `z`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_row: Option<Vec<String>>,
    #[serde(default = "default_validation_points")]
    pub validation_points: usize,
    #[serde(default = "default_min_eigenvalue")]
    pub min_eigenvalue: f64,
    #[serde(default = "default_sigma_trials")]
    pub sigma_trials: usize,
    #[serde(default = "default_sigma_degree")]
    pub sigma_degree: usize,
}

impl Config {
    /// Config with defaults for everything but the weight.
    pub fn new(interval: (f64, f64), weight: Vec<Vec<String>>) -> Self {
        Config {
            interval: [interval.0, interval.1],
            rho: weight.len().saturating_sub(1),
            weight,
            density: default_density(),
            grid_points: DEFAULT_GRID_POINTS,
            quad_max_order: DEFAULT_MAX_ORDER,
            tolerances: Tolerances::default(),
            seed: DEFAULT_SEED,
            free_row: None,
            validation_points: DEFAULT_VALIDATION_POINTS,
            min_eigenvalue: DEFAULT_MIN_EIGENVALUE,
            sigma_trials: DEFAULT_SIGMA_TRIALS,
            sigma_degree: DEFAULT_SIGMA_DEGREE,
        }
    }

    /// Parses and checks a config. Malformed JSON is a parse error; wrong
    /// types, missing fields and failed invariants are config errors.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| {
            use serde_json::error::Category;
            match e.classify() {
                Category::Syntax | Category::Eof => Error::Json {
                    line: e.line(),
                    column: e.column(),
                    message: e.to_string(),
                },
                _ => Error::Config(e.to_string()),
            }
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Config::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<()> {
        let [a, b] = self.interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Config(format!("interval [{a}, {b}] must be finite with a < b")));
        }
        let n = self.rho + 1;
        if self.weight.len() != n || self.weight.iter().any(|row| row.len() != n) {
            return Err(Error::Config(format!(
                "weight must be a {n}x{n} grid for rho = {}",
                self.rho
            )));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("symmetry", t.symmetry),
            ("orthogonality", t.orthogonality),
            ("factorization", t.factorization),
            ("singular", t.singular),
            ("min_eigenvalue", self.min_eigenvalue),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} tolerance must be positive, got {v}")));
            }
        }
        if self.grid_points < 2 || self.validation_points < 2 {
            return Err(Error::Config("grid_points and validation_points must be at least 2".into()));
        }
        if self.quad_max_order == 0 {
            return Err(Error::Config("quad_max_order must be positive".into()));
        }
        if let Some(row) = &self.free_row {
            if row.len() != n {
                return Err(Error::Config(format!(
                    "free_row needs {n} entries, got {}",
                    row.len()
                )));
            }
        }
        Ok(())
    }

    /// The weight, with parse errors naming the offending entry.
    pub fn matrix_weight(&self) -> Result<MatrixWeight> {
        let entries = self
            .weight
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, s)| parse_expr(s).map_err(|e| located(e, &format!("weight[{i}][{j}]"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let density = parse_expr(&self.density).map_err(|e| located(e, "density"))?;
        Ok(MatrixWeight::new((self.interval[0], self.interval[1]), entries, density)?
            .with_max_order(self.quad_max_order))
    }

    pub fn free_row(&self) -> Result<Option<FreeRow>> {
        self.free_row
            .as_ref()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, s)| parse_expr(s).map_err(|e| located(e, &format!("free_row[{j}]"))))
                    .collect::<Result<Vec<_>>>()
                    .map(FreeRow::from_exprs)
            })
            .transpose()
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            grid_points: self.grid_points,
            singular_tol: self.tolerances.singular,
            validation_points: self.validation_points,
            min_eigenvalue: self.min_eigenvalue,
        }
    }
}

/// Prefixes a parse error message with the field it came from.
fn located(e: Error, field: &str) -> Error {
    match e {
        Error::Syntax { offset, message } => Error::Syntax {
            offset,
            message: format!("{field}: {message}"),
        },
        Error::UnknownIdentifier { name, offset } => Error::Syntax {
            offset,
            message: format!("{field}: unknown identifier `{name}`"),
        },
        Error::EmptyInput => Error::Syntax {
            offset: 0,
            message: format!("{field}: empty expression"),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str =
        r#"{"interval":[-1,1],"rho":1,"weight":[["1","0"],["0","z^2+1"]],"density":"1","grid_points":201,"seed":24301}"#;

    #[test]
    fn parses_schema_example_with_defaults() {
        let cfg = Config::from_json(EXAMPLE).unwrap();
        assert_eq!(cfg.rho, 1);
        assert_eq!(cfg.seed, 0x5EED);
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.quad_max_order, 512);
        let w = cfg.matrix_weight().unwrap();
        assert_eq!(w.eval(1.0).unwrap()[(1, 1)], 2.0);
        let back = Config::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn error_classes() {
        let e = Config::from_json("{\"interval\": [").unwrap_err();
        assert!(e.is_parse(), "{e}");
        let e = Config::from_json(r#"{"interval":[-1,1],"rho":1}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let e = Config::from_json(r#"{"interval":[1,-1],"rho":0,"weight":[["1"]]}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let e = Config::from_json(r#"{"interval":[-1,1],"rho":1,"weight":[["1"]]}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let e = Config::from_json(r#"{"interval":[-1,1],"rho":0,"weight":[["1"]],"bogus":1}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let e = Config::from_json(
            r#"{"interval":[-1,1],"rho":0,"weight":[["1"]],"tolerances":{"symmetry":0}}"#,
        )
        .unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(Config::from_path(Path::new("/nonexistent/cfg.json")).is_err());
    }

    #[test]
    fn expression_errors_are_located() {
        let cfg = Config::from_json(r#"{"interval":[-1,1],"rho":1,"weight":[["1","0"],["0","z+"]]}"#).unwrap();
        match cfg.matrix_weight().unwrap_err() {
            Error::Syntax { offset, message } => {
                assert_eq!(offset, 2);
                assert!(message.starts_with("weight[1][1]"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn free_row_parses() {
        let mut cfg = Config::from_json(EXAMPLE).unwrap();
        cfg.free_row = Some(vec!["z".into(), "0".into()]);
        let row = cfg.free_row().unwrap().unwrap();
        let m = nalgebra::DMatrix::identity(2, 2);
        assert_eq!(row.eval(0.5, &m).unwrap(), vec![0.5, 0.0]);
    }
}
