//! Command implementations behind the `sobolev-symm` binary. Every command
//! returns a report, partial on early failure, and an exit code:
//! 0 pass, 1 validation or config failure, 2 numerical or check failure,
//! 3 parse error.

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use serde_json::json;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::operator::{
    check_transport_symmetry, verify_corollary, verify_mult_operator, verify_sigma_symmetry,
};
use crate::orthopoly::{check_orthogonality, sobolev_ops, MAX_DEGREE};
use crate::par;
use crate::poly::Polynomial;
use crate::quadrature::chebyshev_grid;
use crate::report::{matrix_json, CheckRecord, VerificationReport};
use crate::sobolev::{validate_weight, MatrixWeight};
use crate::symmetrizer::{
    build_b_rho1_with, build_b_rho2_with, check_rho2_system, check_symmetry, det_scan,
    leibniz_matrix, rho2_det_identities, solve_b_general_with, verify_factorization, BuildOptions,
    FreeRow, SymmetrizerPair,
};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_PARSE: u8 = 3;

pub const DEFAULT_DEGREE: usize = 8;
/// `c₁,₀ = m̃₂,₂ det M₀`, `c₂,₀ = m̃₂,₁ det M₀`, relative.
pub const DET_IDENTITY_TOL: f64 = 1e-9;
/// General solver against the closed-form builders.
pub const CLOSED_FORM_AGREEMENT_TOL: f64 = 1e-10;
pub const CONSTRUCTION_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Symmetrize,
    Ops,
    Verify,
    Conjecture,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Symmetrize => "symmetrize",
            Command::Ops => "ops",
            Command::Verify => "verify",
            Command::Conjecture => "conjecture",
        }
    }
}

/// Command-line values that override or extend the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub degree: Option<usize>,
    pub rho: Option<usize>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub free_row: Option<Vec<String>>,
    pub dump_grid: bool,
    pub general: bool,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: VerificationReport,
    pub exit_code: u8,
}

pub fn run(cmd: Command, config_path: &Path, ov: &Overrides) -> Outcome {
    match cmd {
        Command::Validate => cmd_validate(config_path, ov),
        Command::Symmetrize => cmd_symmetrize(config_path, ov),
        Command::Ops => cmd_ops(config_path, ov),
        Command::Verify => cmd_verify(config_path, ov),
        Command::Conjecture => cmd_conjecture(config_path, ov),
    }
}

struct Run {
    report: VerificationReport,
    start: Instant,
}

impl Run {
    fn new(cmd: Command) -> Self {
        Run {
            report: VerificationReport::new(cmd.name()),
            start: Instant::now(),
        }
    }

    fn finish(mut self, exit_code: u8) -> Outcome {
        self.report.wall_time_s = self.start.elapsed().as_secs_f64();
        Outcome {
            report: self.report,
            exit_code,
        }
    }

    fn finish_checks(self) -> Outcome {
        let code = if self.report.pass { EXIT_PASS } else { EXIT_NUMERICAL };
        self.finish(code)
    }

    fn fail(mut self, check: &str, e: &Error, exit_code: u8) -> Outcome {
        let z = match e {
            Error::Singular { z, .. } => Some(*z),
            _ => None,
        };
        self.report.push(CheckRecord::failed(check, e.to_string()).at(z));
        self.finish(exit_code)
    }
}

fn input_exit(e: &Error) -> u8 {
    if e.is_parse() {
        EXIT_PARSE
    } else {
        EXIT_VALIDATION
    }
}

/// Exit code for an error raised after the inputs were accepted.
fn stage_exit(e: &Error) -> u8 {
    match e {
        e if e.is_parse() => EXIT_PARSE,
        Error::Weight(_) | Error::Config(_) | Error::InvalidArgument(_) | Error::Dimension { .. } => {
            EXIT_VALIDATION
        }
        _ => EXIT_NUMERICAL,
    }
}

fn apply_overrides(mut cfg: Config, ov: &Overrides) -> Result<Config> {
    if let Some(r) = ov.rho {
        if r != cfg.rho {
            return Err(Error::Config(format!(
                "--rho {r} does not match the config weight (rho = {})",
                cfg.rho
            )));
        }
    }
    if let Some(n) = ov.grid {
        cfg.grid_points = n;
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(row) = &ov.free_row {
        cfg.free_row = Some(row.clone());
    }
    cfg.check()?;
    Ok(cfg)
}

/// Loads the config and weight, then validates the weight.
fn load_validated(cmd: Command, path: &Path, ov: &Overrides) -> std::result::Result<(Run, Config, MatrixWeight), Outcome> {
    let mut run = Run::new(cmd);
    let cfg = match Config::from_path(path).and_then(|c| apply_overrides(c, ov)) {
        Ok(c) => c,
        Err(e) => {
            let code = input_exit(&e);
            return Err(run.fail("config", &e, code));
        }
    };
    run.report.config = serde_json::to_value(&cfg).ok();
    let w = match cfg.matrix_weight() {
        Ok(w) => w,
        Err(e) => {
            let code = input_exit(&e);
            return Err(run.fail("config", &e, code));
        }
    };
    let validation = validate_weight(&w, cfg.validation_points, cfg.min_eigenvalue);
    let ok = validation.pass;
    run.report.absorb(validation);
    if !ok {
        return Err(run.finish(EXIT_VALIDATION));
    }
    Ok((run, cfg, w))
}

fn grid_of(cfg: &Config) -> Vec<f64> {
    chebyshev_grid(cfg.grid_points, cfg.interval[0], cfg.interval[1])
}

fn build_closed_form(
    w: &MatrixWeight,
    free: Option<FreeRow>,
    opts: &BuildOptions,
) -> Result<SymmetrizerPair> {
    match w.rho() {
        1 => build_b_rho1_with(w, free, opts),
        2 => build_b_rho2_with(w, free, opts),
        r => Err(Error::Config(format!("closed forms exist for rho 1 and 2, not {r}"))),
    }
}

fn build_failure(run: Run, e: &Error) -> Outcome {
    let name = match e {
        Error::Singular { .. } => "det_B_nonzero",
        _ => "symmetrizer_build",
    };
    run.fail(name, e, stage_exit(e))
}

fn worst_over<F>(grid: &[f64], f: F) -> Result<(f64, Option<f64>)>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    let values = par::try_map(grid, |&z| f(z))?;
    Ok(par::argmax(&values).map_or((0.0, None), |(i, v)| (v, Some(grid[i]))))
}

/// Construction identity, symmetry, factorization, det scan, and the ρ = 2
/// scalar identities.
fn symmetrizer_checks(report: &mut VerificationReport, pair: &SymmetrizerPair, w: &MatrixWeight, cfg: &Config) {
    let grid = grid_of(cfg);
    let tol = &cfg.tolerances;
    let construction = worst_over(&grid, |z| {
        let b = pair.b.eval(z)?;
        let c = pair.c.eval(z)?;
        let d = c - &b * leibniz_matrix(pair.rho, z);
        Ok(d.amax() / b.amax().max(1.0))
    });
    report.push(match construction {
        Ok((v, z)) => CheckRecord::upper("construction_C_eq_BA", v, CONSTRUCTION_TOL).at(z),
        Err(e) => CheckRecord::failed("construction_C_eq_BA", e.to_string()),
    });
    report.absorb(check_symmetry(pair, w, &grid, tol.symmetry));
    report.absorb(verify_factorization(pair, &grid, tol.factorization, tol.singular));
    report.absorb(det_scan(pair, &grid, tol.singular));
    if pair.rho == 2 {
        let six = worst_over(&grid, |z| {
            Ok(check_rho2_system(&pair.b, w, z)?.into_iter().fold(0.0, f64::max))
        });
        report.push(match six {
            Ok((v, z)) => CheckRecord::upper("rho2_six_equations", v, tol.symmetry).at(z),
            Err(e) => CheckRecord::failed("rho2_six_equations", e.to_string()),
        });
        match par::try_map(&grid, |&z| rho2_det_identities(w, z)) {
            Ok(ids) => {
                for (name, get) in [
                    ("det_identity_c10", (|d: &crate::symmetrizer::Rho2DetIdentities| d.rel_diff_c10) as fn(&_) -> f64),
                    ("det_identity_c20", |d| d.rel_diff_c20),
                ] {
                    let values: Vec<f64> = ids.iter().map(get).collect();
                    let (v, z) = par::argmax(&values).map_or((0.0, None), |(i, v)| (v, Some(grid[i])));
                    report.push(CheckRecord::upper(name, v, DET_IDENTITY_TOL).at(z));
                }
            }
            Err(e) => report.push(CheckRecord::failed("det_identity_c10", e.to_string())),
        }
    }
}

fn grid_dump(pair: &SymmetrizerPair, grid: &[f64]) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = grid
        .iter()
        .map(|&z| match (pair.b.eval(z), pair.c.eval(z)) {
            (Ok(b), Ok(c)) => json!({ "z": z, "B": matrix_json(&b), "C": matrix_json(&c) }),
            (Err(e), _) | (_, Err(e)) => json!({ "z": z, "error": e.to_string() }),
        })
        .collect();
    json!(rows)
}

pub fn cmd_validate(config_path: &Path, ov: &Overrides) -> Outcome {
    match load_validated(Command::Validate, config_path, ov) {
        Ok((run, _, _)) => run.finish(EXIT_PASS),
        Err(out) => out,
    }
}

pub fn cmd_symmetrize(config_path: &Path, ov: &Overrides) -> Outcome {
    let (mut run, cfg, w) = match load_validated(Command::Symmetrize, config_path, ov) {
        Ok(v) => v,
        Err(out) => return out,
    };
    let rho = cfg.rho;
    if rho == 0 || (rho > 2 && !ov.general) {
        let e = Error::Config(format!("symmetrize needs rho 1 or 2 (or --general), got {rho}"));
        return run.fail("config", &e, EXIT_VALIDATION);
    }
    let free = match cfg.free_row() {
        Ok(f) => f,
        Err(e) => return run.fail("config", &e, input_exit(&e)),
    };
    let opts = cfg.build_options();
    let grid = grid_of(&cfg);
    let pair = if ov.general {
        let free = free.or_else(|| FreeRow::closed_form_default(rho));
        match solve_b_general_with(&w, free, &grid, &opts) {
            Ok(sol) => {
                let unsolvable = sol.points.iter().filter(|p| !p.solvable).count();
                run.report.push(CheckRecord::upper("general_unsolvable_points", unsolvable as f64, 0.0));
                run.report.push(CheckRecord::upper(
                    "general_residual",
                    sol.max_residual,
                    cfg.tolerances.symmetry,
                ));
                run.report.insert_data("general_solver", sol.summary_json());
                sol.pair
            }
            Err(e) => return build_failure(run, &e),
        }
    } else {
        match build_closed_form(&w, free, &opts) {
            Ok(p) => p,
            Err(e) => return build_failure(run, &e),
        }
    };
    run.report.insert_data(
        "symmetrizer",
        json!({ "rho": rho, "provenance": pair.provenance, "free_row": pair.free_row.label() }),
    );
    symmetrizer_checks(&mut run.report, &pair, &w, &cfg);
    if ov.dump_grid {
        run.report.insert_data("grid_dump", grid_dump(&pair, &grid));
    }
    run.finish_checks()
}

pub fn cmd_ops(config_path: &Path, ov: &Overrides) -> Outcome {
    let (mut run, cfg, w) = match load_validated(Command::Ops, config_path, ov) {
        Ok(v) => v,
        Err(out) => return out,
    };
    let degree = ov.degree.unwrap_or(DEFAULT_DEGREE);
    if degree > MAX_DEGREE {
        let e = Error::Config(format!("--degree {degree} exceeds the cap {MAX_DEGREE}"));
        return run.fail("config", &e, EXIT_VALIDATION);
    }
    let ops = match sobolev_ops(degree, &w) {
        Ok(o) => o,
        Err(e) => return run.fail("sobolev_ops", &e, stage_exit(&e)),
    };
    run.report.insert_data("degree", json!(degree));
    run.report.insert_data(
        "polynomials",
        json!(ops.polys.iter().map(|p| p.coeffs().to_vec()).collect::<Vec<_>>()),
    );
    run.report.insert_data("norms", json!(ops.norms));
    run.report.insert_data("cholesky_norms", json!(ops.cholesky_norms));
    run.report.insert_data("gram_residual", json!(ops.gram_residual));
    run.report.absorb(check_orthogonality(&ops, &w, cfg.tolerances.orthogonality));
    run.finish_checks()
}

pub fn cmd_verify(config_path: &Path, ov: &Overrides) -> Outcome {
    let (mut run, cfg, w) = match load_validated(Command::Verify, config_path, ov) {
        Ok(v) => v,
        Err(out) => return out,
    };
    let tol = cfg.tolerances;
    if !(1..=2).contains(&cfg.rho) {
        let e = Error::Config(format!("verify needs rho 1 or 2, got {}", cfg.rho));
        return run.fail("config", &e, EXIT_VALIDATION);
    }
    let degree = ov.degree.unwrap_or(DEFAULT_DEGREE);
    if degree > MAX_DEGREE {
        let e = Error::Config(format!("--degree {degree} exceeds the cap {MAX_DEGREE}"));
        return run.fail("config", &e, EXIT_VALIDATION);
    }
    let free = match cfg.free_row() {
        Ok(f) => f,
        Err(e) => return run.fail("config", &e, input_exit(&e)),
    };
    let pair = match build_closed_form(&w, free, &cfg.build_options()) {
        Ok(p) => p,
        Err(e) => return build_failure(run, &e),
    };
    run.report.insert_data(
        "symmetrizer",
        json!({ "rho": cfg.rho, "provenance": pair.provenance, "free_row": pair.free_row.label() }),
    );
    symmetrizer_checks(&mut run.report, &pair, &w, &cfg);
    run.report.absorb(check_transport_symmetry(&pair, &w, &grid_of(&cfg), tol.symmetry, tol.singular));

    let mult = par::try_map_range(degree + 1, |k| {
        verify_mult_operator(&Polynomial::monomial(k), &pair, &w, tol.singular)
    });
    match mult {
        Ok(res) => {
            let (v, k) = par::argmax(&res).map_or((0.0, None), |(k, v)| (v, Some(k)));
            run.report.push(
                CheckRecord::upper("mult_operator", v, tol.factorization)
                    .with_detail(json!({ "worst_power": k, "max_power": degree })),
            );
        }
        Err(e) => return run.fail("mult_operator", &e, stage_exit(&e)),
    }

    let ops = match sobolev_ops(degree, &w) {
        Ok(o) => o,
        Err(e) => return run.fail("sobolev_ops", &e, stage_exit(&e)),
    };
    run.report.insert_data("norms", json!(ops.norms));
    run.report.absorb(check_orthogonality(&ops, &w, tol.orthogonality));
    run.report.absorb(verify_corollary(&ops, &pair, &w, tol.orthogonality));
    run.report.absorb(verify_sigma_symmetry(
        &pair,
        &w,
        cfg.sigma_degree,
        cfg.sigma_trials,
        cfg.seed,
        tol.symmetry,
    ));
    run.finish_checks()
}

pub fn cmd_conjecture(config_path: &Path, ov: &Overrides) -> Outcome {
    let (mut run, cfg, w) = match load_validated(Command::Conjecture, config_path, ov) {
        Ok(v) => v,
        Err(out) => return out,
    };
    let rho = cfg.rho;
    if rho == 0 {
        return run.fail("config", &Error::Config("conjecture needs rho >= 1".into()), EXIT_VALIDATION);
    }
    let free = match cfg.free_row() {
        Ok(f) => f,
        Err(e) => return run.fail("config", &e, input_exit(&e)),
    };
    let free = free.or_else(|| FreeRow::closed_form_default(rho));
    let opts = cfg.build_options();
    let grid = grid_of(&cfg);
    let sol = match solve_b_general_with(&w, free.clone(), &grid, &opts) {
        Ok(s) => s,
        Err(e) => return run.fail("general_solver", &e, stage_exit(&e)),
    };
    run.report.insert_data(
        "interpretation",
        json!("evidence, not proof: pointwise solvability on a finite grid says nothing about points in between"),
    );
    run.report.insert_data("summary", sol.summary_json());
    run.report.insert_data("points", json!(sol.points));

    let unsolvable = sol.points.iter().filter(|p| !p.solvable).count();
    run.report.push(CheckRecord::upper("probe_unsolvable_points", unsolvable as f64, 0.0));
    run.report.push(CheckRecord::upper(
        "probe_residual",
        sol.max_residual,
        cfg.tolerances.factorization,
    ));
    let worst_det = sol
        .points
        .iter()
        .min_by(|a, b| a.rel_det.total_cmp(&b.rel_det))
        .map(|p| p.z);
    run.report.push(
        CheckRecord::lower("probe_min_rel_det", sol.min_rel_det, cfg.tolerances.singular)
            .at(worst_det)
            .with_detail(json!({ "min_abs_det": sol.min_abs_det })),
    );
    run.report.push(CheckRecord::info("probe_continuity", sol.continuity));

    if rho <= 2 {
        let agreement = build_closed_form(&w, free, &opts).and_then(|closed| {
            let n = rho + 1;
            let values = sol
                .points
                .iter()
                .map(|p| {
                    let want = closed.b.eval(p.z)?;
                    let got = DMatrix::from_row_slice(n, n, &p.b);
                    Ok((got - &want).amax() / want.amax().max(1.0))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(par::argmax(&values).map_or((0.0, None), |(i, v)| (v, Some(grid[i]))))
        });
        run.report.push(match agreement {
            Ok((v, z)) => CheckRecord::upper("closed_form_agreement", v, CLOSED_FORM_AGREEMENT_TOL).at(z),
            Err(e) => CheckRecord::failed("closed_form_agreement", e.to_string()),
        });
    }
    run.finish_checks()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_cfg(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    const EXAMPLE: &str = r#"{"interval":[-1,1],"rho":1,"weight":[["1","0"],["0","z^2+1"]]}"#;

    #[test]
    fn validate_exit_codes() {
        let f = write_cfg(EXAMPLE);
        assert_eq!(cmd_validate(f.path(), &Overrides::default()).exit_code, EXIT_PASS);
        let f = write_cfg(r#"{"interval":[-1,1],"rho":1,"weight":[["1","0"],["0","z"]]}"#);
        let out = cmd_validate(f.path(), &Overrides::default());
        assert_eq!(out.exit_code, EXIT_VALIDATION);
        assert!(!out.report.check("weight_min_eigenvalue").unwrap().pass);
        let f = write_cfg(r#"{"interval":[-1,1],"rho":0,"weight":[["z+"]]}"#);
        assert_eq!(cmd_validate(f.path(), &Overrides::default()).exit_code, EXIT_PARSE);
        let f = write_cfg("{not json");
        assert_eq!(cmd_validate(f.path(), &Overrides::default()).exit_code, EXIT_PARSE);
        let out = cmd_validate(Path::new("/nonexistent.json"), &Overrides::default());
        assert_eq!(out.exit_code, EXIT_VALIDATION);
    }

    #[test]
    fn rho_override_must_match() {
        let f = write_cfg(EXAMPLE);
        let ov = Overrides {
            rho: Some(2),
            ..Default::default()
        };
        assert_eq!(cmd_conjecture(f.path(), &ov).exit_code, EXIT_VALIDATION);
    }

    #[test]
    fn verify_example_passes() {
        let f = write_cfg(EXAMPLE);
        let out = cmd_verify(f.path(), &Overrides::default());
        assert_eq!(out.exit_code, EXIT_PASS, "{}", out.report.to_json());
    }
}
