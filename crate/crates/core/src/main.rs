use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sobolev_symm::cli::{run, Command, Overrides, EXIT_VALIDATION};

#[derive(Parser)]
#[command(name = "sobolev-symm", version, about = "Symmetrizer factorization checks for the multiplication operator on matrix Sobolev spaces")]
struct Args {
    #[command(subcommand)]
    command: Cmd,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Highest polynomial degree for `ops` and `verify`.
    #[arg(long, global = true)]
    degree: Option<usize>,

    /// Expected ρ; must match the config weight.
    #[arg(long, global = true)]
    rho: Option<usize>,

    /// Number of Chebyshev grid points.
    #[arg(long, global = true)]
    grid: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Row ρ of B as expressions in z, one per entry.
    #[arg(long, global = true, num_args = 1.., allow_hyphen_values = true)]
    free_row: Option<Vec<String>>,

    /// Include B(z), C(z) at every grid point in the report.
    #[arg(long, global = true)]
    dump_grid: bool,

    /// Use the pointwise general solver instead of the closed forms.
    #[arg(long, global = true)]
    general: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Check that the weight is symmetric positive definite on the interval.
    Validate,
    /// Build B, C and check symmetry, factorization and det B.
    Symmetrize,
    /// Sobolev orthogonal polynomials and their norms.
    Ops,
    /// Full suite: symmetrizer, operator identities, orthogonality under σ.
    Verify,
    /// Pointwise solvability probe of the symmetry system for any ρ.
    Conjecture,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { 0 });
        }
    };
    let Some(config) = args.config else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(EXIT_VALIDATION);
    };
    let cmd = match args.command {
        Cmd::Validate => Command::Validate,
        Cmd::Symmetrize => Command::Symmetrize,
        Cmd::Ops => Command::Ops,
        Cmd::Verify => Command::Verify,
        Cmd::Conjecture => Command::Conjecture,
    };
    let ov = Overrides {
        degree: args.degree,
        rho: args.rho,
        grid: args.grid,
        seed: args.seed,
        free_row: args.free_row,
        dump_grid: args.dump_grid,
        general: args.general,
    };

    let outcome = run(cmd, &config, &ov);
    let json = outcome.report.to_json();
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &json) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_VALIDATION);
            }
        }
        None => println!("{json}"),
    }
    for check in outcome.report.failing() {
        eprintln!("FAILED {}: {}", check.name, check.max_residual);
    }
    eprintln!(
        "{}: {} ({} checks, exit {})",
        cmd.name(),
        if outcome.report.pass { "pass" } else { "fail" },
        outcome.report.checks.len(),
        outcome.exit_code
    );
    ExitCode::from(outcome.exit_code)
}
