//! `fredholm`: validation, eigencurve tracing, linear/nonlinear Fredholm
//! solves and the built-in verification suites, driven by a JSON problem
//! config.
//!
//! Exit codes: 0 ok, 1 I/O, 2 validation, 3 unsolvable (defect in payload),
//! 4 solver divergence.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use fredholm_core::error::Error;
use fredholm_core::io::{
    self, linear_solution_json, nonlinear_solution_json, write_eigencurves_csv, ConfigDoc,
    LoadedProblem,
};
use fredholm_core::nonlinear::{BranchInfo, BranchPoint};
use fredholm_core::spectrum::EigencurveTable;
use fredholm_core::steklov::{check_compatibility, eigencurve_oracle_1d, Density, PositivityMode};
use fredholm_core::verify::{bounds_suite, nemytskii_suite, nonlinear_suite, spectrum_suite};
use fredholm_core::{canonical_data, resonance_group, trace_eigencurves, Mesh1D};

#[derive(Parser)]
#[command(
    name = "fredholm",
    about = "Spectral solvers for two-parameter eigenproblems and Fredholm equations"
)]
struct Cli {
    /// Problem config JSON: either a raw triple {dim, A, B, M} or a Steklov
    /// document {mesh, coeffs, nonlinearity}.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Tolerance for resonance matching and nonlinear convergence.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,

    /// Seed for the randomized property suites.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the configured triple (and coefficient compatibility).
    Validate,
    /// Trace eigencurves over a lambda grid and emit CSV.
    Eigencurves {
        #[arg(long, allow_hyphen_values = true)]
        lambda_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        lambda_max: f64,
        #[arg(long, default_value_t = 11)]
        points: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Append a transcendental-oracle column (constant-coefficient
        /// Steklov configs only).
        #[arg(long)]
        oracle: bool,
    },
    /// Solve the linear Fredholm equation at (lambda, mu).
    SolveLinear {
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        /// Functional: JSON array "[...]", "f0=C" (interior constant
        /// density) or "g0=L,R" (boundary values).
        #[arg(long)]
        ell: String,
        /// Resonant runs: eigenspace coefficients of the free component.
        #[arg(long)]
        vhat: Option<String>,
    },
    /// Solve the nonlinear Fredholm equation at (lambda, mu) for eps.
    SolveNonlinear {
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        /// Treat (lambda, mu) as a resonant pair and solve along the
        /// bifurcation branch.
        #[arg(long)]
        resonant: bool,
    },
    /// Run the built-in invariant suites.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
    /// Evaluate the transcendental eigencurve oracle on a lambda grid.
    Oracle {
        #[arg(long, allow_hyphen_values = true)]
        lambda_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        lambda_max: f64,
        #[arg(long, default_value_t = 11)]
        points: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Picard,
    Newton,
    Auto,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Spectrum,
    Bounds,
    Nonlinear,
    Nemytskii,
    All,
}

fn main() {
    if let Ok(threads) = std::env::var("FREDHOLM_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Config(_) => 1,
        Error::TripleInvalid(_)
        | Error::DimensionMismatch(_)
        | Error::IncompatibleCoefficients(_)
        | Error::MeshTooCoarse(_)
        | Error::PositivityViolated(_)
        | Error::InvalidExponent(_)
        | Error::PreconditionViolated(_)
        | Error::AmbiguousResonance { .. }
        | Error::ResonanceDetected { .. } => 2,
        Error::NotSolvable { .. } => 3,
        Error::EigencurvePoint { source, .. } => exit_code(source),
        _ => 4,
    }
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

fn load(cli: &Cli) -> Result<LoadedProblem, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    io::load_problem_from_path(path)
}

fn read_config(cli: &Cli) -> Result<ConfigDoc, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    io::read_config(path)
}

fn lambda_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, Error> {
    if points == 0 {
        return Err(Error::PreconditionViolated("need at least one grid point".into()));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::PreconditionViolated(format!(
            "lambda range [{lo}, {hi}] is not ascending"
        )));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + step * i as f64).collect())
}

/// Functional parser: explicit JSON array, or density shorthands for
/// mesh-based configs.
fn parse_functional(problem: &LoadedProblem, text: &str) -> Result<DVector<f64>, Error> {
    let text = text.trim();
    if text.starts_with('[') {
        let values: Vec<f64> = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("bad functional array: {e}")))?;
        if values.len() != problem.triple.dim() {
            return Err(Error::DimensionMismatch(format!(
                "functional has length {}, problem dimension is {}",
                values.len(),
                problem.triple.dim()
            )));
        }
        return Ok(DVector::from_vec(values));
    }
    let mesh = problem.mesh.as_ref().ok_or_else(|| {
        Error::Config("density shorthand needs a mesh-based (steklov) config".into())
    })?;
    if let Some(value) = text.strip_prefix("f0=") {
        let c: f64 = value
            .parse()
            .map_err(|_| Error::Config(format!("bad interior density '{value}'")))?;
        return fredholm_core::build_rank_one_functional(
            mesh,
            &Density::Interior(fredholm_core::Coef::Const(c)),
            PositivityMode::Relaxed,
        );
    }
    if let Some(value) = text.strip_prefix("g0=") {
        let parts: Vec<&str> = value.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::Config("boundary density needs 'g0=L,R'".into()));
        }
        let l: f64 = parts[0]
            .parse()
            .map_err(|_| Error::Config(format!("bad boundary density '{value}'")))?;
        let r: f64 = parts[1]
            .parse()
            .map_err(|_| Error::Config(format!("bad boundary density '{value}'")))?;
        return fredholm_core::build_rank_one_functional(
            mesh,
            &Density::Boundary([l, r]),
            PositivityMode::Relaxed,
        );
    }
    Err(Error::Config(format!(
        "functional must be a JSON array, 'f0=C' or 'g0=L,R'; got '{text}'"
    )))
}

fn run(cli: &Cli) -> Result<i32, Error> {
    match &cli.command {
        Command::Validate => cmd_validate(cli),
        Command::Eigencurves {
            lambda_min,
            lambda_max,
            points,
            k,
            oracle,
        } => cmd_eigencurves(cli, *lambda_min, *lambda_max, *points, *k, *oracle),
        Command::SolveLinear {
            lambda,
            mu,
            ell,
            vhat,
        } => cmd_solve_linear(cli, *lambda, *mu, ell, vhat.as_deref()),
        Command::SolveNonlinear {
            lambda,
            mu,
            eps,
            method,
            resonant,
        } => cmd_solve_nonlinear(cli, *lambda, *mu, *eps, *method, *resonant),
        Command::Verify { suite } => cmd_verify(cli, *suite),
        Command::Oracle {
            lambda_min,
            lambda_max,
            points,
            k,
        } => cmd_oracle(cli, *lambda_min, *lambda_max, *points, *k),
    }
}

fn cmd_validate(cli: &Cli) -> Result<i32, Error> {
    let doc = read_config(cli)?;
    let mut text = String::new();
    let pass = match &doc {
        ConfigDoc::Triple(td) => {
            let report = td.validation_report()?;
            text.push_str(&format!("{report}\n"));
            report.pass
        }
        ConfigDoc::Steklov(_) => match io::load_problem(&doc) {
            Ok(problem) => {
                let report = problem.triple.validate();
                text.push_str(&format!("{report}\n"));
                let compat = check_compatibility(
                    problem.mesh.as_ref().expect("steklov config has a mesh"),
                    problem.coeffs.as_ref().expect("steklov config has coeffs"),
                );
                text.push_str(&format!(
                    "coefficient compatibility: {}\n",
                    if compat { "pass" } else { "FAIL" }
                ));
                report.pass && compat
            }
            Err(e) => {
                text.push_str(&format!("assembly failed: {e}\n"));
                false
            }
        },
    };
    write_output(&cli.out, &text)?;
    Ok(if pass { 0 } else { 2 })
}

fn cmd_eigencurves(
    cli: &Cli,
    lambda_min: f64,
    lambda_max: f64,
    points: usize,
    k: usize,
    oracle: bool,
) -> Result<i32, Error> {
    let problem = load(cli)?;
    let grid = lambda_grid(lambda_min, lambda_max, points)?;
    let table = trace_eigencurves(&problem.triple, &grid, k)?;
    let oracle_col = if oracle {
        let coeffs = problem.coeffs.as_ref().ok_or_else(|| {
            Error::PreconditionViolated("--oracle needs a steklov config".into())
        })?;
        let mut vals = Vec::with_capacity(table.rows.len());
        for row in &table.rows {
            vals.push(eigencurve_oracle_1d(coeffs, row.lambda, row.k)?);
        }
        Some(vals)
    } else {
        None
    };
    let mut buf = Vec::new();
    write_eigencurves_csv(&mut buf, &table, oracle_col.as_deref())?;
    write_output(&cli.out, &String::from_utf8(buf).expect("csv is utf-8"))?;
    Ok(0)
}

fn cmd_solve_linear(
    cli: &Cli,
    lambda: f64,
    mu: f64,
    ell_text: &str,
    vhat_text: Option<&str>,
) -> Result<i32, Error> {
    let problem = load(cli)?;
    let ell = parse_functional(&problem, ell_text)?;
    let data = canonical_data(&problem.triple, lambda)?;
    let group = resonance_group(&data, mu, cli.tol)?;
    let result = if group.is_empty() {
        fredholm_core::solve_nonresonant(&data, mu, &ell)
    } else {
        let vhat = match vhat_text {
            Some(text) => {
                let coeffs: Vec<f64> = serde_json::from_str(text)
                    .map_err(|e| Error::Config(format!("bad vhat array: {e}")))?;
                if coeffs.len() != group.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "vhat has {} coefficients, eigenspace dimension is {}",
                        coeffs.len(),
                        group.len()
                    )));
                }
                &group.basis * DVector::from_vec(coeffs)
            }
            None => DVector::zeros(problem.triple.dim()),
        };
        fredholm_core::solve_resonant(&data, &group, &ell, &vhat)
    };
    match result {
        Ok(sol) => {
            let json = linear_solution_json(&sol);
            write_output(&cli.out, &format!("{}\n", serde_json::to_string_pretty(&json)?))?;
            Ok(0)
        }
        Err(Error::NotSolvable { defect }) => {
            let payload = serde_json::json!({ "error": "not_solvable", "defect": defect });
            write_output(&cli.out, &format!("{}\n", serde_json::to_string_pretty(&payload)?))?;
            Ok(3)
        }
        Err(e) => Err(e),
    }
}

fn cmd_solve_nonlinear(
    cli: &Cli,
    lambda: f64,
    mu: f64,
    eps: f64,
    method: Method,
    resonant: bool,
) -> Result<i32, Error> {
    let problem = load(cli)?;
    let spec = problem
        .nonlinearity
        .clone()
        .ok_or_else(|| Error::Config("config has no nonlinearity section".into()))?;
    let data = canonical_data(&problem.triple, lambda)?;
    let n = problem.triple.dim();

    let solved = if resonant {
        if method == Method::Picard {
            return Err(Error::PreconditionViolated(
                "picard is undefined at resonance; use newton or auto".into(),
            ));
        }
        let group = resonance_group(&data, mu, cli.tol)?;
        if group.is_empty() {
            return Err(Error::PreconditionViolated(format!(
                "(lambda, mu) = ({lambda}, {mu}) is not resonant at tol {}",
                cli.tol
            )));
        }
        let u0 = fredholm_core::find_bifurcation_point(&group, &spec)?;
        let (ok, cond) =
            fredholm_core::injectivity_check(&fredholm_core::lambda_operator(&spec, &u0, &group));
        if !ok {
            return Err(Error::InjectivityFailed(cond));
        }
        // Continuation in eps with warm starts, recorded as the branch trace.
        let mut trace = Vec::new();
        let mut current = u0.clone();
        let mut sol = None;
        for step in 1..=4 {
            let e = eps * step as f64 / 4.0;
            let s = fredholm_core::newton_solve_resonant(&data, &group, &spec, e, &current)?;
            current = s.u.clone();
            trace.push(BranchPoint {
                eps: e,
                distance_to_u0: (&s.u - &u0).norm(),
                residual: s.residual,
                iterations: s.iterations,
            });
            sol = Some(s);
        }
        let mut sol = sol.expect("four continuation steps ran");
        let side = fredholm_core::nonlinear::side_condition_defect(&group, &spec, &sol.u);
        sol.branch_info = Some(BranchInfo { u0, trace });
        (sol, Some(side))
    } else {
        let zeros = DVector::zeros(n);
        let sol = match method {
            Method::Picard => {
                fredholm_core::picard_solve(&data, mu, &spec, eps, &zeros, cli.tol, 1000)?
            }
            Method::Newton => {
                fredholm_core::newton_solve_nonresonant(&data, mu, &spec, eps, &zeros)?
            }
            Method::Auto => fredholm_core::newton_solve_nonresonant(&data, mu, &spec, eps, &zeros)
                .or_else(|_| {
                    fredholm_core::picard_solve(&data, mu, &spec, eps, &zeros, cli.tol, 1000)
                })?,
        };
        (sol, None)
    };

    let json = nonlinear_solution_json(&solved.0, solved.1);
    write_output(&cli.out, &format!("{}\n", serde_json::to_string_pretty(&json)?))?;
    Ok(0)
}

fn cmd_verify(cli: &Cli, suite: Suite) -> Result<i32, Error> {
    let problem = load(cli)?;
    let mut reports = Vec::new();
    let lambda = 0.25;
    if matches!(suite, Suite::Spectrum | Suite::All) {
        reports.push(spectrum_suite(&problem.triple, lambda)?);
    }
    if matches!(suite, Suite::Bounds | Suite::All) {
        reports.push(bounds_suite(&problem.triple, cli.seed, 50)?);
    }
    if matches!(suite, Suite::Nonlinear | Suite::All) {
        reports.push(nonlinear_suite(&problem.triple, cli.seed)?);
    }
    if matches!(suite, Suite::Nemytskii | Suite::All) {
        let default_mesh;
        let mesh = match problem.mesh.as_ref() {
            Some(m) => m,
            None => {
                default_mesh = Mesh1D::uniform(64, [0.0, 1.0])?;
                &default_mesh
            }
        };
        reports.push(nemytskii_suite(mesh)?);
    }

    let mut text = String::new();
    let mut all_pass = true;
    for report in &reports {
        text.push_str(&format!("suite {}\n", report.suite));
        for c in &report.checks {
            all_pass &= c.pass;
            text.push_str(&format!(
                "  [{}] {:<42} {}\n",
                if c.pass { "pass" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
    }
    text.push_str(&format!(
        "overall: {}\n",
        if all_pass { "pass" } else { "FAIL" }
    ));
    write_output(&cli.out, &text)?;
    Ok(if all_pass { 0 } else { 2 })
}

fn cmd_oracle(
    cli: &Cli,
    lambda_min: f64,
    lambda_max: f64,
    points: usize,
    k: usize,
) -> Result<i32, Error> {
    let problem = load(cli)?;
    let coeffs = problem
        .coeffs
        .as_ref()
        .ok_or_else(|| Error::PreconditionViolated("oracle needs a steklov config".into()))?;
    let grid = lambda_grid(lambda_min, lambda_max, points)?;
    let mut rows = Vec::new();
    for &lambda in &grid {
        for curve in 1..=k {
            rows.push(fredholm_core::spectrum::CurvePoint {
                lambda,
                k: curve,
                mu: eigencurve_oracle_1d(coeffs, lambda, curve)?,
            });
        }
    }
    let table = EigencurveTable { k_max: k, rows };
    let mut buf = Vec::new();
    write_eigencurves_csv(&mut buf, &table, None)?;
    write_output(&cli.out, &String::from_utf8(buf).expect("csv is utf-8"))?;
    Ok(0)
}
