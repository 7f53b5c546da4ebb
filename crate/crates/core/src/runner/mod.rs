//! Batch front end: JSON run configurations in, `report.json`, `trace.csv`
//! and field dumps out.
//!
//! Exit codes: 0 for converged or solvable outcomes (and passing audits), 2
//! for expected negative results (divergence, not solvable), 1 for errors,
//! failed audits and solves that hit the iteration cap.

mod config;
mod dump;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub use config::{AuditOptions, Command, GridSpec, OutputSpec, RunConfig};
pub use dump::{decode_field, dump_field, encode_field, export_csv, header, load_field};

use crate::certificate::{
    certify, lowest_harmonic, wirtinger_audit, wirtinger_constant, wirtinger_ratio, Verdict,
};
use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};
use crate::minimizer::{newton_krylov_refine, solve, write_trace_csv, SolveStatus};
use crate::operators::{action_gradient, mean_force, DiffOperator, Scheme};
use crate::oracle::{dense_quadratic_solution, fd_directional};
use crate::potential::{check_gradient, CatalogPotential, Potential};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const FIELD_FILE: &str = "field.bin";
pub const CSV_FILE: &str = "field.csv";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Value,
    pub out_dir: PathBuf,
}

/// Sizes the global rayon pool from `threads`, falling back to the
/// `TORUS_ACTION_THREADS` environment variable. Returns the count applied.
pub fn configure_threads(threads: Option<usize>) -> Result<Option<usize>> {
    let count = match threads {
        Some(t) => Some(t),
        None => match std::env::var("TORUS_ACTION_THREADS") {
            Ok(s) => Some(s.trim().parse::<usize>().map_err(|_| {
                Error::Config(format!(
                    "TORUS_ACTION_THREADS must be a positive integer, got {s:?}"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(t) = count {
        if t == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        // a pool that is already set up keeps its size
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    Ok(count)
}

/// Loads the config, runs `command`, writes outputs and returns the exit
/// code. Errors are reported on stderr and, when an output directory is
/// known, in `report.json`.
pub fn run(command: Command, config_path: &Path, overrides: &Overrides) -> i32 {
    let start = Instant::now();
    let config = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(dir) = &overrides.out {
                let report = error_report(command, None, &e, start);
                let _ = write_report(dir, &report);
            }
            return EXIT_ERROR;
        }
    };
    let out_dir = overrides
        .out
        .clone()
        .unwrap_or_else(|| config.outputs.dir.clone());
    match execute(command, &config, overrides) {
        Ok(outcome) => outcome.exit_code,
        Err(e) => {
            eprintln!("error: {e}");
            let report = error_report(command, Some(&config), &e, start);
            if let Err(w) = write_report(&out_dir, &report) {
                eprintln!("error: {w}");
            }
            EXIT_ERROR
        }
    }
}

fn error_report(command: Command, config: Option<&RunConfig>, e: &Error, start: Instant) -> Value {
    json!({
        "command": command.name(),
        "config": config.map(|c| serde_json::to_value(c).unwrap_or(Value::Null)),
        "status": "error",
        "error": e.to_string(),
        "exit_code": EXIT_ERROR,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": start.elapsed().as_secs_f64(),
    })
}

/// Serializes with sorted keys and a trailing newline.
pub fn write_report(dir: &Path, report: &Value) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(REPORT_FILE);
    let mut text = serde_json::to_string_pretty(report).expect("report values are finite JSON");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Runs a parsed config. Unlike [`run`], failures are returned as errors and
/// no error report is written.
pub fn execute(command: Command, config: &RunConfig, overrides: &Overrides) -> Result<RunOutcome> {
    let start = Instant::now();
    if let Some(c) = config.command {
        if c != command {
            return Err(Error::Config(format!(
                "config is for command {:?} but {:?} was requested",
                c.name(),
                command.name()
            )));
        }
    }
    let mut config = config.clone();
    let seed = overrides.seed.or(config.seed).unwrap_or(config.solver.seed);
    config.seed = Some(seed);
    config.solver.seed = seed;
    config.certify.seed = seed;
    let out_dir = overrides
        .out
        .clone()
        .unwrap_or_else(|| config.outputs.dir.clone());
    let grid = config.validate()?;
    let (pot, exact) = config.potential.build(&grid)?;
    let op = DiffOperator::new(&grid, config.scheme);
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let (exit_code, status, body) = match command {
        Command::Solve => run_solve(&config, &grid, &pot, &op, exact.as_ref(), &out_dir)?,
        Command::Certify => run_certify(&config, &grid, &pot, &op)?,
        Command::CheckGrad => run_check_grad(&config, &grid, &pot)?,
        Command::Wirtinger => run_wirtinger(&config, &op)?,
        Command::OracleCompare => run_oracle_compare(&config, &grid, &pot, &op)?,
    };
    let mut report = json!({
        "command": command.name(),
        "config": serde_json::to_value(&config).expect("config serializes"),
        "status": status,
        "exit_code": exit_code,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "potential_metadata": pot.metadata(),
    });
    if let (Value::Object(map), Value::Object(extra)) = (&mut report, body) {
        map.extend(extra);
    }
    report["wall_time_s"] = json!(start.elapsed().as_secs_f64());
    write_report(&out_dir, &report)?;
    Ok(RunOutcome {
        exit_code,
        report,
        out_dir,
    })
}

type CommandResult = Result<(i32, &'static str, Value)>;

fn certificate_json(
    config: &RunConfig,
    grid: &Arc<TorusGrid>,
    pot: &CatalogPotential,
    op: &DiffOperator,
) -> Result<(Verdict, Value)> {
    let cert = certify(grid, pot, op, &config.certify)?;
    let verdict = cert.verdict;
    Ok((
        verdict,
        serde_json::to_value(cert).expect("certificate serializes"),
    ))
}

fn run_solve(
    config: &RunConfig,
    grid: &Arc<TorusGrid>,
    pot: &CatalogPotential,
    op: &DiffOperator,
    exact: Option<&Field>,
    out_dir: &Path,
) -> CommandResult {
    let mut result = solve(grid, pot, op, &config.solver, None)?;
    let mut refined = false;
    if let Some(tol) = config.refine_tol {
        if result.status != SolveStatus::DivergedNonCoercive {
            result = newton_krylov_refine(&result, pot, op, tol)?;
            refined = true;
        }
    }
    let (verdict, certificate) = certificate_json(config, grid, pot, op)?;

    if config.outputs.trace {
        let path = out_dir.join(TRACE_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_trace_csv(&result.trace, std::io::BufWriter::new(file))
            .map_err(|e| Error::io(&path, e))?;
    }
    if config.outputs.dump_field {
        dump_field(&result.u, &out_dir.join(FIELD_FILE))?;
    }
    if config.outputs.csv {
        export_csv(&result.u, &out_dir.join(CSV_FILE))?;
    }

    let (exit_code, status) = match result.status {
        SolveStatus::Converged => (EXIT_OK, "converged"),
        SolveStatus::DivergedNonCoercive => (EXIT_NEGATIVE, "diverged_non_coercive"),
        SolveStatus::MaxIters => (EXIT_ERROR, "max_iters"),
    };
    let body = json!({
        "solve_status": result.status,
        "iterations": result.iterations,
        "action": result.action,
        "residual_inf": result.residual_inf,
        "residual_l2": result.residual_l2,
        "mean": result.mean,
        "fluctuation_h1_norm": result.fluctuation_h1_norm,
        "mean_force": mean_force(&result.u, pot)?,
        "line_search_failed": result.line_search_failed,
        "refined": refined,
        "notes": result.notes,
        "error_vs_exact_inf": exact.map(|e| result.u.max_diff(e)),
        "certificate": certificate,
        "verdict": verdict,
    });
    Ok((exit_code, status, body))
}

fn run_certify(
    config: &RunConfig,
    grid: &Arc<TorusGrid>,
    pot: &CatalogPotential,
    op: &DiffOperator,
) -> CommandResult {
    let (verdict, certificate) = certificate_json(config, grid, pot, op)?;
    let (code, status) = match verdict {
        Verdict::Solvable => (EXIT_OK, "solvable"),
        Verdict::Inconclusive => (EXIT_OK, "inconclusive"),
        Verdict::NotSolvable => (EXIT_NEGATIVE, "not_solvable"),
    };
    Ok((
        code,
        status,
        json!({ "certificate": certificate, "verdict": verdict }),
    ))
}

fn random_field(grid: &Arc<TorusGrid>, n: usize, rng: &mut ChaCha8Rng) -> Field {
    Field::from_fn(grid, n, |_, o| {
        o.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0))
    })
}

/// `|fd − exact| / max(|exact|, 1)`.
pub fn directional_error(fd: f64, exact: f64) -> f64 {
    (fd - exact).abs() / exact.abs().max(1.0)
}

fn run_check_grad(
    config: &RunConfig,
    grid: &Arc<TorusGrid>,
    pot: &CatalogPotential,
) -> CommandResult {
    let audit = &config.audit;
    let seed = config.solver.seed;
    let pointwise = check_gradient(pot, grid.periods(), 100, seed);
    let mut per_scheme = serde_json::Map::new();
    let mut worst: f64 = 0.0;
    for scheme in [Scheme::Spectral, Scheme::Fd2] {
        let op = DiffOperator::new(grid, scheme);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_field(grid, pot.n(), &mut rng);
        let grad = action_gradient(&u, pot, &op)?;
        let mut errors = Vec::with_capacity(audit.directions);
        for _ in 0..audit.directions {
            let v = random_field(grid, pot.n(), &mut rng);
            let fd = fd_directional(&u, &v, pot, &op, audit.epsilon)?;
            errors.push(directional_error(fd, grad.l2_dot(&v)));
        }
        let max = errors.iter().copied().fold(0.0, f64::max);
        worst = worst.max(max);
        per_scheme.insert(
            serde_json::to_value(scheme)
                .unwrap()
                .as_str()
                .unwrap()
                .to_string(),
            json!({ "max_relative_error": max, "errors": errors }),
        );
    }
    let passed = worst <= audit.tolerance;
    let body = json!({
        "pointwise_gradient_error": pointwise,
        "action_gradient": per_scheme,
        "max_relative_error": worst,
        "tolerance": audit.tolerance,
        "passed": passed,
    });
    Ok(if passed {
        (EXIT_OK, "passed", body)
    } else {
        (EXIT_ERROR, "failed", body)
    })
}

fn run_wirtinger(config: &RunConfig, op: &DiffOperator) -> CommandResult {
    let constant = wirtinger_constant(op);
    let worst = wirtinger_audit(op, config.audit.wirtinger_trials, config.solver.seed)?;
    let extremal = wirtinger_ratio(op, &lowest_harmonic(op))?.unwrap_or(0.0);
    let passed = worst <= constant * (1.0 + 1e-10) && (extremal - constant).abs() <= 1e-8;
    let body = json!({
        "wirtinger_constant": constant,
        "max_ratio": worst,
        "extremal_ratio": extremal,
        "trials": config.audit.wirtinger_trials,
        "passed": passed,
    });
    Ok(if passed {
        (EXIT_OK, "passed", body)
    } else {
        (EXIT_ERROR, "failed", body)
    })
}

fn run_oracle_compare(
    config: &RunConfig,
    grid: &Arc<TorusGrid>,
    pot: &CatalogPotential,
    op: &DiffOperator,
) -> CommandResult {
    let q = pot
        .as_quadratic(grid)
        .ok_or_else(|| Error::Config("oracle-compare needs a quadratic potential".into()))?;
    let dense = dense_quadratic_solution(op, &q.a, &q.g)?;
    let mut result = solve(grid, pot, op, &config.solver, None)?;
    if let Some(tol) = config.refine_tol {
        result = newton_krylov_refine(&result, pot, op, tol)?;
    }
    let gap = result.u.max_diff(&dense);
    let passed = result.status == SolveStatus::Converged && gap <= 1e-8;
    let body = json!({
        "solve_status": result.status,
        "iterations": result.iterations,
        "max_gap": gap,
        "residual_inf": result.residual_inf,
        "passed": passed,
    });
    Ok(if passed {
        (EXIT_OK, "passed", body)
    } else {
        (EXIT_ERROR, "failed", body)
    })
}
