//! Batch command-line front end: config in, CSV and JSON reports out.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::closed_form::sampson_analyze;
use crate::config::RunConfig;
use crate::error::{BiharmError, Result};
use crate::euler_lagrange::{
    default_fd_step, el_residual_along_curve, DiscreteFunction, DiscreteProblem, SmoothCurve,
};
use crate::lagrangian::{GeometrySpec, Lagrangian};
use crate::solver::{residual_check, solve, InitialGuess};
use crate::spline::QuinticSpline;
use crate::stability::analyze_stability;
use crate::verify::{self, VerifyOptions, FAMILIES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_NONCONVERGED: i32 = 4;

pub const SOLUTION_HEADER: &str = "t,alpha,alpha_dot,alpha_ddot,tension";
pub const RESIDUAL_HEADER: &str = "t,residual";
pub const EIGEN_HEADER: &str = "index,eigenvalue";

/// Residual step for configured curves, as a fraction of the domain length.
pub const ANALYTIC_FD_FRACTION: f64 = 1e-2;

const NORMALIZATION_NOTE: &str = "energies are reduced bienergies: constant factors from \
integrating over the symmetry orbits are dropped";

#[derive(Debug, Parser)]
#[command(
    name = "biharm",
    version,
    about = "Reduced bienergy toolkit for equivariant maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration (a previously written report is accepted too).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; BIHARM_OUT takes precedence when set.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Euler-Lagrange residual along the configured curve or a solution file.
    Residual {
        #[command(flatten)]
        common: Common,
        /// Solution CSV to interpolate instead of the configured curve.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Newton search for a discrete critical point.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Spectral classification of a critical point.
    Stability {
        #[command(flatten)]
        common: Common,
        /// Solution CSV; defaults to the configured initial profile.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Positive minimum of the profile s sinh s + e^s.
    Sampson {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: f64,
    },
    /// Runs the oracle families and reports pass/fail for each.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated families to run (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
        /// Corrupt the geometry partials to check that the suite can fail.
        #[arg(long)]
        inject_fault: bool,
    },
}

/// Outcome of a command: text for stdout and the process exit code.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(code: i32, stdout: String) -> Self {
        Self {
            code,
            stdout,
            stderr: String::new(),
        }
    }
}

pub fn exit_code(err: &BiharmError) -> i32 {
    match err {
        BiharmError::InvalidParameter(_) | BiharmError::Incompatible(_) => EXIT_USAGE,
        BiharmError::Domain { .. }
        | BiharmError::StencilMargin { .. }
        | BiharmError::NonPositiveWarp { .. }
        | BiharmError::NotCritical { .. }
        | BiharmError::NonFinite(_) => EXIT_DOMAIN,
        BiharmError::NotConverged { .. }
        | BiharmError::Singular { .. }
        | BiharmError::Eigen(_)
        | BiharmError::NoSignChange { .. } => EXIT_NONCONVERGED,
    }
}

/// Runs a parsed command. `env_out` is the value of `BIHARM_OUT`, if set.
pub fn run(cli: Cli, env_out: Option<PathBuf>) -> Outcome {
    let result = match cli.command {
        Command::Residual { common, solution } => {
            cmd_residual(&common, env_out, solution.as_deref())
        }
        Command::Solve { common } => cmd_solve(&common, env_out),
        Command::Stability { common, solution } => {
            cmd_stability(&common, env_out, solution.as_deref())
        }
        Command::Sampson { common, lambda } => cmd_sampson(&common, env_out, lambda),
        Command::Verify {
            common,
            only,
            inject_fault,
        } => cmd_verify(&common, only, inject_fault),
    };
    match result {
        Ok(o) => o,
        Err(e) => Outcome {
            code: exit_code(&e),
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| BiharmError::InvalidParameter("--config is required".into()))?;
    RunConfig::load(path)
}

fn out_dir(common: &Common, env_out: Option<PathBuf>, cfg: Option<&RunConfig>) -> PathBuf {
    env_out
        .or_else(|| common.out.clone())
        .or_else(|| cfg.map(|c| PathBuf::from(&c.output.directory)))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn io_err(path: &Path, e: std::io::Error) -> BiharmError {
    BiharmError::InvalidParameter(format!("cannot write {}: {e}", path.display()))
}

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, &target).map_err(|e| io_err(&target, e))?;
    Ok(target)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn solution_csv(geom: &GeometrySpec, df: &DiscreteFunction) -> Result<String> {
    let problem = DiscreteProblem::new(geom, df.grid().clone())?;
    let mut out = String::from(SOLUTION_HEADER);
    out.push('\n');
    for i in 0..df.grid().n() {
        let jet = problem.node_jet(df, i);
        let tension = geom.tension(&jet)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(jet.t),
            num(jet.x[0]),
            num(jet.p[0]),
            num(jet.q[0]),
            num(tension)
        );
    }
    Ok(out)
}

/// Reads the `alpha` column of a solution CSV onto the configured grid.
pub fn load_solution(path: &Path, cfg: &RunConfig) -> Result<DiscreteFunction> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        BiharmError::InvalidParameter(format!("cannot read solution {}: {e}", path.display()))
    })?;
    let values = parse_solution(&text)?;
    let grid = cfg.resolve()?.grid;
    if values.len() != grid.n() {
        return Err(BiharmError::Incompatible(format!(
            "solution has {} rows, grid has {} nodes",
            values.len(),
            grid.n()
        )));
    }
    for ((t, _), node) in values.iter().zip(grid.nodes()) {
        if (t - node).abs() > 1e-9 * (1.0 + node.abs()) {
            return Err(BiharmError::Incompatible(format!(
                "solution row at t = {t} does not match grid node {node}"
            )));
        }
    }
    DiscreteFunction::new(grid, 1, values.into_iter().map(|(_, a)| a).collect())
}

fn parse_solution(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(SOLUTION_HEADER) {
        return Err(BiharmError::InvalidParameter(format!(
            "solution file must start with `{SOLUTION_HEADER}`"
        )));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| {
                    BiharmError::InvalidParameter(format!("bad number `{s}` in solution file"))
                })
            };
            if cols.len() != 5 {
                return Err(BiharmError::InvalidParameter(format!(
                    "expected 5 columns in `{l}`"
                )));
            }
            Ok((parse(cols[0])?, parse(cols[1])?))
        })
        .collect()
}

fn initial_profile(cfg: &RunConfig) -> Result<DiscreteFunction> {
    let grid = cfg.resolve()?.grid;
    match &cfg.initial {
        InitialGuess::File { path } => load_solution(Path::new(path), cfg),
        other => other.build(grid, 1, None),
    }
}

fn cmd_residual(
    common: &Common,
    env_out: Option<PathBuf>,
    solution: Option<&Path>,
) -> Result<Outcome> {
    let cfg = load_config(common)?;
    let resolved = cfg.resolve()?;
    let geom = &resolved.geometry;
    let domain = geom.domain();
    // analytic curves tolerate a wider step, which keeps roundoff in the second
    // difference of L_q well below the truncation error; spline knots do not
    let (curve, fd_step): (Box<dyn SmoothCurve>, f64) = match (solution, &cfg.curve) {
        (Some(path), _) => (
            Box::new(QuinticSpline::interpolate(&load_solution(path, &cfg)?)?),
            default_fd_step(domain.length()),
        ),
        (None, Some(c)) => (c.build()?, ANALYTIC_FD_FRACTION * domain.length()),
        (None, None) => {
            return Err(BiharmError::InvalidParameter(
                "residual needs a `curve` in the config or --solution".into(),
            ))
        }
    };
    let n = resolved.grid.n();
    let samples: Vec<f64> = if domain.periodic {
        resolved.grid.nodes()
    } else {
        // evenly spaced, keeping the stencil inside the domain
        let (lo, hi) = (domain.a + 2.0 * fd_step, domain.b - 2.0 * fd_step);
        (0..n)
            .map(|i| lo + (hi - lo) * (i + 1) as f64 / (n + 1) as f64)
            .collect()
    };
    let mut csv = format!("{RESIDUAL_HEADER}\n");
    let mut worst = 0.0_f64;
    for t in samples {
        let r = el_residual_along_curve(geom, curve.as_ref(), t, fd_step)?[0];
        worst = worst.max(r.abs());
        let _ = writeln!(csv, "{},{}", num(t), num(r));
    }
    let dir = out_dir(common, env_out, Some(&cfg));
    let mut stdout = format!("max |residual| = {worst:.3e}\n");
    if cfg.output.emit_csv {
        let p = write_atomic(&dir, "residual.csv", &csv)?;
        let _ = writeln!(stdout, "wrote {}", p.display());
    }
    Ok(Outcome::ok(EXIT_OK, stdout))
}

fn cmd_solve(common: &Common, env_out: Option<PathBuf>) -> Result<Outcome> {
    let cfg = load_config(common)?;
    let resolved = cfg.resolve()?;
    let geom = &resolved.geometry;
    let initial = initial_profile(&cfg)?;
    let report = solve(geom, &initial, &cfg.solver)?;
    let sol = &report.solution;
    let check = if report.converged {
        Some(residual_check(geom, sol)?)
    } else {
        None
    };
    let sup_error = match &cfg.exact {
        Some(c) => {
            let exact = c.build()?;
            Some(
                sol.grid()
                    .nodes()
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| (sol.value(i, 0) - exact.jet4(t).x[0]).abs())
                    .fold(0.0, f64::max),
            )
        }
        None => None,
    };
    let body = json!({
        "report": {
            "command": "solve",
            "converged": report.converged,
            "energy": report.energy,
            "grad_norm": report.grad_norm,
            "tolerance": report.tolerance,
            "iterations": report.iterations,
            "residual_check": check,
            "sup_error": sup_error,
            "note": NORMALIZATION_NOTE,
        },
        "config": cfg,
    });
    let dir = out_dir(common, env_out, Some(&cfg));
    let mut stdout = format!(
        "converged: {}\nenergy: {}\ngrad_norm: {:.3e}\niterations: {}\n",
        report.converged,
        num(report.energy),
        report.grad_norm,
        report.iterations
    );
    if let Some(e) = sup_error {
        let _ = writeln!(stdout, "sup_error: {e:.3e}");
    }
    if cfg.output.emit_csv {
        let p = write_atomic(&dir, "solution.csv", &solution_csv(geom, sol)?)?;
        let _ = writeln!(stdout, "wrote {}", p.display());
    }
    if cfg.output.emit_report {
        let p = write_atomic(&dir, "report.json", &pretty(&body)?)?;
        let _ = writeln!(stdout, "wrote {}", p.display());
    }
    let code = if report.converged {
        EXIT_OK
    } else {
        EXIT_NONCONVERGED
    };
    Ok(Outcome::ok(code, stdout))
}

fn pretty(v: &serde_json::Value) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| BiharmError::InvalidParameter(format!("cannot serialize report: {e}")))
}

fn cmd_stability(
    common: &Common,
    env_out: Option<PathBuf>,
    solution: Option<&Path>,
) -> Result<Outcome> {
    let cfg = load_config(common)?;
    let resolved = cfg.resolve()?;
    let df = match solution {
        Some(p) => load_solution(p, &cfg)?,
        None => initial_profile(&cfg)?,
    };
    let rep = analyze_stability(&resolved.geometry, &df, cfg.stability.pos_tol)?;
    let mut stdout = format!(
        "classification: {}\npos_tol: {:.3e}\nlowest eigenvalues:\n",
        rep.classification.label(),
        rep.pos_tol
    );
    for v in &rep.eigen_low {
        let _ = writeln!(stdout, "  {v:.10e}");
    }
    for q in &rep.quad_form_checks {
        match q.analytic {
            Some(a) => {
                let _ = writeln!(
                    stdout,
                    "quadratic form {}: {:.10} (continuum {:.10})",
                    q.label, q.discrete, a
                );
            }
            None => {
                let _ = writeln!(stdout, "quadratic form {}: {:.10}", q.label, q.discrete);
            }
        }
    }
    let dir = out_dir(common, env_out, Some(&cfg));
    if cfg.output.emit_csv {
        let mut csv = format!("{EIGEN_HEADER}\n");
        for (i, v) in rep.spectrum.iter().enumerate() {
            let _ = writeln!(csv, "{i},{}", num(*v));
        }
        let p = write_atomic(&dir, "eigenvalues.csv", &csv)?;
        let _ = writeln!(stdout, "wrote {}", p.display());
    }
    if cfg.output.emit_report {
        let body = json!({
            "report": {
                "command": "stability",
                "classification": rep.classification,
                "pos_tol": rep.pos_tol,
                "eigen_low": rep.eigen_low,
                "quad_form_checks": rep.quad_form_checks,
                "note": NORMALIZATION_NOTE,
            },
            "config": cfg,
        });
        let p = write_atomic(&dir, "stability.json", &pretty(&body)?)?;
        let _ = writeln!(stdout, "wrote {}", p.display());
    }
    Ok(Outcome::ok(EXIT_OK, stdout))
}

fn cmd_sampson(common: &Common, env_out: Option<PathBuf>, lambda: f64) -> Result<Outcome> {
    let rep = sampson_analyze(lambda)?;
    let body = json!({
        "report": {
            "command": "sampson",
            "lambda": rep.lambda,
            "r0": rep.r0,
            "alpha_min": rep.alpha_min,
            "alpha_dot_r0": rep.alpha_dot_r0,
            "violates_principle": rep.violates_principle,
            "end_margin": rep.end_margin,
            "ode_residual": rep.ode_residual,
        }
    });
    let text = pretty(&body)?;
    let mut stdout = text.clone();
    if common.out.is_some() || env_out.is_some() {
        let p = write_atomic(&out_dir(common, env_out, None), "sampson.json", &text)?;
        let _ = writeln!(stdout, "wrote {}", p.display());
    }
    Ok(Outcome::ok(EXIT_OK, stdout))
}

fn cmd_verify(common: &Common, only: Option<Vec<String>>, inject_fault: bool) -> Result<Outcome> {
    let families: Vec<String> = match only {
        Some(list) => list
            .into_iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect(),
        None => FAMILIES.iter().map(|s| s.to_string()).collect(),
    };
    let results = verify::run(
        &families,
        VerifyOptions {
            seed: common.seed,
            inject_fault,
        },
    )?;
    let mut stdout = String::new();
    for r in &results {
        let _ = writeln!(
            stdout,
            "{} {:<12} {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.family,
            r.detail
        );
    }
    let code = if results.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_VERIFY
    };
    Ok(Outcome::ok(code, stdout))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_solution_rows() {
        let text = format!("{SOLUTION_HEADER}\n0,1,0,0,0\n0.5,2,0,0,0\n");
        assert_eq!(parse_solution(&text).unwrap(), vec![(0.0, 1.0), (0.5, 2.0)]);
        assert!(parse_solution("t,alpha\n0,1\n").is_err());
        assert!(parse_solution(&format!("{SOLUTION_HEADER}\n0,x,0,0,0\n")).is_err());
    }

    #[test]
    fn seventeen_significant_digits() {
        let s = num(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            exit_code(&BiharmError::InvalidParameter("x".into())),
            EXIT_USAGE
        );
        assert_eq!(
            exit_code(&BiharmError::Domain {
                t: 2.0,
                a: 0.0,
                b: 1.0
            }),
            EXIT_DOMAIN
        );
        assert_eq!(
            exit_code(&BiharmError::NotConverged {
                iterations: 1,
                grad_norm: 1.0
            }),
            EXIT_NONCONVERGED
        );
    }
}
