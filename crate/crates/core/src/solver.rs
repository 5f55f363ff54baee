//! Damped Newton iteration on the discrete gradient, and a manufactured-solution
//! harness that measures the observed order of accuracy.

use crate::error::{BiharmError, Result};
use crate::euler_lagrange::{
    default_fd_step, el_residual_along_curve, norm, BoundaryConditions, ClampedEnds,
    DiscreteFunction, DiscreteProblem, Grid, SmoothCurve,
};
use crate::lagrangian::{Lagrangian, Slot};
use crate::spline::QuinticSpline;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Initial step factor of the halving line search.
    pub damping: f64,
    pub min_damping: f64,
    /// Levenberg shift relative to the largest Hessian diagonal entry; escalated
    /// automatically when a Newton step fails.
    pub regularization: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-10,
            damping: 1.0,
            min_damping: 0.5_f64.powi(20),
            regularization: 0.0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BiharmError::InvalidParameter(m.into()));
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return bad("grad_tol must be positive");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if !(self.min_damping > 0.0 && self.min_damping <= self.damping) {
            return bad("min_damping must lie in (0, damping]");
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return bad("regularization must be non-negative");
        }
        Ok(())
    }
}

/// Levenberg shifts are tried from this relative size upwards, by factors of ten.
const MU_START: f64 = 1e-12;
const MU_MAX: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: DiscreteFunction,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub energy: f64,
    /// Tolerance actually applied: `grad_tol`, raised to the rounding floor of the
    /// gradient when that is larger.
    pub tolerance: f64,
    /// Gradient norm after every accepted iterate, starting with the initial one.
    pub grad_history: Vec<f64>,
}

/// Damped Newton search for a zero of the discrete gradient, starting at `initial`.
///
/// Steps are accepted when they reduce `|grad|^2`; if the Newton direction is not a
/// descent direction for it, or no step length works, the Hessian is shifted.
/// Non-convergence is not an error: the report carries `converged = false` and the
/// last accepted iterate.
pub fn solve<L: Lagrangian + ?Sized>(
    lag: &L,
    initial: &DiscreteFunction,
    cfg: &SolveConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    if initial.dim() != lag.dim() {
        return Err(BiharmError::Incompatible(format!(
            "initial profile has {} components, geometry expects {}",
            initial.dim(),
            lag.dim()
        )));
    }
    let problem = DiscreteProblem::new(lag, initial.grid().clone())?;
    let mut x = initial.clone();
    let mut grad = problem.gradient(&x)?;
    let mut gnorm = norm(&grad);
    let mut history = vec![gnorm];
    let mut iterations = 0;
    let mut tolerance;
    let mut converged = false;

    loop {
        let hess = problem.hessian(&x)?;
        tolerance = cfg.grad_tol.max(problem.gradient_noise_floor(&hess, &x));
        if gnorm <= tolerance {
            converged = true;
            break;
        }
        if iterations == cfg.max_iter {
            break;
        }
        let scale = hess.max_abs_diagonal().max(f64::MIN_POSITIVE);
        let free = x.free_values();
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut mu = cfg.regularization;
        let mut last_err = None;
        let mut accepted = None;
        loop {
            let mut shifted = hess.clone();
            if mu > 0.0 {
                shifted.add_diagonal(mu * scale);
            }
            match shifted.solve(&neg) {
                Ok(step) => {
                    // d/ds |g(x + s step)|^2 at s = 0 is 2 g^T H step
                    let hs = hess.mul_vec(&step);
                    let slope: f64 = grad.iter().zip(&hs).map(|(g, v)| g * v).sum();
                    if slope < 0.0 {
                        accepted = line_search(&problem, &x, &free, &step, gnorm, cfg)?;
                    }
                }
                Err(e @ BiharmError::Singular { .. }) => last_err = Some(e),
                Err(e) => return Err(e),
            }
            if accepted.is_some() {
                break;
            }
            mu = if mu == 0.0 { MU_START } else { mu * 10.0 };
            if mu > MU_MAX {
                break;
            }
        }
        match accepted {
            Some((nx, ng)) => {
                x = nx;
                grad = ng;
                gnorm = norm(&grad);
                history.push(gnorm);
                iterations += 1;
            }
            None => {
                if let Some(e) = last_err {
                    return Err(e);
                }
                // stagnated: no shift produced a decrease
                break;
            }
        }
    }

    let energy = problem.energy(&x)?;
    Ok(SolveReport {
        solution: x,
        grad_norm: gnorm,
        iterations,
        converged,
        energy,
        tolerance,
        grad_history: history,
    })
}

fn line_search<L: Lagrangian + ?Sized>(
    problem: &DiscreteProblem<'_, L>,
    x: &DiscreteFunction,
    free: &[f64],
    step: &[f64],
    gnorm: f64,
    cfg: &SolveConfig,
) -> Result<Option<(DiscreteFunction, Vec<f64>)>> {
    let target = gnorm * gnorm;
    let mut s = cfg.damping;
    while s >= cfg.min_damping {
        let trial: Vec<f64> = free.iter().zip(step).map(|(a, d)| a + s * d).collect();
        if let Ok(candidate) = x.with_free_values(&trial) {
            // points where the Lagrangian is undefined count as rejected steps
            if let Ok(g) = problem.gradient(&candidate) {
                let n2: f64 = g.iter().map(|v| v * v).sum();
                if n2 < target {
                    return Ok(Some((candidate, g)));
                }
            }
        }
        s *= 0.5;
    }
    Ok(None)
}

/// Starting profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialGuess {
    Constant {
        value: f64,
    },
    /// `base + amplitude cos(mode t)`.
    Fourier {
        base: f64,
        amplitude: f64,
        mode: f64,
    },
    /// Straight line between the clamped end values.
    Linear,
    /// Node values loaded from a file.
    File {
        path: String,
    },
}

impl InitialGuess {
    /// Builds the profile on `grid`. File guesses must be resolved by the caller and
    /// passed as `values`.
    pub fn build(
        &self,
        grid: Grid,
        dim: usize,
        values: Option<&[f64]>,
    ) -> Result<DiscreteFunction> {
        match self {
            InitialGuess::Constant { value } => {
                DiscreteFunction::from_fn(grid, dim, |_| vec![*value; dim])
            }
            InitialGuess::Fourier {
                base,
                amplitude,
                mode,
            } => DiscreteFunction::from_fn(grid, dim, |t| {
                vec![base + amplitude * (mode * t).cos(); dim]
            }),
            InitialGuess::Linear => DiscreteFunction::linear_interpolant(grid),
            InitialGuess::File { path } => match values {
                Some(v) => DiscreteFunction::new(grid, dim, v.to_vec()),
                None => Err(BiharmError::InvalidParameter(format!(
                    "initial profile file {path} was not loaded"
                ))),
            },
        }
    }
}

/// Outcome of evaluating the curve-based residual on a spline of a discrete solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualCheck {
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const RESIDUAL_CHECK_POINTS: usize = 20;

/// Independent criticality check: the curve-based residual on a quintic-spline
/// interpolant at 20 interior points must be within `10 h^2` times the size of its
/// leading terms.
pub fn residual_check<L: Lagrangian + ?Sized>(
    lag: &L,
    solution: &DiscreteFunction,
) -> Result<ResidualCheck> {
    let spline = QuinticSpline::interpolate(solution)?;
    let grid = solution.grid();
    let (a, b) = (grid.a(), grid.b());
    let fd_step = default_fd_step(b - a);
    let m = RESIDUAL_CHECK_POINTS;
    let mut worst = 0.0_f64;
    let mut scale = 1.0_f64;
    for i in 0..m {
        let t = a + (b - a) * (i + 1) as f64 / (m + 1) as f64;
        let r = el_residual_along_curve(lag, &spline, t, fd_step)?;
        worst = r.iter().fold(worst, |w, v| w.max(v.abs()));
        let jet = spline.jet4(t);
        let pl = lag.partials(&jet.to_jet2())?;
        for c in 0..lag.dim() {
            let lead = 0.5 * (pl.hess(Slot::Q(c), Slot::Q(c)) * jet.v[c]).abs();
            scale = scale.max(lead + 0.5 * pl.grad(Slot::X(c)).abs());
        }
    }
    let h = grid.h();
    let tolerance = 10.0 * h * h * scale;
    Ok(ResidualCheck {
        max_residual: worst,
        tolerance,
        passed: worst <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub sup_error: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` for consecutive grids.
    pub orders: Vec<f64>,
}

/// Residual an exact solution may have under the curve-based oracle.
const EXACT_RESIDUAL_TOL: f64 = 1e-7;

/// Solves on each grid with boundary data taken from `exact` and measures the
/// sup-norm error against it. Periodic problems start from the sampled exact
/// profile, clamped ones from the linear interpolant.
pub fn convergence_study<L, C>(
    lag: &L,
    exact: &C,
    grids: &[usize],
    cfg: &SolveConfig,
) -> Result<ConvergenceStudy>
where
    L: Lagrangian + ?Sized,
    C: SmoothCurve + ?Sized,
{
    if grids.is_empty() || grids.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BiharmError::InvalidParameter(
            "grid sizes must be non-empty and strictly increasing".into(),
        ));
    }
    if exact.dim() != lag.dim() {
        return Err(BiharmError::Incompatible(format!(
            "exact curve has {} components, geometry expects {}",
            exact.dim(),
            lag.dim()
        )));
    }
    let domain = lag.domain();
    let fd_step = default_fd_step(domain.length());
    for i in 1..=9 {
        let t = domain.a + domain.length() * i as f64 / 10.0;
        let jet = exact.jet4(t);
        let r = el_residual_along_curve(lag, exact, t, fd_step)?;
        for (c, v) in r.iter().enumerate() {
            let size = 1.0 + jet.x[c].abs() + jet.q[c].abs() + jet.v[c].abs();
            if v.abs() > EXACT_RESIDUAL_TOL * size {
                return Err(BiharmError::InvalidParameter(format!(
                    "reference curve is not a solution (residual {v:e} at t = {t})"
                )));
            }
        }
    }

    let bc = if domain.periodic {
        BoundaryConditions::Periodic
    } else {
        let (ja, jb) = (exact.jet4(domain.a), exact.jet4(domain.b));
        BoundaryConditions::Clamped(
            (0..lag.dim())
                .map(|c| ClampedEnds {
                    value_a: ja.x[c],
                    slope_a: ja.p[c],
                    value_b: jb.x[c],
                    slope_b: jb.p[c],
                })
                .collect(),
        )
    };

    let mut rows = Vec::with_capacity(grids.len());
    for &n in grids {
        let grid = Grid::for_domain(lag, n, bc.clone())?;
        let initial = if domain.periodic {
            DiscreteFunction::from_fn(grid.clone(), lag.dim(), |t| exact.jet4(t).x)?
        } else {
            DiscreteFunction::linear_interpolant(grid.clone())?
        };
        let report = solve(lag, &initial, cfg)?;
        if !report.converged {
            return Err(BiharmError::NotConverged {
                iterations: report.iterations,
                grad_norm: report.grad_norm,
            });
        }
        let sup_error = grid
            .nodes()
            .iter()
            .enumerate()
            .flat_map(|(i, &t)| {
                let ex = exact.jet4(t).x;
                let sol = &report.solution;
                (0..ex.len()).map(move |c| (sol.value(i, c) - ex[c]).abs())
            })
            .fold(0.0, f64::max);
        rows.push(ConvergenceRow {
            n,
            h: grid.h(),
            sup_error,
            iterations: report.iterations,
        });
    }
    let orders = rows
        .windows(2)
        .map(|w| (w[0].sup_error / w[1].sup_error).ln() / (w[0].h / w[1].h).ln())
        .collect();
    Ok(ConvergenceStudy { rows, orders })
}
