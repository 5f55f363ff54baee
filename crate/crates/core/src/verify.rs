//! Self-check suite: each family re-runs one group of oracles on seeded random data.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::closed_form::{
    basis_solutions, sampson_analyze, ConstantCoefficientOde, ExpPolySolution, ExpTerm,
};
use crate::error::{BiharmError, Result};
use crate::euler_lagrange::{
    el_residual_along_curve, BoundaryConditions, DiscreteFunction, DiscreteProblem, ExpandedOde,
    FourierCurve, Grid, SmoothCurve,
};
use crate::lagrangian::{
    check_partials_fd, Domain, GeometrySpec, Jet2, Lagrangian, PartialsL, Slot, Uncoupled, WarpFn,
};
use crate::solver::{convergence_study, SolveConfig};

pub const FAMILIES: [&str; 8] = [
    "partials",
    "gradient",
    "hessian",
    "residual",
    "closed_form",
    "solver",
    "sampson",
    "system",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyResult {
    pub family: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Corrupt the analytic partials of every geometry used by the suite.
    pub inject_fault: bool,
}

/// Runs the selected families concurrently; results come back in request order.
pub fn run(families: &[String], opts: VerifyOptions) -> Result<Vec<FamilyResult>> {
    if families.is_empty() {
        return Err(BiharmError::InvalidParameter(
            "no verification family selected".into(),
        ));
    }
    if let Some(bad) = families.iter().find(|f| !FAMILIES.contains(&f.as_str())) {
        return Err(BiharmError::InvalidParameter(format!(
            "unknown verification family `{bad}` (known: {})",
            FAMILIES.join(", ")
        )));
    }
    Ok(std::thread::scope(|scope| {
        let handles: Vec<_> = families
            .iter()
            .map(|f| {
                // per-family stream so results do not depend on the selection
                let seed = opts.seed.wrapping_add(family_salt(f));
                scope.spawn(move || run_family(f, seed, opts.inject_fault))
            })
            .collect();
        handles
            .into_iter()
            .zip(families)
            .map(|(h, f)| {
                let (passed, detail) = match h.join() {
                    Ok(Ok(detail)) => (true, detail),
                    Ok(Err(msg)) => (false, msg),
                    Err(_) => (false, "family panicked".into()),
                };
                FamilyResult {
                    family: f.clone(),
                    passed,
                    detail,
                }
            })
            .collect()
    }))
}

fn family_salt(name: &str) -> u64 {
    (FAMILIES.iter().position(|f| *f == name).unwrap_or(0) as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

type Outcome = std::result::Result<String, String>;

fn run_family(name: &str, seed: u64, fault: bool) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "partials" => partials(&mut rng, fault),
        "gradient" => gradient(&mut rng, fault),
        "hessian" => hessian(&mut rng, fault),
        "residual" => residual(&mut rng, fault),
        "closed_form" => closed_form(&mut rng),
        "solver" => solver(),
        "sampson" => sampson(),
        "system" => system(&mut rng),
        _ => Err(format!("unknown family {name}")),
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Wrapper that perturbs `L_p`, for exercising the failure path of the suite.
pub struct Faulty<L>(pub L);

impl<L: Lagrangian> Lagrangian for Faulty<L> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn domain(&self) -> Domain {
        self.0.domain()
    }

    fn value_unchecked(&self, jet: &Jet2) -> Result<f64> {
        self.0.value_unchecked(jet)
    }

    fn partials_unchecked(&self, jet: &Jet2) -> Result<PartialsL> {
        let mut p = self.0.partials_unchecked(jet)?;
        for c in 0..self.dim() {
            let g = p.grad(Slot::P(c));
            p.set_grad(Slot::P(c), g + 1e-3 * (1.0 + g.abs()));
        }
        Ok(p)
    }
}

fn catalog() -> Result<Vec<(&'static str, GeometrySpec)>> {
    Ok(vec![
        ("torus k=1", GeometrySpec::torus_to_sphere(1)?),
        ("torus k=2", GeometrySpec::torus_to_sphere(2)?),
        ("cylinder", GeometrySpec::cylinder(1.0, 0.0, 1.0)?),
        ("euclidean", GeometrySpec::euclidean_log(3, 8.0, 0.0, 1.0)?),
        (
            "euclidean m=4",
            GeometrySpec::euclidean_log(4, 12.0, 0.0, 1.0)?,
        ),
        (
            "warped",
            GeometrySpec::warped_product(2, 2.0, WarpFn::Sine, WarpFn::Sinh, 0.5, 2.5)?,
        ),
    ])
}

fn boxed(g: GeometrySpec, fault: bool) -> Box<dyn Lagrangian> {
    if fault {
        Box::new(Faulty(g))
    } else {
        Box::new(g)
    }
}

fn random_jet(rng: &mut ChaCha8Rng, domain: Domain) -> Jet2 {
    Jet2::scalar(
        rng.gen_range(domain.a..domain.b),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    )
}

fn partials(rng: &mut ChaCha8Rng, fault: bool) -> Outcome {
    let mut worst = 0.0_f64;
    for (name, g) in catalog().map_err(fail)? {
        let lag = boxed(g, fault);
        for _ in 0..20 {
            let jet = random_jet(rng, lag.domain());
            let report = check_partials_fd(lag.as_ref(), &jet, 1e-3);
            let p = lag.partials(&jet).map_err(fail)?;
            let scale = Slot::all(1)
                .iter()
                .flat_map(|&a| Slot::all(1).into_iter().map(move |b| (a, b)))
                .fold(1.0_f64, |m, (a, b)| {
                    m.max(p.hess(a, b).abs()).max(p.grad(a).abs())
                });
            let rel = report.max_discrepancy() / scale;
            if !(rel <= 1e-7) {
                return Err(format!(
                    "{name}: partials disagree with differences ({rel:e} at {:?})",
                    report.worst
                ));
            }
            worst = worst.max(rel);
        }
    }
    Ok(format!("max relative discrepancy {worst:.2e}"))
}

fn problems(fault: bool) -> Result<Vec<(&'static str, Box<dyn Lagrangian>, Grid)>> {
    Ok(vec![
        (
            "torus",
            boxed(GeometrySpec::torus_to_sphere(1)?, fault),
            Grid::new(0.0, 2.0 * PI, 32, BoundaryConditions::Periodic)?,
        ),
        (
            "cylinder",
            boxed(GeometrySpec::cylinder(4.0, 0.0, 1.0)?, fault),
            Grid::new(
                0.0,
                1.0,
                32,
                BoundaryConditions::clamped(1.0, 2.0, 2.0, -1.0),
            )?,
        ),
        (
            "warped",
            boxed(
                GeometrySpec::warped_product(2, 2.0, WarpFn::Sine, WarpFn::Sinh, 0.5, 2.5)?,
                fault,
            ),
            Grid::new(
                0.5,
                2.5,
                32,
                BoundaryConditions::clamped(0.2, 0.0, 0.4, 0.1),
            )?,
        ),
    ])
}

fn random_profile(rng: &mut ChaCha8Rng, grid: &Grid) -> Result<DiscreteFunction> {
    let values = (0..grid.n()).map(|_| rng.gen_range(-0.5..0.5)).collect();
    DiscreteFunction::new(grid.clone(), 1, values)
}

fn random_direction(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn shifted(df: &DiscreteFunction, dir: &[f64], s: f64) -> Result<DiscreteFunction> {
    let free: Vec<f64> = df
        .free_values()
        .iter()
        .zip(dir)
        .map(|(a, d)| a + s * d)
        .collect();
    df.with_free_values(&free)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Directional derivative of the energy by Richardson-extrapolated central
/// differences.
pub fn energy_directional_fd<L: Lagrangian + ?Sized>(
    problem: &DiscreteProblem<'_, L>,
    df: &DiscreteFunction,
    dir: &[f64],
    eps: f64,
) -> Result<f64> {
    let d = |s: f64| -> Result<f64> {
        Ok(
            (problem.energy(&shifted(df, dir, s)?)? - problem.energy(&shifted(df, dir, -s)?)?)
                / (2.0 * s),
        )
    };
    Ok((4.0 * d(0.5 * eps)? - d(eps)?) / 3.0)
}

/// Second directional derivative of the energy by Richardson-extrapolated second
/// differences.
pub fn energy_second_fd<L: Lagrangian + ?Sized>(
    problem: &DiscreteProblem<'_, L>,
    df: &DiscreteFunction,
    dir: &[f64],
    eps: f64,
) -> Result<f64> {
    let e0 = problem.energy(df)?;
    let d2 = |s: f64| -> Result<f64> {
        Ok((problem.energy(&shifted(df, dir, s)?)? - 2.0 * e0
            + problem.energy(&shifted(df, dir, -s)?)?)
            / (s * s))
    };
    Ok((4.0 * d2(0.5 * eps)? - d2(eps)?) / 3.0)
}

fn gradient(rng: &mut ChaCha8Rng, fault: bool) -> Outcome {
    let mut worst = 0.0_f64;
    for (name, lag, grid) in problems(fault).map_err(fail)? {
        let problem = DiscreteProblem::new(lag.as_ref(), grid.clone()).map_err(fail)?;
        for _ in 0..34 {
            let df = random_profile(rng, &grid).map_err(fail)?;
            let dir = random_direction(rng, problem.unknowns());
            let g = problem.gradient(&df).map_err(fail)?;
            let fd = energy_directional_fd(&problem, &df, &dir, 1e-4).map_err(fail)?;
            let analytic = dot(&g, &dir);
            let rel = (fd - analytic).abs() / analytic.abs().max(1.0);
            if !(rel <= 1e-6) {
                return Err(format!("{name}: gradient {analytic} vs differences {fd}"));
            }
            worst = worst.max(rel);
        }
    }
    Ok(format!("max relative discrepancy {worst:.2e}"))
}

fn hessian(rng: &mut ChaCha8Rng, fault: bool) -> Outcome {
    let mut worst = 0.0_f64;
    for (name, lag, grid) in problems(fault).map_err(fail)? {
        let problem = DiscreteProblem::new(lag.as_ref(), grid.clone()).map_err(fail)?;
        for _ in 0..10 {
            let df = random_profile(rng, &grid).map_err(fail)?;
            let dir = random_direction(rng, problem.unknowns());
            let h = problem.hessian(&df).map_err(fail)?;
            if !h.is_symmetric() {
                return Err(format!("{name}: Hessian is not symmetric"));
            }
            let analytic = h.quad_form(&dir);
            let fd = energy_second_fd(&problem, &df, &dir, 1e-3).map_err(fail)?;
            let rel = (fd - analytic).abs() / analytic.abs().max(1.0);
            if !(rel <= 1e-5) {
                return Err(format!(
                    "{name}: quadratic form {analytic} vs differences {fd}"
                ));
            }
            worst = worst.max(rel);
        }
    }
    Ok(format!("max relative discrepancy {worst:.2e}"))
}

/// Step for differencing along exponential curves: large enough that rounding in
/// `L_q` (which reaches 1e3 on the unit interval) stays below 1e-7.
pub const EXP_FD_STEP: f64 = 5e-3;

/// Four-term exponential curve with rates and coefficients in moderate ranges.
pub fn random_exp_curve(rng: &mut ChaCha8Rng) -> ExpPolySolution {
    let terms = (0..4)
        .map(|_| ExpTerm {
            coef: rng.gen_range(-1.0..1.0),
            power: rng.gen_range(0..2),
            rate: rng.gen_range(-2.0..2.0),
        })
        .collect();
    ExpPolySolution::new(terms).expect("finite terms")
}

fn residual(rng: &mut ChaCha8Rng, fault: bool) -> Outcome {
    let torus = boxed(GeometrySpec::torus_to_sphere(1).map_err(fail)?, fault);
    let curve = FourierCurve {
        base: FRAC_PI_4,
        a_cos: 0.0,
        a_sin: 0.1,
        mode: 1.0,
    };
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let t = 2.0 * PI * i as f64 / 50.0;
        let generic =
            el_residual_along_curve(torus.as_ref(), &curve, t, 2e-3 * PI).map_err(fail)?[0];
        let direct = ExpandedOde::Torus { k: 1 }
            .residual(&curve.jet4(t))
            .map_err(fail)?;
        worst = worst.max((generic - direct).abs());
    }
    let cases = [
        (
            boxed(
                GeometrySpec::euclidean_log(3, 8.0, 0.0, 1.0).map_err(fail)?,
                fault,
            ),
            ExpandedOde::EuclideanM3L8,
        ),
        (
            boxed(GeometrySpec::cylinder(1.0, 0.0, 1.0).map_err(fail)?, fault),
            ExpandedOde::Cylinder { lambda: 1.0 },
        ),
    ];
    for (lag, ode) in cases {
        let curve = random_exp_curve(rng);
        for _ in 0..50 {
            let t = rng.gen_range(0.01..0.99);
            let generic =
                el_residual_along_curve(lag.as_ref(), &curve, t, EXP_FD_STEP).map_err(fail)?[0];
            let direct = ode.residual(&curve.jet4(t)).map_err(fail)?;
            worst = worst.max((generic - direct).abs());
        }
    }
    if worst <= 1e-6 {
        Ok(format!("max discrepancy {worst:.2e}"))
    } else {
        Err(format!(
            "generic residual departs from the expanded equations by {worst:e}"
        ))
    }
}

fn closed_form(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst_exact = 0.0_f64;
    let mut worst_fd = 0.0_f64;
    let odes = [
        (
            ConstantCoefficientOde::EuclideanM3L8,
            GeometrySpec::euclidean_log(3, 8.0, 0.0, 1.0).map_err(fail)?,
        ),
        (
            ConstantCoefficientOde::Cylinder { lambda: 1.0 },
            GeometrySpec::cylinder(1.0, 0.0, 1.0).map_err(fail)?,
        ),
    ];
    for (ode, geom) in odes {
        let basis = basis_solutions(ode).map_err(fail)?;
        let mut curves = basis.clone();
        for _ in 0..20 {
            let w: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let parts: Vec<(f64, &ExpPolySolution)> = w.iter().copied().zip(basis.iter()).collect();
            curves.push(ExpPolySolution::combine(&parts).map_err(fail)?);
        }
        for c in &curves {
            for _ in 0..10 {
                let t = rng.gen_range(0.01..0.99);
                worst_exact =
                    worst_exact.max(ode.expanded().residual(&c.jet4(t)).map_err(fail)?.abs());
                worst_fd = worst_fd
                    .max(el_residual_along_curve(&geom, c, t, EXP_FD_STEP).map_err(fail)?[0].abs());
            }
        }
    }
    if worst_exact <= 1e-10 && worst_fd <= 1e-6 {
        Ok(format!(
            "exact {worst_exact:.2e}, differenced {worst_fd:.2e}"
        ))
    } else {
        Err(format!(
            "closed-form residuals too large: exact {worst_exact:e}, differenced {worst_fd:e}"
        ))
    }
}

fn solver() -> Outcome {
    let geom = GeometrySpec::cylinder(4.0, 0.0, 1.0).map_err(fail)?;
    let exact =
        &basis_solutions(ConstantCoefficientOde::Cylinder { lambda: 4.0 }).map_err(fail)?[0];
    let study =
        convergence_study(&geom, exact, &[50, 100, 200], &SolveConfig::default()).map_err(fail)?;
    let ok = study.orders.iter().all(|o| (1.8..=2.2).contains(o))
        && study.rows.last().map_or(false, |r| r.sup_error <= 1e-3);
    let detail = format!("orders {:?}", study.orders);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sampson() -> Outcome {
    let a = sampson_analyze(1.0).map_err(fail)?;
    let b = sampson_analyze(4.0).map_err(fail)?;
    let ok = a.violates_principle
        && (-0.35..=-0.33).contains(&a.r0)
        && (0.82..=0.84).contains(&a.alpha_min)
        && (a.alpha_min - b.alpha_min).abs() <= 1e-9
        && (a.r0 - 2.0 * b.r0).abs() <= 1e-9;
    let detail = format!("r0 {:.6}, alpha_min {:.6}", a.r0, a.alpha_min);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn system(rng: &mut ChaCha8Rng) -> Outcome {
    let parts = vec![
        GeometrySpec::cylinder(1.0, 0.0, 1.0).map_err(fail)?,
        GeometrySpec::cylinder(4.0, 0.0, 1.0).map_err(fail)?,
    ];
    let sys = Uncoupled::new(parts.clone()).map_err(fail)?;
    let n = 24;
    let bcs = [
        BoundaryConditions::clamped(0.1, 0.2, 0.3, 0.4),
        BoundaryConditions::clamped(-0.5, 1.0, 0.5, -1.0),
    ];
    let ends = bcs
        .iter()
        .flat_map(|b| match b {
            BoundaryConditions::Clamped(e) => e.clone(),
            BoundaryConditions::Periodic => vec![],
        })
        .collect();
    let sys_grid = Grid::new(0.0, 1.0, n, BoundaryConditions::Clamped(ends)).map_err(fail)?;
    let singles: Vec<DiscreteFunction> = bcs
        .iter()
        .map(|b| {
            let g = Grid::new(0.0, 1.0, n, b.clone())?;
            random_profile(rng, &g)
        })
        .collect::<Result<_>>()
        .map_err(fail)?;
    let values = (0..n)
        .flat_map(|i| singles.iter().map(move |s| s.value(i, 0)))
        .collect();
    let joint = DiscreteFunction::new(sys_grid.clone(), 2, values).map_err(fail)?;
    let g_sys = DiscreteProblem::new(&sys, sys_grid)
        .map_err(fail)?
        .gradient(&joint)
        .map_err(fail)?;
    let g_parts: Vec<Vec<f64>> = parts
        .iter()
        .zip(&singles)
        .map(|(p, s)| DiscreteProblem::new(p, s.grid().clone())?.gradient(s))
        .collect::<Result<_>>()
        .map_err(fail)?;
    let free = g_parts[0].len();
    let interleaved: Vec<f64> = (0..free)
        .flat_map(|i| [g_parts[0][i], g_parts[1][i]])
        .collect();
    if interleaved == g_sys {
        Ok("system gradient equals the stacked block gradients".into())
    } else {
        Err("system gradient differs from the stacked block gradients".into())
    }
}
