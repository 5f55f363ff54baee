mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use biharm::closed_form::{sampson_analyze, ExpPolySolution, ExpTerm};
use biharm::euler_lagrange::{
    el_residual_along_curve, BoundaryConditions, DiscreteFunction, DiscreteProblem, FourierCurve,
    Grid, SmoothCurve,
};
use biharm::lagrangian::{GeometrySpec, Jet2, Lagrangian, Slot, Uncoupled, WarpFn};
use biharm::solver::{residual_check, solve, SolveConfig};
use biharm::stability::{analyze_stability, restricted_spectrum, Classification};
use common::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

fn geometries() -> Vec<(&'static str, GeometrySpec)> {
    vec![
        ("torus k=1", GeometrySpec::torus_to_sphere(1).unwrap()),
        ("torus k=2", GeometrySpec::torus_to_sphere(2).unwrap()),
        (
            "euclidean log",
            GeometrySpec::euclidean_log(3, 8.0, -1.0, 1.0).unwrap(),
        ),
        ("cylinder", GeometrySpec::cylinder(4.0, 0.0, 1.0).unwrap()),
        (
            "warped sine",
            GeometrySpec::warped_product(2, 2.0, WarpFn::Sine, WarpFn::Constant(1.0), 0.5, 2.5)
                .unwrap(),
        ),
        (
            "warped sinh",
            GeometrySpec::warped_product(3, 3.0, WarpFn::Sinh, WarpFn::Identity, 0.5, 2.0).unwrap(),
        ),
    ]
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[7; 32]))
}

/// Jets inside the domain, away from the ends.
fn jet_strategy(g: &GeometrySpec) -> impl Strategy<Value = Jet2> {
    let d = g.domain();
    let margin = 0.05 * d.length();
    (
        d.a + margin..d.b - margin,
        -1.5..1.5f64,
        -2.0..2.0f64,
        -3.0..3.0f64,
    )
        .prop_map(|(t, x, p, q)| Jet2::scalar(t, x, p, q))
}

fn grid_for(g: &GeometrySpec, n: usize) -> Grid {
    let bc = if g.domain().periodic {
        BoundaryConditions::Periodic
    } else {
        BoundaryConditions::clamped(0.2, -0.3, 0.4, 0.1)
    };
    Grid::for_domain(g, n, bc).unwrap()
}

/// Smooth random profile: a few low modes on top of a base value.
fn profile_strategy(grid: Grid) -> impl Strategy<Value = DiscreteFunction> {
    (-0.5..0.5f64, prop::collection::vec(-0.3..0.3f64, 6)).prop_map(move |(base, c)| {
        let (a, b) = (grid.a(), grid.b());
        let w = 2.0 * PI / (b - a);
        DiscreteFunction::from_scalar_fn(grid.clone(), |t| {
            let s = t - a;
            base + FRAC_PI_4
                + c[0] * (w * s).cos()
                + c[1] * (w * s).sin()
                + c[2] * (2.0 * w * s).cos()
                + c[3] * (2.0 * w * s).sin()
                + c[4] * (3.0 * w * s).cos()
                + c[5] * (3.0 * w * s).sin()
        })
        .unwrap()
    })
}

fn direction_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, len)
}

#[test]
fn lagrangian_is_weighted_squared_tension() {
    for (name, g) in geometries() {
        runner(300)
            .run(&jet_strategy(&g), |jet| {
                let l = g.value(&jet).unwrap();
                let t = g.tension(&jet).unwrap();
                let w = g.volume_factor(jet.t).unwrap();
                prop_assert!(l >= 0.0);
                prop_assert!(
                    (l - t * t * w).abs() <= 1e-12 * l.abs().max(1e-300),
                    "{name}: {l} vs {}",
                    t * t * w
                );
                Ok(())
            })
            .unwrap();
    }
}

#[test]
fn analytic_partials_match_richardson_differences() {
    for (name, g) in geometries() {
        runner(300)
            .run(&jet_strategy(&g), |jet| {
                let pl = g.partials(&jet).unwrap();
                let slots = [Slot::T, Slot::X(0), Slot::P(0), Slot::Q(0)];
                let h = 1e-3;
                for (a, &sa) in slots.iter().enumerate() {
                    let fd = richardson_d1(&|s| g.value(&perturb(&jet, a, s)).unwrap(), 0.0, h);
                    let scale = 1.0 + pl.grad(sa).abs() + pl.value.abs();
                    prop_assert!(
                        (fd - pl.grad(sa)).abs() <= 1e-7 * scale,
                        "{name} L_{sa:?}: {fd} vs {}",
                        pl.grad(sa)
                    );
                    for &sb in &slots {
                        let fd = richardson_d1(
                            &|s| g.partials(&perturb(&jet, a, s)).unwrap().grad(sb),
                            0.0,
                            h,
                        );
                        let exact = pl.hess(sa, sb);
                        let scale = 1.0 + exact.abs() + pl.grad(sb).abs();
                        prop_assert!(
                            (fd - exact).abs() <= 1e-7 * scale,
                            "{name} L_{sa:?}{sb:?}: {fd} vs {exact}"
                        );
                    }
                }
                prop_assert!(pl.is_symmetric());
                Ok(())
            })
            .unwrap();
    }
}

#[test]
fn torus_tension_has_period_pi_in_x() {
    for k in 1..=3 {
        let g = GeometrySpec::torus_to_sphere(k).unwrap();
        runner(200)
            .run(&jet_strategy(&g), |jet| {
                let shifted = Jet2::scalar(jet.t, jet.x[0] + PI, jet.p[0], jet.q[0]);
                let (a, b) = (g.tension(&jet).unwrap(), g.tension(&shifted).unwrap());
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
                Ok(())
            })
            .unwrap();
    }
}

#[test]
fn gradient_matches_directional_differences() {
    for (name, g) in geometries() {
        let grid = grid_for(&g, 24);
        let problem = DiscreteProblem::new(&g, grid.clone()).unwrap();
        let len = problem.unknowns();
        runner(100)
            .run(
                &(profile_strategy(grid), direction_strategy(len)),
                |(df, dir)| {
                    let grad = problem.gradient(&df).unwrap();
                    let eps = 1e-6;
                    let fd = (problem.energy(&shift(&df, &dir, eps)).unwrap()
                        - problem.energy(&shift(&df, &dir, -eps)).unwrap())
                        / (2.0 * eps);
                    let exact = dot(&grad, &dir);
                    let scale = norm(&grad) * norm(&dir);
                    prop_assert!(
                        (fd - exact).abs() <= 1e-6 * scale,
                        "{name}: {fd} vs {exact}"
                    );
                    Ok(())
                },
            )
            .unwrap();
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[test]
fn hessian_matches_second_differences() {
    for (name, g) in geometries() {
        let grid = grid_for(&g, 24);
        let problem = DiscreteProblem::new(&g, grid.clone()).unwrap();
        let len = problem.unknowns();
        runner(100)
            .run(
                &(profile_strategy(grid), direction_strategy(len)),
                |(df, dir)| {
                    let hess = problem.hessian(&df).unwrap();
                    prop_assert!(hess.is_symmetric());
                    let exact = problem.second_variation(&df, &dir).unwrap();
                    prop_assert!(
                        (hess.quad_form(&dir) - exact).abs()
                            <= 1e-8 * (1.0 + hess.max_abs_row_sum() * dot(&dir, &dir))
                    );
                    let e0 = problem.energy(&df).unwrap();
                    let second = |eps: f64| {
                        (problem.energy(&shift(&df, &dir, eps)).unwrap() - 2.0 * e0
                            + problem.energy(&shift(&df, &dir, -eps)).unwrap())
                            / (eps * eps)
                    };
                    let fd = (4.0 * second(5e-4) - second(1e-3)) / 3.0;
                    prop_assert!(
                        (fd - exact).abs() <= 1e-5 * exact.abs().max(1e-3 * e0),
                        "{name}: {fd} vs {exact}"
                    );
                    Ok(())
                },
            )
            .unwrap();
    }
}

#[test]
fn cylinder_hessian_does_not_depend_on_the_profile() {
    let g = GeometrySpec::cylinder(2.0, 0.0, 1.0).unwrap();
    let grid = grid_for(&g, 20);
    let problem = DiscreteProblem::new(&g, grid.clone()).unwrap();
    let reference = problem
        .hessian(&DiscreteFunction::linear_interpolant(grid.clone()).unwrap())
        .unwrap();
    runner(50)
        .run(&profile_strategy(grid), |df| {
            prop_assert_eq!(
                problem.hessian(&df).unwrap().to_dense(),
                reference.to_dense()
            );
            Ok(())
        })
        .unwrap();
}

#[test]
fn decoupled_system_gradient_is_the_concatenation() {
    let g1 = GeometrySpec::cylinder(1.0, 0.0, 1.0).unwrap();
    let g2 = GeometrySpec::cylinder(4.0, 0.0, 1.0).unwrap();
    let system = Uncoupled::new(vec![g1.clone(), g2.clone()]).unwrap();
    let n = 16;
    let ends = BoundaryConditions::Clamped(vec![
        biharm::euler_lagrange::ClampedEnds {
            value_a: 0.1,
            slope_a: 0.0,
            value_b: 0.5,
            slope_b: 1.0,
        },
        biharm::euler_lagrange::ClampedEnds {
            value_a: -0.2,
            slope_a: 0.3,
            value_b: 0.0,
            slope_b: 0.0,
        },
    ]);
    let sys_grid = Grid::new(0.0, 1.0, n, ends).unwrap();
    let grid1 = Grid::new(0.0, 1.0, n, BoundaryConditions::clamped(0.1, 0.0, 0.5, 1.0)).unwrap();
    let grid2 = Grid::new(
        0.0,
        1.0,
        n,
        BoundaryConditions::clamped(-0.2, 0.3, 0.0, 0.0),
    )
    .unwrap();
    let strat = (
        prop::collection::vec(-1.0..1.0f64, n),
        prop::collection::vec(-1.0..1.0f64, n),
    );
    runner(100)
        .run(&strat, |(u, v)| {
            let interleaved: Vec<f64> = u.iter().zip(&v).flat_map(|(a, b)| [*a, *b]).collect();
            let sys = DiscreteFunction::new(sys_grid.clone(), 2, interleaved).unwrap();
            let d1 = DiscreteFunction::new(grid1.clone(), 1, u).unwrap();
            let d2 = DiscreteFunction::new(grid2.clone(), 1, v).unwrap();
            let gs = DiscreteProblem::new(&system, sys_grid.clone())
                .unwrap()
                .gradient(&sys)
                .unwrap();
            let a = DiscreteProblem::new(&g1, grid1.clone())
                .unwrap()
                .gradient(&d1)
                .unwrap();
            let b = DiscreteProblem::new(&g2, grid2.clone())
                .unwrap()
                .gradient(&d2)
                .unwrap();
            let concat: Vec<f64> = a.iter().zip(&b).flat_map(|(x, y)| [*x, *y]).collect();
            prop_assert_eq!(gs, concat);
            Ok(())
        })
        .unwrap();
}

#[test]
fn torus_energy_symmetries() {
    let g = GeometrySpec::torus_to_sphere(1).unwrap();
    let grid = grid_for(&g, 32);
    let problem = DiscreteProblem::new(&g, grid.clone()).unwrap();
    runner(100)
        .run(&(profile_strategy(grid.clone()), 1..32usize), |(df, s)| {
            let e = problem.energy(&df).unwrap();
            let vals = df.values();
            let rotated: Vec<f64> = (0..32).map(|i| vals[(i + s) % 32]).collect();
            let mirrored: Vec<f64> = vals.iter().map(|v| PI - v).collect();
            let er = problem
                .energy(&DiscreteFunction::new(grid.clone(), 1, rotated).unwrap())
                .unwrap();
            let em = problem
                .energy(&DiscreteFunction::new(grid.clone(), 1, mirrored).unwrap())
                .unwrap();
            prop_assert!((er - e).abs() <= 1e-12 * (1.0 + e));
            prop_assert!((em - e).abs() <= 1e-12 * (1.0 + e));
            prop_assert!(e >= 0.0);
            Ok(())
        })
        .unwrap();
}

#[test]
fn harmonic_constants_have_zero_energy() {
    for k in 1..=3 {
        let g = GeometrySpec::torus_to_sphere(k).unwrap();
        let grid = grid_for(&g, 32);
        let problem = DiscreteProblem::new(&g, grid.clone()).unwrap();
        for l in 0..=2 {
            let df = DiscreteFunction::constant(grid.clone(), l as f64 * FRAC_PI_2).unwrap();
            assert!(problem.energy(&df).unwrap().abs() <= 1e-12);
            assert!(norm(&problem.gradient(&df).unwrap()) <= 1e-12);
        }
    }
}

#[test]
fn scaled_gradient_approaches_twice_the_residual() {
    // grad_i / w_i is a second-order approximation of 2 * (halved) EL residual
    let g = GeometrySpec::torus_to_sphere(1).unwrap();
    let curve = FourierCurve {
        base: FRAC_PI_4,
        a_cos: 0.2,
        a_sin: -0.1,
        mode: 2.0,
    };
    let err = |n: usize| {
        let grid = grid_for(&g, n);
        let df = DiscreteFunction::from_scalar_fn(grid.clone(), |t| curve.jet4(t).x[0]).unwrap();
        let grad = DiscreteProblem::new(&g, grid.clone())
            .unwrap()
            .gradient(&df)
            .unwrap();
        (0..n)
            .map(|i| {
                let t = grid.node(i);
                let r = el_residual_along_curve(&g, &curve, t, 2e-3 * PI).unwrap()[0];
                (grad[i] / grid.weight(i) - 2.0 * r).abs()
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(64), err(128));
    let order = (e1 / e2).log2();
    assert!(order >= 1.8, "order {order} ({e1}, {e2})");
}

#[test]
fn exp_poly_derivatives_match_finite_differences() {
    let term = (-1.0..1.0f64, 0..2u32, -3.0..3.0f64).prop_map(|(coef, power, rate)| ExpTerm {
        coef,
        power,
        rate,
    });
    let strat = (prop::collection::vec(term, 1..5), -1.0..1.0f64);
    runner(200)
        .run(&strat, |(terms, t)| {
            let sol = ExpPolySolution::new(terms.clone()).unwrap();
            let h = 1e-3;
            for order in 0..4 {
                let f = |s: f64| sol.eval_derivative(order, s);
                let fd = (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h))
                    / (12.0 * h);
                let exact = sol.eval_derivative(order + 1, t);
                prop_assert!(
                    (fd - exact).abs() <= 1e-8 * (1.0 + exact.abs()),
                    "order {order}: {fd} vs {exact}"
                );
            }
            // against the hand-written Leibniz jets
            let mut jet = [0.0; 5];
            for term in &terms {
                let m = exp_monomial_jet(term.power, term.rate, t);
                for (j, v) in jet.iter_mut().zip(m) {
                    *j += term.coef * v;
                }
            }
            for (k, v) in jet.iter().enumerate() {
                prop_assert!((sol.eval_derivative(k, t) - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn sampson_minimum_is_invariant_under_lambda() {
    let base = sampson_analyze(1.0).unwrap();
    runner(30)
        .run(&(0.05..50.0f64), |lambda| {
            let r = sampson_analyze(lambda).unwrap();
            prop_assert!((r.alpha_min - base.alpha_min).abs() <= 1e-9);
            prop_assert!((r.r0 * lambda.sqrt() - base.r0).abs() <= 1e-9);
            prop_assert!(r.alpha_min > 0.0 && r.violates_principle);
            let p = biharm::closed_form::sampson_profile(lambda).unwrap();
            for d in [1e-3, 1e-2, 1e-1] {
                prop_assert!(p.eval(r.r0 - d / lambda.sqrt()) >= r.alpha_min);
                prop_assert!(p.eval(r.r0 + d / lambda.sqrt()) >= r.alpha_min);
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn almansi_profiles_in_radial_coordinates() {
    // r^2 and r^4 on the flat ball: tension 0 and 16 r^2
    let g =
        GeometrySpec::warped_product(3, 8.0, WarpFn::Identity, WarpFn::Identity, 0.2, 3.0).unwrap();
    for r in [0.3, 1.0, 2.5] {
        let t2 = g.tension(&Jet2::scalar(r, r * r, 2.0 * r, 2.0)).unwrap();
        let t4 = g
            .tension(&Jet2::scalar(r, r.powi(4), 4.0 * r.powi(3), 12.0 * r * r))
            .unwrap();
        assert!(t2.abs() <= 1e-12);
        assert!((t4 - 16.0 * r * r).abs() <= 1e-12 * 16.0 * r * r);
    }
}

fn torus_solver_strategy() -> impl Strategy<Value = (f64, f64, u32)> {
    (0.55..1.0f64, -0.08..0.08f64, 1..4u32)
}

fn torus_start(base: f64, amp: f64, mode: u32) -> DiscreteFunction {
    let g = GeometrySpec::torus_to_sphere(1).unwrap();
    let grid = grid_for(&g, 48);
    DiscreteFunction::from_scalar_fn(grid, |t| base + amp * (mode as f64 * t).cos()).unwrap()
}

#[test]
fn solver_is_deterministic_and_monotone() {
    let g = GeometrySpec::torus_to_sphere(1).unwrap();
    let cfg = SolveConfig::default();
    runner(12)
        .run(&torus_solver_strategy(), |(base, amp, mode)| {
            let start = torus_start(base, amp, mode);
            let a = solve(&g, &start, &cfg).unwrap();
            let b = solve(&g, &start, &cfg).unwrap();
            prop_assert_eq!(a.solution.values(), b.solution.values());
            prop_assert_eq!(&a.grad_history, &b.grad_history);
            prop_assert!(a.grad_history.windows(2).all(|w| w[1] <= w[0]));
            if a.converged {
                prop_assert!(residual_check(&g, &a.solution).unwrap().passed);
                let report = analyze_stability(&g, &a.solution, None).unwrap();
                let lowest = restricted_spectrum(&g, &a.solution).unwrap()[0];
                prop_assert_eq!(
                    report.classification,
                    Classification::from_spectrum(lowest, report.pos_tol)
                );
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn clamped_data_survive_the_solve_bit_for_bit() {
    let g = GeometrySpec::cylinder(4.0, 0.0, 1.0).unwrap();
    let strat = (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64);
    runner(20)
        .run(&strat, |(va, sa, vb, sb)| {
            let grid =
                Grid::new(0.0, 1.0, 30, BoundaryConditions::clamped(va, sa, vb, sb)).unwrap();
            let start = DiscreteFunction::linear_interpolant(grid).unwrap();
            let report = solve(&g, &start, &SolveConfig::default()).unwrap();
            prop_assert!(report.converged);
            let vals = report.solution.values();
            prop_assert_eq!(vals[0].to_bits(), va.to_bits());
            prop_assert_eq!(vals[29].to_bits(), vb.to_bits());
            Ok(())
        })
        .unwrap();
}

#[test]
fn newton_agrees_with_gradient_descent_on_a_convex_problem() {
    let g = GeometrySpec::cylinder(1.0, 0.0, 1.0).unwrap();
    let grid = Grid::new(
        0.0,
        1.0,
        12,
        BoundaryConditions::clamped(0.0, 1.0, 1.0, 0.0),
    )
    .unwrap();
    let start = DiscreteFunction::linear_interpolant(grid).unwrap();
    let newton = solve(&g, &start, &SolveConfig::default()).unwrap();
    let descent = gradient_descent(&g, &start, 200_000, 1e-9);
    assert!(
        descent.grad_norm <= 1e-9,
        "descent stalled at {}",
        descent.grad_norm
    );
    assert!(max_abs_diff(newton.solution.values(), descent.solution.values()) <= 1e-7);
}

#[test]
fn mirrored_torus_solutions_share_their_spectrum() {
    let g = GeometrySpec::torus_to_sphere(1).unwrap();
    let grid = grid_for(&g, 64);
    let a = restricted_spectrum(
        &g,
        &DiscreteFunction::constant(grid.clone(), FRAC_PI_4).unwrap(),
    )
    .unwrap();
    let b = restricted_spectrum(
        &g,
        &DiscreteFunction::constant(grid, 3.0 * FRAC_PI_4).unwrap(),
    )
    .unwrap();
    assert!(max_abs_diff(&a, &b) <= 1e-10);
}

#[test]
fn residual_pathway_tracks_the_expanded_ode() {
    let g = GeometrySpec::torus_to_sphere(1).unwrap();
    let strat = (
        0.3..1.2f64,
        -0.2..0.2f64,
        -0.2..0.2f64,
        1..4u32,
        0.0..2.0 * PI,
    );
    runner(100)
        .run(&strat, |(base, a_cos, a_sin, mode, t)| {
            let curve = FourierCurve {
                base,
                a_cos,
                a_sin,
                mode: mode as f64,
            };
            let r = el_residual_along_curve(&g, &curve, t, 2e-3 * PI).unwrap()[0];
            let ode = torus_ode(1.0, &curve.jet4(t));
            prop_assert!((r - ode).abs() <= 1e-6, "{r} vs {ode}");
            Ok(())
        })
        .unwrap();
}
