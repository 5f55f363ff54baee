//! Oracles shared by the integration suites. Everything here is written from the
//! formulas directly and does not call the library's own checkers.

#![allow(dead_code)]

use biharm::euler_lagrange::{norm, DiscreteFunction, DiscreteProblem};
use biharm::lagrangian::{Jet2, Jet4, Lagrangian};

/// Expanded torus equation, transcribed term by term.
pub fn torus_ode(k: f64, j: &Jet4) -> f64 {
    let (x, p, q, v) = (j.x[0], j.p[0], j.q[0], j.v[0]);
    v - 2.0 * k * k * (2.0 * x).cos() * q
        + 2.0 * k * k * (2.0 * x).sin() * p * p
        + 0.5 * k.powi(4) * (2.0 * x).sin() * (2.0 * x).cos()
}

pub fn euclidean_ode(j: &Jet4) -> f64 {
    j.v[0] - 20.0 * j.q[0] + 64.0 * j.x[0]
}

pub fn cylinder_ode(lambda: f64, j: &Jet4) -> f64 {
    j.v[0] - 2.0 * lambda * j.q[0] + lambda * lambda * j.x[0]
}

/// Jet of `t^power e^{rate t}`: `d^k e^{rt} = r^k e^{rt}`,
/// `d^k (t e^{rt}) = (r^k t + k r^{k-1}) e^{rt}`.
pub fn exp_monomial_jet(power: u32, rate: f64, t: f64) -> [f64; 5] {
    assert!(power <= 1, "only powers 0 and 1 occur");
    let e = (rate * t).exp();
    let mut out = [0.0; 5];
    for (k, o) in out.iter_mut().enumerate() {
        let lead = rate.powi(k as i32);
        *o = if power == 0 {
            lead * e
        } else {
            let lower = if k == 0 {
                0.0
            } else {
                k as f64 * rate.powi(k as i32 - 1)
            };
            (lead * t + lower) * e
        };
    }
    out
}

/// Richardson-extrapolated central difference of a scalar function.
pub fn richardson_d1(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |s: f64| (f(x + s) - f(x - s)) / (2.0 * s);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// Jet perturbed in one of its four arguments (0 = t, 1 = x, 2 = p, 3 = q).
pub fn perturb(j: &Jet2, which: usize, s: f64) -> Jet2 {
    let mut out = j.clone();
    match which {
        0 => out.t += s,
        1 => out.x[0] += s,
        2 => out.p[0] += s,
        _ => out.q[0] += s,
    }
    out
}

/// Free values shifted by `s * dir`.
pub fn shift(df: &DiscreteFunction, dir: &[f64], s: f64) -> DiscreteFunction {
    let free: Vec<f64> = df
        .free_values()
        .iter()
        .zip(dir)
        .map(|(a, d)| a + s * d)
        .collect();
    df.with_free_values(&free).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub struct DescentResult {
    pub solution: DiscreteFunction,
    pub grad_norm: f64,
    pub energy: f64,
    pub iterations: usize,
}

/// Plain gradient descent on the discrete energy with Barzilai-Borwein steps and a
/// non-monotone Armijo safeguard (reference: worst of the last ten energies, plus a
/// roundoff allowance). Uses only the energy and its gradient.
pub fn gradient_descent<L: Lagrangian + ?Sized>(
    lag: &L,
    start: &DiscreteFunction,
    max_iter: usize,
    tol: f64,
) -> DescentResult {
    let problem = DiscreteProblem::new(lag, start.grid().clone()).unwrap();
    let mut x = start.clone();
    let mut e = problem.energy(&x).unwrap();
    let mut g = problem.gradient(&x).unwrap();
    let mut step = 1e-6;
    let mut it = 0;
    let mut recent = std::collections::VecDeque::from([e]);
    while it < max_iter && norm(&g) > tol {
        let mut s = step;
        let reference = recent.iter().copied().fold(f64::MIN, f64::max);
        let slack = 1e-14 * reference.abs();
        let (nx, ne, ng) = loop {
            let cand = shift(&x, &g, -s);
            let ce = problem.energy(&cand).unwrap();
            if ce <= reference - 1e-4 * s * dot(&g, &g) + slack || s < 1e-300 {
                break (cand.clone(), ce, problem.gradient(&cand).unwrap());
            }
            s *= 0.5;
        };
        let dx: Vec<f64> = nx
            .free_values()
            .iter()
            .zip(x.free_values())
            .map(|(a, b)| a - b)
            .collect();
        let dg: Vec<f64> = ng.iter().zip(&g).map(|(a, b)| a - b).collect();
        let curv = dot(&dx, &dg);
        step = if curv > 0.0 {
            dot(&dx, &dx) / curv
        } else {
            2.0 * s
        };
        x = nx;
        e = ne;
        g = ng;
        recent.push_back(e);
        if recent.len() > 10 {
            recent.pop_front();
        }
        it += 1;
    }
    DescentResult {
        grad_norm: norm(&g),
        solution: x,
        energy: e,
        iterations: it,
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
