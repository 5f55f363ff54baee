//! Euler-Lagrange residual along a smooth curve.
//!
//! The total derivatives `d/dt L_p` and `d^2/dt^2 L_q` are taken by finite
//! differences of `t -> L_p(jet(t))` and `t -> L_q(jet(t))`, so only first partials
//! of `L` are needed.

use std::cell::RefCell;

use crate::error::{BiharmError, Result};
use crate::lagrangian::{Jet2, Jet4, Lagrangian, Slot};

/// A curve with exact derivatives up to order four.
pub trait SmoothCurve: Send + Sync {
    fn dim(&self) -> usize;

    fn jet4(&self, t: f64) -> Jet4;

    fn jet2(&self, t: f64) -> Jet2 {
        self.jet4(t).to_jet2()
    }
}

impl<C: SmoothCurve + ?Sized> SmoothCurve for Box<C> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn jet4(&self, t: f64) -> Jet4 {
        (**self).jet4(t)
    }
}

/// `alpha(t) = value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCurve(pub f64);

impl SmoothCurve for ConstantCurve {
    fn dim(&self) -> usize {
        1
    }

    fn jet4(&self, t: f64) -> Jet4 {
        Jet4::scalar(t, self.0, 0.0, 0.0, 0.0, 0.0)
    }
}

/// `alpha(t) = base + a_cos cos(n t) + a_sin sin(n t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierCurve {
    pub base: f64,
    pub a_cos: f64,
    pub a_sin: f64,
    pub mode: f64,
}

impl SmoothCurve for FourierCurve {
    fn dim(&self) -> usize {
        1
    }

    fn jet4(&self, t: f64) -> Jet4 {
        let n = self.mode;
        let (s, c) = (n * t).sin_cos();
        let even = self.a_cos * c + self.a_sin * s;
        let odd = -self.a_cos * s + self.a_sin * c;
        Jet4::scalar(
            t,
            self.base + even,
            n * odd,
            -n * n * even,
            -n * n * n * odd,
            n.powi(4) * even,
        )
    }
}

/// Several scalar curves stacked into one vector-valued curve.
pub struct StackedCurve {
    parts: Vec<Box<dyn SmoothCurve>>,
}

impl StackedCurve {
    pub fn new(parts: Vec<Box<dyn SmoothCurve>>) -> Self {
        Self { parts }
    }
}

impl SmoothCurve for StackedCurve {
    fn dim(&self) -> usize {
        self.parts.iter().map(|p| p.dim()).sum()
    }

    fn jet4(&self, t: f64) -> Jet4 {
        let mut out = Jet4 {
            t,
            x: vec![],
            p: vec![],
            q: vec![],
            u: vec![],
            v: vec![],
        };
        for part in &self.parts {
            let j = part.jet4(t);
            out.x.extend(j.x);
            out.p.extend(j.p);
            out.q.extend(j.q);
            out.u.extend(j.u);
            out.v.extend(j.v);
        }
        out
    }
}

/// Largest mismatch between a curve's stated derivatives and central differences
/// of the next-lower derivative, at `t` with step `step`.
pub fn curve_consistency<C: SmoothCurve + ?Sized>(curve: &C, t: f64, step: f64) -> f64 {
    let lo = curve.jet4(t - step);
    let hi = curve.jet4(t + step);
    let mid = curve.jet4(t);
    let mut worst = 0.0_f64;
    for c in 0..curve.dim() {
        let pairs = [
            (lo.x[c], hi.x[c], mid.p[c]),
            (lo.p[c], hi.p[c], mid.q[c]),
            (lo.q[c], hi.q[c], mid.u[c]),
            (lo.u[c], hi.u[c], mid.v[c]),
        ];
        for (a, b, d) in pairs {
            worst = worst.max(((b - a) / (2.0 * step) - d).abs());
        }
    }
    worst
}

/// The expanded fourth-order equations printed for three catalog cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpandedOde {
    /// Torus to sphere with winding `k`.
    Torus { k: i64 },
    /// Euclidean case in the log variable with `m = 3`, `lambda = 8`.
    EuclideanM3L8,
    /// Cylinder with eigenvalue `lambda`.
    Cylinder { lambda: f64 },
}

impl ExpandedOde {
    pub fn residual(&self, jet: &Jet4) -> Result<f64> {
        if jet.dim() != 1 {
            return Err(BiharmError::Incompatible(format!(
                "expanded equations are scalar, got {} components",
                jet.dim()
            )));
        }
        let all = [jet.t, jet.x[0], jet.p[0], jet.q[0], jet.u[0], jet.v[0]];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(BiharmError::NonFinite(format!("jet at t = {}", jet.t)));
        }
        let (x, p, q, v) = (jet.x[0], jet.p[0], jet.q[0], jet.v[0]);
        Ok(match *self {
            ExpandedOde::Torus { k } => {
                let k2 = (k * k) as f64;
                let (s2, c2) = (2.0 * x).sin_cos();
                v - 2.0 * k2 * c2 * q + 2.0 * k2 * s2 * p * p + 0.5 * k2 * k2 * s2 * c2
            }
            ExpandedOde::EuclideanM3L8 => v - 20.0 * q + 64.0 * x,
            ExpandedOde::Cylinder { lambda } => v - 2.0 * lambda * q + lambda * lambda * x,
        })
    }
}

fn d1_fourth_order(f: &dyn Fn(f64) -> Vec<f64>, t: f64, s: f64) -> Vec<f64> {
    let (a, b, c, d) = (f(t + 2.0 * s), f(t + s), f(t - s), f(t - 2.0 * s));
    (0..a.len())
        .map(|i| (-a[i] + 8.0 * b[i] - 8.0 * c[i] + d[i]) / (12.0 * s))
        .collect()
}

fn d2_fourth_order(f: &dyn Fn(f64) -> Vec<f64>, t: f64, s: f64) -> Vec<f64> {
    let (a, b, m, c, d) = (f(t + 2.0 * s), f(t + s), f(t), f(t - s), f(t - 2.0 * s));
    (0..a.len())
        .map(|i| (-a[i] + 16.0 * b[i] - 30.0 * m[i] + 16.0 * c[i] - d[i]) / (12.0 * s * s))
        .collect()
}

fn richardson(coarse: Vec<f64>, fine: Vec<f64>) -> Vec<f64> {
    coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| (16.0 * f - c) / 15.0)
        .collect()
}

/// Default finite-difference step for a domain of the given length.
pub fn default_fd_step(domain_length: f64) -> f64 {
    1e-3 * domain_length
}

/// `(L_x - d/dt L_p + d^2/dt^2 L_q) / 2` along `curve` at `t`, one entry per component.
///
/// The factor one half makes the result coincide with the monic expanded equations
/// for unit volume factor, since every catalog Lagrangian has `L_qq = 2 W`.
pub fn el_residual_along_curve<L, C>(lag: &L, curve: &C, t: f64, fd_step: f64) -> Result<Vec<f64>>
where
    L: Lagrangian + ?Sized,
    C: SmoothCurve + ?Sized,
{
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(BiharmError::InvalidParameter(format!(
            "fd_step must be positive, got {fd_step}"
        )));
    }
    let dim = lag.dim();
    if curve.dim() != dim {
        return Err(BiharmError::Incompatible(format!(
            "curve has {} components, Lagrangian expects {dim}",
            curve.dim()
        )));
    }
    let domain = lag.domain();
    let reach = 2.0 * fd_step;
    if !domain.periodic && (t - reach < domain.a || t + reach > domain.b) {
        return Err(BiharmError::StencilMargin { t, reach });
    }
    domain.check(t)?;

    // evaluation failures at shifted points surface after the sweep
    let failure = RefCell::new(None);
    let partial_block = |t: f64, slot: fn(usize) -> Slot| -> Vec<f64> {
        match lag.partials_unchecked(&curve.jet2(t)) {
            Ok(p) => (0..dim).map(|c| p.grad(slot(c))).collect(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                vec![f64::NAN; dim]
            }
        }
    };
    let lp = |s: f64| partial_block(s, Slot::P);
    let lq = |s: f64| partial_block(s, Slot::Q);

    let dlp = richardson(
        d1_fourth_order(&lp, t, fd_step),
        d1_fourth_order(&lp, t, 0.5 * fd_step),
    );
    let ddlq = richardson(
        d2_fourth_order(&lq, t, fd_step),
        d2_fourth_order(&lq, t, 0.5 * fd_step),
    );
    let here = lag.partials(&curve.jet2(t))?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok((0..dim)
        .map(|c| 0.5 * (here.grad(Slot::X(c)) - dlp[c] + ddlq[c]))
        .collect())
}
