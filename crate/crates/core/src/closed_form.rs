//! Exponential-polynomial solutions of the constant-coefficient reduced equations,
//! and the positive-minimum profile that defeats the maximum principle.

use crate::error::{BiharmError, Result};
use crate::euler_lagrange::{ExpandedOde, SmoothCurve};
use crate::lagrangian::Jet4;

/// One term `coef * t^power * exp(rate * t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coef: f64,
    pub power: u32,
    pub rate: f64,
}

/// `sum coef * t^power * exp(rate * t)`, closed under differentiation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPolySolution {
    // derivatives 0..=4, each merged by (power, rate)
    chain: [Vec<ExpTerm>; 5],
}

fn merged(terms: impl IntoIterator<Item = ExpTerm>) -> Vec<ExpTerm> {
    let mut out: Vec<ExpTerm> = Vec::new();
    for t in terms {
        match out
            .iter_mut()
            .find(|o| o.power == t.power && o.rate.to_bits() == t.rate.to_bits())
        {
            Some(o) => o.coef += t.coef,
            None => out.push(t),
        }
    }
    out.retain(|t| t.coef != 0.0);
    out
}

fn differentiate(terms: &[ExpTerm]) -> Vec<ExpTerm> {
    merged(terms.iter().flat_map(|t| {
        let from_power = (t.power > 0).then(|| ExpTerm {
            coef: t.coef * t.power as f64,
            power: t.power - 1,
            rate: t.rate,
        });
        let from_rate = ExpTerm {
            coef: t.coef * t.rate,
            power: t.power,
            rate: t.rate,
        };
        from_power.into_iter().chain(std::iter::once(from_rate))
    }))
}

fn evaluate(terms: &[ExpTerm], t: f64) -> f64 {
    terms
        .iter()
        .map(|e| e.coef * t.powi(e.power as i32) * (e.rate * t).exp())
        .sum()
}

impl ExpPolySolution {
    pub fn new(terms: Vec<ExpTerm>) -> Result<Self> {
        if terms
            .iter()
            .any(|t| !t.coef.is_finite() || !t.rate.is_finite())
        {
            return Err(BiharmError::NonFinite("exponential-polynomial term".into()));
        }
        let d0 = merged(terms);
        let d1 = differentiate(&d0);
        let d2 = differentiate(&d1);
        let d3 = differentiate(&d2);
        let d4 = differentiate(&d3);
        Ok(Self {
            chain: [d0, d1, d2, d3, d4],
        })
    }

    pub fn zero() -> Self {
        Self {
            chain: Default::default(),
        }
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.chain[0]
    }

    pub fn eval(&self, t: f64) -> f64 {
        evaluate(&self.chain[0], t)
    }

    /// Derivative as a new solution object.
    pub fn derivative(&self) -> Self {
        Self::new(self.chain[1].clone()).expect("derivative of finite terms is finite")
    }

    /// `order`-th derivative at `t`.
    pub fn eval_derivative(&self, order: usize, t: f64) -> f64 {
        if order < self.chain.len() {
            return evaluate(&self.chain[order], t);
        }
        let mut terms = self.chain[4].clone();
        for _ in 4..order {
            terms = differentiate(&terms);
        }
        evaluate(&terms, t)
    }

    /// Linear combination `sum w_i s_i`.
    pub fn combine(parts: &[(f64, &ExpPolySolution)]) -> Result<Self> {
        Self::new(
            parts
                .iter()
                .flat_map(|(w, s)| {
                    s.terms().iter().map(move |t| ExpTerm {
                        coef: w * t.coef,
                        ..*t
                    })
                })
                .collect(),
        )
    }
}

impl SmoothCurve for ExpPolySolution {
    fn dim(&self) -> usize {
        1
    }

    fn jet4(&self, t: f64) -> Jet4 {
        let d: Vec<f64> = self.chain.iter().map(|c| evaluate(c, t)).collect();
        Jet4::scalar(t, d[0], d[1], d[2], d[3], d[4])
    }
}

/// The two constant-coefficient reduced equations with explicit solution families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstantCoefficientOde {
    /// `v - 20 q + 64 x = 0`.
    EuclideanM3L8,
    /// `v - 2 lambda q + lambda^2 x = 0`.
    Cylinder { lambda: f64 },
}

impl ConstantCoefficientOde {
    pub fn expanded(self) -> ExpandedOde {
        match self {
            ConstantCoefficientOde::EuclideanM3L8 => ExpandedOde::EuclideanM3L8,
            ConstantCoefficientOde::Cylinder { lambda } => ExpandedOde::Cylinder { lambda },
        }
    }

    /// `(b, c)` of the characteristic polynomial `r^4 + b r^2 + c`.
    fn biquadratic(self) -> Result<(f64, f64)> {
        match self {
            ConstantCoefficientOde::EuclideanM3L8 => Ok((-20.0, 64.0)),
            ConstantCoefficientOde::Cylinder { lambda } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(BiharmError::InvalidParameter(format!(
                        "lambda must be positive, got {lambda}"
                    )));
                }
                Ok((-2.0 * lambda, lambda * lambda))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: f64,
    pub multiplicity: u32,
}

/// Roots of the characteristic polynomial, larger `r^2` first, positive before
/// negative: `{4, -4, 2, -2}` for the Euclidean case and `{±sqrt(lambda)}` (double)
/// for the cylinder.
pub fn characteristic_roots(ode: ConstantCoefficientOde) -> Result<Vec<Root>> {
    let (b, c) = ode.biquadratic()?;
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        return Err(BiharmError::InvalidParameter(
            "characteristic polynomial has complex roots".into(),
        ));
    }
    let pair = |z: f64, multiplicity: u32| -> Result<[Root; 2]> {
        if z <= 0.0 {
            return Err(BiharmError::InvalidParameter(
                "characteristic polynomial has non-real or zero roots".into(),
            ));
        }
        let r = z.sqrt();
        Ok([
            Root {
                value: r,
                multiplicity,
            },
            Root {
                value: -r,
                multiplicity,
            },
        ])
    };
    if disc == 0.0 {
        Ok(pair(-b / 2.0, 2)?.to_vec())
    } else {
        let s = disc.sqrt();
        let mut roots = pair((-b + s) / 2.0, 1)?.to_vec();
        roots.extend(pair((-b - s) / 2.0, 1)?);
        Ok(roots)
    }
}

/// Four basis solutions `t^j e^{r t}`, ordered by power, then root.
pub fn basis_solutions(ode: ConstantCoefficientOde) -> Result<Vec<ExpPolySolution>> {
    let roots = characteristic_roots(ode)?;
    let max_mult = roots.iter().map(|r| r.multiplicity).max().unwrap_or(0);
    let mut out = Vec::with_capacity(4);
    for power in 0..max_mult {
        for root in roots.iter().filter(|r| power < r.multiplicity) {
            out.push(ExpPolySolution::new(vec![ExpTerm {
                coef: 1.0,
                power,
                rate: root.value,
            }])?);
        }
    }
    Ok(out)
}

/// `s sinh(s) + e^s` with `s = sqrt(lambda) r`, written as exponential terms.
pub fn sampson_profile(lambda: f64) -> Result<ExpPolySolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(BiharmError::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let w = lambda.sqrt();
    ExpPolySolution::new(vec![
        ExpTerm {
            coef: 1.0,
            power: 0,
            rate: w,
        },
        ExpTerm {
            coef: 0.5 * w,
            power: 1,
            rate: w,
        },
        ExpTerm {
            coef: -0.5 * w,
            power: 1,
            rate: -w,
        },
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampsonReport {
    pub lambda: f64,
    pub r0: f64,
    pub alpha_min: f64,
    pub alpha_dot_r0: f64,
    pub violates_principle: bool,
    /// `min(alpha(±10/sqrt(lambda))) - alpha_min`.
    pub end_margin: f64,
    /// Largest scaled residual of the cylinder equation over the check points.
    pub ode_residual: f64,
}

const SCAN_INTERVALS: usize = 4000;

/// Locates the absolute minimum of the positive profile and checks its sign.
pub fn sampson_analyze(lambda: f64) -> Result<SampsonReport> {
    let profile = sampson_profile(lambda)?;
    let w = lambda.sqrt();
    let ode = ExpandedOde::Cylinder { lambda };

    let mut ode_residual = 0.0_f64;
    for i in 0..20 {
        let r = (-2.0 + 4.0 * i as f64 / 19.0) / w;
        let jet = profile.jet4(r);
        let scale =
            1.0 + jet.v[0].abs() + 2.0 * lambda * jet.q[0].abs() + lambda * lambda * jet.x[0].abs();
        ode_residual = ode_residual.max(ode.residual(&jet)?.abs() / scale);
    }
    if ode_residual > 1e-10 {
        return Err(BiharmError::InvalidParameter(format!(
            "profile fails the cylinder equation (scaled residual {ode_residual:e})"
        )));
    }

    let (lo, hi) = (-10.0 / w, 10.0 / w);
    let slope = |r: f64| profile.eval_derivative(1, r);
    let mut candidates = Vec::new();
    let mut prev_r = lo;
    let mut prev_s = slope(lo);
    for i in 1..=SCAN_INTERVALS {
        let r = lo + (hi - lo) * i as f64 / SCAN_INTERVALS as f64;
        let s = slope(r);
        if prev_s < 0.0 && s >= 0.0 {
            candidates.push(bisect(&slope, prev_r, r));
        }
        prev_r = r;
        prev_s = s;
    }
    let r0 = candidates
        .into_iter()
        .min_by(|a, b| profile.eval(*a).total_cmp(&profile.eval(*b)))
        .ok_or(BiharmError::NoSignChange { lo, hi })?;
    let alpha_min = profile.eval(r0);
    let end_margin = profile.eval(lo).min(profile.eval(hi)) - alpha_min;
    if end_margin <= 1.0 {
        return Err(BiharmError::InvalidParameter(format!(
            "profile does not grow past the minimum at the scan ends (margin {end_margin})"
        )));
    }
    Ok(SampsonReport {
        lambda,
        r0,
        alpha_min,
        alpha_dot_r0: slope(r0),
        violates_principle: alpha_min > 0.0,
        end_margin,
        ode_residual,
    })
}

/// Bisection on a bracket with `f(lo) < 0 <= f(hi)`, run until the midpoint
/// coincides with an endpoint.
fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() < f(hi).abs() {
        lo
    } else {
        hi
    }
}
