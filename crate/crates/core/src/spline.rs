//! Quintic B-spline interpolation of grid profiles, giving a smooth curve with four
//! continuous derivatives that the curve-based residual can be evaluated on.

use crate::banded::BandedMatrix;
use crate::error::Result;
use crate::euler_lagrange::{BoundaryConditions, DiscreteFunction, SmoothCurve};
use crate::lagrangian::Jet4;

const BINOM6: [f64; 7] = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0];
const FALLING: [f64; 5] = [1.0, 5.0, 20.0, 60.0, 120.0];

/// `order`-th derivative of the centered cardinal quintic B-spline (support (-3, 3)).
fn bspline5(y: f64, order: usize) -> f64 {
    let (ay, sign) = if y < 0.0 {
        (-y, if order % 2 == 1 { -1.0 } else { 1.0 })
    } else {
        (y, 1.0)
    };
    if ay >= 3.0 {
        return 0.0;
    }
    // one-sided truncated powers from the right end, fewest cancellations
    let deg = 5 - order as i32;
    let mut sum = 0.0;
    for (k, &b) in BINOM6.iter().enumerate() {
        let d = 3.0 - ay - k as f64;
        if d <= 0.0 {
            break;
        }
        let term = b * d.powi(deg);
        sum += if k % 2 == 0 { term } else { -term };
    }
    let chain = if order % 2 == 1 { -1.0 } else { 1.0 };
    sign * chain * FALLING[order] * sum / 120.0
}

/// Interpolating quintic spline of every component of a grid profile.
///
/// Periodic profiles get a periodic spline; clamped profiles use the prescribed
/// end slopes and one-sided second differences as end conditions.
#[derive(Debug, Clone)]
pub struct QuinticSpline {
    a: f64,
    h: f64,
    n: usize,
    periodic: bool,
    period: f64,
    dim: usize,
    // per component; periodic: indices 0..n, clamped: spline index j stored at j + 2
    coefs: Vec<Vec<f64>>,
}

impl QuinticSpline {
    pub fn interpolate(df: &DiscreteFunction) -> Result<Self> {
        let grid = df.grid();
        let (n, h) = (grid.n(), grid.h());
        let dim = df.dim();
        let coefs = match grid.bc() {
            BoundaryConditions::Periodic => {
                let mut m = BandedMatrix::zeros(n, 2, true)?;
                for i in 0..n {
                    for off in -2_i64..=2 {
                        let j = (i as i64 + off).rem_euclid(n as i64) as usize;
                        m.add(i, j, bspline5(off as f64, 0));
                    }
                }
                (0..dim)
                    .map(|c| m.solve(&df.component(c)))
                    .collect::<Result<Vec<_>>>()?
            }
            BoundaryConditions::Clamped(ends) => {
                let size = n + 4;
                let mut m = BandedMatrix::zeros(size, 4, false)?;
                let last = n - 1;
                // rows: S'(a), S''(a), interpolation at each node, S''(b), S'(b)
                let cond_rows = [
                    (0usize, 0usize, 1usize),
                    (1, 0, 2),
                    (size - 2, last, 2),
                    (size - 1, last, 1),
                ];
                for &(row, node, order) in &cond_rows {
                    for off in -2_i64..=2 {
                        let col = (node as i64 + off + 2) as usize;
                        m.add(
                            row,
                            col,
                            bspline5(-off as f64, order) / h.powi(order as i32),
                        );
                    }
                }
                for i in 0..n {
                    for off in -2_i64..=2 {
                        let col = (i as i64 + off + 2) as usize;
                        m.add(i + 2, col, bspline5(-off as f64, 0));
                    }
                }
                let mut out = Vec::with_capacity(dim);
                for (c, e) in ends.iter().enumerate() {
                    let y = df.component(c);
                    let h2 = h * h;
                    let q_a = (2.0 * y[0] - 5.0 * y[1] + 4.0 * y[2] - y[3]) / h2;
                    let q_b =
                        (2.0 * y[last] - 5.0 * y[last - 1] + 4.0 * y[last - 2] - y[last - 3]) / h2;
                    let mut rhs = vec![0.0; size];
                    rhs[0] = e.slope_a;
                    rhs[1] = q_a;
                    rhs[2..n + 2].copy_from_slice(&y);
                    rhs[size - 2] = q_b;
                    rhs[size - 1] = e.slope_b;
                    out.push(m.solve(&rhs)?);
                }
                out
            }
        };
        Ok(Self {
            a: grid.a(),
            h,
            n,
            periodic: grid.is_periodic(),
            period: grid.b() - grid.a(),
            dim,
            coefs,
        })
    }

    fn derivatives(&self, c: usize, t: f64) -> [f64; 5] {
        let mut out = [0.0; 5];
        let coefs = &self.coefs[c];
        let mut s = t - self.a;
        if self.periodic {
            s = s.rem_euclid(self.period);
        }
        let x = s / self.h;
        let base = x.floor() as i64;
        for j in base - 2..=base + 3 {
            let coef = if self.periodic {
                coefs[j.rem_euclid(self.n as i64) as usize]
            } else {
                let idx = j + 2;
                if idx < 0 || idx as usize >= coefs.len() {
                    continue;
                }
                coefs[idx as usize]
            };
            for (order, o) in out.iter_mut().enumerate() {
                *o += coef * bspline5(x - j as f64, order);
            }
        }
        let mut scale = 1.0;
        for o in out.iter_mut() {
            *o /= scale;
            scale *= self.h;
        }
        out
    }
}

impl SmoothCurve for QuinticSpline {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet4(&self, t: f64) -> Jet4 {
        let mut jet = Jet4 {
            t,
            x: Vec::with_capacity(self.dim),
            p: Vec::with_capacity(self.dim),
            q: Vec::with_capacity(self.dim),
            u: Vec::with_capacity(self.dim),
            v: Vec::with_capacity(self.dim),
        };
        for c in 0..self.dim {
            let d = self.derivatives(c, t);
            jet.x.push(d[0]);
            jet.p.push(d[1]);
            jet.q.push(d[2]);
            jet.u.push(d[3]);
            jet.v.push(d[4]);
        }
        jet
    }
}
