//! Reduced Lagrangians of equivariant maps and their exact partial derivatives.
//!
//! Every catalog entry has the form `L = W(t) * T(t, x, p, q)^2`, where `T` is the
//! reduced tension field and `W` the volume factor of the domain. Partials of `L`
//! are assembled from closed-form partials of `T` and `W` by the product rule.

use std::f64::consts::PI;

use crate::error::{BiharmError, Result};

/// Evaluation point `(t, x, p, q)` of a Lagrangian: profile value and its first
/// two derivatives, one entry per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub t: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl Jet2 {
    pub fn new(t: f64, x: Vec<f64>, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let jet = Self { t, x, p, q };
        jet.validate()?;
        Ok(jet)
    }

    /// One-component jet.
    pub fn scalar(t: f64, x: f64, p: f64, q: f64) -> Self {
        Self {
            t,
            x: vec![x],
            p: vec![p],
            q: vec![q],
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.x.len();
        if d == 0 || self.p.len() != d || self.q.len() != d {
            return Err(BiharmError::Incompatible(format!(
                "jet component lengths x={}, p={}, q={}",
                self.x.len(),
                self.p.len(),
                self.q.len()
            )));
        }
        let finite = self.t.is_finite()
            && self
                .x
                .iter()
                .chain(&self.p)
                .chain(&self.q)
                .all(|v| v.is_finite());
        if !finite {
            return Err(BiharmError::NonFinite(format!("jet at t = {}", self.t)));
        }
        Ok(())
    }

    /// Reads the coordinate addressed by `slot`.
    pub fn get(&self, slot: Slot) -> f64 {
        match slot {
            Slot::T => self.t,
            Slot::X(c) => self.x[c],
            Slot::P(c) => self.p[c],
            Slot::Q(c) => self.q[c],
        }
    }

    pub fn get_mut(&mut self, slot: Slot) -> &mut f64 {
        match slot {
            Slot::T => &mut self.t,
            Slot::X(c) => &mut self.x[c],
            Slot::P(c) => &mut self.p[c],
            Slot::Q(c) => &mut self.q[c],
        }
    }
}

/// Jet extended by third (`u`) and fourth (`v`) derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet4 {
    pub t: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Jet4 {
    pub fn scalar(t: f64, x: f64, p: f64, q: f64, u: f64, v: f64) -> Self {
        Self {
            t,
            x: vec![x],
            p: vec![p],
            q: vec![q],
            u: vec![u],
            v: vec![v],
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn to_jet2(&self) -> Jet2 {
        Jet2 {
            t: self.t,
            x: self.x.clone(),
            p: self.p.clone(),
            q: self.q.clone(),
        }
    }
}

/// Addresses one argument of `L(t, x, p, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    T,
    X(usize),
    P(usize),
    Q(usize),
}

impl Slot {
    pub fn index(self, dim: usize) -> usize {
        match self {
            Slot::T => 0,
            Slot::X(c) => 1 + c,
            Slot::P(c) => 1 + dim + c,
            Slot::Q(c) => 1 + 2 * dim + c,
        }
    }

    /// All `1 + 3 * dim` slots in storage order.
    pub fn all(dim: usize) -> Vec<Slot> {
        let mut out = vec![Slot::T];
        out.extend((0..dim).map(Slot::X));
        out.extend((0..dim).map(Slot::P));
        out.extend((0..dim).map(Slot::Q));
        out
    }

    fn component(self) -> Option<usize> {
        match self {
            Slot::T => None,
            Slot::X(c) | Slot::P(c) | Slot::Q(c) => Some(c),
        }
    }

    fn with_component(self, c: usize) -> Slot {
        match self {
            Slot::T => Slot::T,
            Slot::X(_) => Slot::X(c),
            Slot::P(_) => Slot::P(c),
            Slot::Q(_) => Slot::Q(c),
        }
    }
}

/// Value, gradient and Hessian of `L` over the slots `(t, x.., p.., q..)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialsL {
    dim: usize,
    pub value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl PartialsL {
    pub fn zeros(dim: usize) -> Self {
        let n = 1 + 3 * dim;
        Self {
            dim,
            value: 0.0,
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nvars(&self) -> usize {
        1 + 3 * self.dim
    }

    pub fn grad(&self, slot: Slot) -> f64 {
        self.grad[slot.index(self.dim)]
    }

    pub fn hess(&self, a: Slot, b: Slot) -> f64 {
        let n = self.nvars();
        self.hess[a.index(self.dim) * n + b.index(self.dim)]
    }

    pub fn set_grad(&mut self, slot: Slot, value: f64) {
        let i = slot.index(self.dim);
        self.grad[i] = value;
    }

    /// Writes `value` at `(a, b)` and its mirror.
    pub fn set_hess(&mut self, a: Slot, b: Slot, value: f64) {
        let n = self.nvars();
        let (i, j) = (a.index(self.dim), b.index(self.dim));
        self.hess[i * n + j] = value;
        self.hess[j * n + i] = value;
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.nvars();
        (0..n).all(|i| (0..n).all(|j| self.hess[i * n + j] == self.hess[j * n + i]))
    }
}

/// Warping function of a warped product, with exact derivatives up to order three.
#[derive(Debug, Clone, PartialEq)]
pub enum WarpFn {
    Identity,
    Sine,
    Sinh,
    Constant(f64),
    Table(TableWarp),
}

impl WarpFn {
    /// `[f, f', f'', f''']` at `r`.
    pub fn derivs(&self, r: f64) -> Result<[f64; 4]> {
        Ok(match self {
            WarpFn::Identity => [r, 1.0, 0.0, 0.0],
            WarpFn::Sine => {
                let (s, c) = r.sin_cos();
                [s, c, -s, -c]
            }
            WarpFn::Sinh => {
                let (s, c) = (r.sinh(), r.cosh());
                [s, c, s, c]
            }
            WarpFn::Constant(c) => [*c, 0.0, 0.0, 0.0],
            WarpFn::Table(table) => table.derivs(r)?,
        })
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        Ok(self.derivs(r)?[0])
    }
}

/// Sampled warping function interpolated by a natural cubic spline.
#[derive(Debug, Clone, PartialEq)]
pub struct TableWarp {
    knots: Vec<f64>,
    values: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl TableWarp {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return Err(BiharmError::InvalidParameter(
                "table warp needs at least 3 knots and one value per knot".into(),
            ));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BiharmError::InvalidParameter(
                "table warp knots must be strictly increasing".into(),
            ));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(BiharmError::NonFinite("table warp samples".into()));
        }
        // natural spline: tridiagonal system for interior second derivatives
        let mut m = vec![0.0; n];
        let interior = n - 2;
        let mut diag = vec![0.0; interior];
        let mut upper = vec![0.0; interior];
        let mut rhs = vec![0.0; interior];
        for k in 0..interior {
            let i = k + 1;
            let h0 = knots[i] - knots[i - 1];
            let h1 = knots[i + 1] - knots[i];
            diag[k] = 2.0 * (h0 + h1);
            upper[k] = h1;
            rhs[k] = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
        }
        for k in 1..interior {
            let lower = knots[k + 1] - knots[k];
            let w = lower / diag[k - 1];
            diag[k] -= w * upper[k - 1];
            rhs[k] -= w * rhs[k - 1];
        }
        for k in (0..interior).rev() {
            let next = if k + 1 < interior { m[k + 2] } else { 0.0 };
            m[k + 1] = (rhs[k] - upper[k] * next) / diag[k];
        }
        Ok(Self { knots, values, m })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn derivs(&self, r: f64) -> Result<[f64; 4]> {
        let (lo, hi) = self.range();
        let slack = 1e-12 * (hi - lo);
        if !(r >= lo - slack && r <= hi + slack) {
            return Err(BiharmError::Domain { t: r, a: lo, b: hi });
        }
        let i = match self.knots.partition_point(|&k| k <= r) {
            0 => 0,
            p => (p - 1).min(self.knots.len() - 2),
        };
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let h = x1 - x0;
        let a = (x1 - r) / h;
        let b = (r - x0) / h;
        let f = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let f1 =
            (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let f2 = a * m0 + b * m1;
        let f3 = (m1 - m0) / h;
        Ok([f, f1, f2, f3])
    }
}

/// Interval of the independent variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub a: f64,
    pub b: f64,
    pub periodic: bool,
}

impl Domain {
    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, t: f64) -> bool {
        if self.periodic {
            return t.is_finite();
        }
        let slack = 1e-12 * self.length().max(1.0);
        t >= self.a - slack && t <= self.b + slack
    }

    pub fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(BiharmError::Domain {
                t,
                a: self.a,
                b: self.b,
            })
        }
    }
}

/// The catalog of reduced problems.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Flat torus to the round 2-sphere, `(gamma, theta) -> (k gamma, alpha(theta))`.
    TorusToSphere { k: i64 },
    /// Warped product `f^2(r) g_{S^m} + dr^2` into `h^2(alpha) g_{S^n} + d alpha^2`.
    WarpedProduct {
        m: u32,
        lambda: f64,
        f: WarpFn,
        h: WarpFn,
    },
    /// Euclidean case after the change of variable `r = e^t`.
    EuclideanLog { m: u32, lambda: f64 },
    /// Cylinder `S^m x R` into Euclidean space.
    Cylinder { lambda: f64 },
}

/// Number of points used to certify `f > 0` on a warped-product domain.
const WARP_POSITIVITY_SAMPLES: usize = 10_240;

/// A validated catalog entry together with its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySpec {
    kind: Geometry,
    domain: Domain,
    f_min: Option<f64>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(BiharmError::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )))
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(BiharmError::InvalidParameter(format!(
            "domain must satisfy a < b, got [{a}, {b}]"
        )))
    }
}

impl GeometrySpec {
    pub fn torus_to_sphere(k: i64) -> Result<Self> {
        if k == 0 {
            return Err(BiharmError::InvalidParameter("k must be nonzero".into()));
        }
        Ok(Self {
            kind: Geometry::TorusToSphere { k },
            domain: Domain {
                a: 0.0,
                b: 2.0 * PI,
                periodic: true,
            },
            f_min: None,
        })
    }

    pub fn warped_product(
        m: u32,
        lambda: f64,
        f: WarpFn,
        h: WarpFn,
        a: f64,
        b: f64,
    ) -> Result<Self> {
        if m == 0 {
            return Err(BiharmError::InvalidParameter("m must be positive".into()));
        }
        check_lambda(lambda)?;
        check_interval(a, b)?;
        if let WarpFn::Constant(c) = f {
            if !(c > 0.0) {
                return Err(BiharmError::InvalidParameter(format!(
                    "constant warp must be positive, got {c}"
                )));
            }
        }
        let mut f_min = f64::INFINITY;
        for i in 0..=WARP_POSITIVITY_SAMPLES {
            let r = a + (b - a) * i as f64 / WARP_POSITIVITY_SAMPLES as f64;
            let value = f.eval(r)?;
            if !(value > 0.0) {
                return Err(BiharmError::NonPositiveWarp { r, value });
            }
            f_min = f_min.min(value);
        }
        Ok(Self {
            kind: Geometry::WarpedProduct { m, lambda, f, h },
            domain: Domain {
                a,
                b,
                periodic: false,
            },
            f_min: Some(f_min),
        })
    }

    pub fn euclidean_log(m: u32, lambda: f64, a: f64, b: f64) -> Result<Self> {
        if m == 0 {
            return Err(BiharmError::InvalidParameter("m must be positive".into()));
        }
        check_lambda(lambda)?;
        check_interval(a, b)?;
        Ok(Self {
            kind: Geometry::EuclideanLog { m, lambda },
            domain: Domain {
                a,
                b,
                periodic: false,
            },
            f_min: None,
        })
    }

    pub fn cylinder(lambda: f64, a: f64, b: f64) -> Result<Self> {
        check_lambda(lambda)?;
        check_interval(a, b)?;
        Ok(Self {
            kind: Geometry::Cylinder { lambda },
            domain: Domain {
                a,
                b,
                periodic: false,
            },
            f_min: None,
        })
    }

    pub fn kind(&self) -> &Geometry {
        &self.kind
    }

    /// Smallest sampled value of the domain warp (warped products only).
    pub fn f_min(&self) -> Option<f64> {
        self.f_min
    }

    /// Eigenvalue of the fibre eigenmap.
    pub fn lambda(&self) -> f64 {
        match &self.kind {
            Geometry::TorusToSphere { k } => (k * k) as f64,
            Geometry::WarpedProduct { lambda, .. }
            | Geometry::EuclideanLog { lambda, .. }
            | Geometry::Cylinder { lambda } => *lambda,
        }
    }

    fn check_jet(&self, jet: &Jet2) -> Result<()> {
        jet.validate()?;
        if jet.dim() != 1 {
            return Err(BiharmError::Incompatible(format!(
                "catalog geometries are scalar, got a jet with {} components",
                jet.dim()
            )));
        }
        self.domain.check(jet.t)
    }

    /// Reduced tension field at `jet`.
    pub fn tension(&self, jet: &Jet2) -> Result<f64> {
        self.check_jet(jet)?;
        Ok(self.tension_jet(jet.t, jet.x[0], jet.p[0], jet.q[0])?.value)
    }

    /// Volume factor `W(t)` multiplying `tension^2` in the Lagrangian.
    pub fn volume_factor(&self, t: f64) -> Result<f64> {
        self.domain.check(t)?;
        Ok(self.volume_jet(t)?[0])
    }

    /// `[W, W_t, W_tt]`.
    fn volume_jet(&self, t: f64) -> Result<[f64; 3]> {
        Ok(match &self.kind {
            Geometry::TorusToSphere { .. } | Geometry::Cylinder { .. } => [1.0, 0.0, 0.0],
            Geometry::EuclideanLog { m, .. } => {
                let c = *m as f64 - 3.0;
                let w = (c * t).exp();
                [w, c * w, c * c * w]
            }
            Geometry::WarpedProduct { m, f, .. } => {
                let [fv, f1, f2, _] = positive_warp(f, t)?;
                let m = *m as f64;
                let w = fv.powf(m);
                let w_t = m * fv.powf(m - 1.0) * f1;
                let w_tt = m * (m - 1.0) * fv.powf(m - 2.0) * f1 * f1 + m * fv.powf(m - 1.0) * f2;
                [w, w_t, w_tt]
            }
        })
    }

    fn tension_jet(&self, t: f64, x: f64, p: f64, q: f64) -> Result<TensionJet> {
        let mut tj = TensionJet::default();
        match &self.kind {
            Geometry::TorusToSphere { k } => {
                let k2 = (k * k) as f64;
                let (s2, c2) = (2.0 * x).sin_cos();
                tj.value = q - 0.5 * k2 * s2;
                tj.grad[X] = -k2 * c2;
                tj.grad[Q] = 1.0;
                tj.hess[X][X] = 2.0 * k2 * s2;
            }
            Geometry::Cylinder { lambda } => {
                tj.value = q - lambda * x;
                tj.grad[X] = -lambda;
                tj.grad[Q] = 1.0;
            }
            Geometry::EuclideanLog { m, lambda } => {
                let drift = *m as f64 - 1.0;
                tj.value = q + drift * p - lambda * x;
                tj.grad[X] = -lambda;
                tj.grad[P] = drift;
                tj.grad[Q] = 1.0;
            }
            Geometry::WarpedProduct { m, lambda, f, h } => {
                let m = *m as f64;
                let [fv, f1, f2, f3] = positive_warp(f, t)?;
                let [hv, h1, h2, h3] = h.derivs(x)?;
                // g = f'/f and its t-derivatives
                let g = f1 / fv;
                let g1 = f2 / fv - f1 * f1 / (fv * fv);
                let g2 = f3 / fv - 3.0 * f1 * f2 / (fv * fv) + 2.0 * f1 * f1 * f1 / (fv * fv * fv);
                // target term H(x) = h h' and its x-derivatives
                let big_h = hv * h1;
                let big_h1 = h1 * h1 + hv * h2;
                let big_h2 = 3.0 * h1 * h2 + hv * h3;
                let inv_f2 = 1.0 / (fv * fv);
                let inv_f3 = inv_f2 / fv;
                let inv_f4 = inv_f2 * inv_f2;

                tj.value = q + m * g * p - lambda * big_h * inv_f2;
                tj.grad[TT] = m * g1 * p + 2.0 * lambda * big_h * f1 * inv_f3;
                tj.grad[X] = -lambda * big_h1 * inv_f2;
                tj.grad[P] = m * g;
                tj.grad[Q] = 1.0;
                tj.hess[TT][TT] =
                    m * g2 * p + 2.0 * lambda * big_h * (f2 * inv_f3 - 3.0 * f1 * f1 * inv_f4);
                tj.hess[TT][X] = 2.0 * lambda * big_h1 * f1 * inv_f3;
                tj.hess[X][TT] = tj.hess[TT][X];
                tj.hess[TT][P] = m * g1;
                tj.hess[P][TT] = tj.hess[TT][P];
                tj.hess[X][X] = -lambda * big_h2 * inv_f2;
            }
        }
        Ok(tj)
    }

    fn value_raw(&self, t: f64, x: f64, p: f64, q: f64) -> Result<f64> {
        let tension = self.tension_jet(t, x, p, q)?.value;
        Ok(self.volume_jet(t)?[0] * tension * tension)
    }

    fn partials_raw(&self, t: f64, x: f64, p: f64, q: f64) -> Result<PartialsL> {
        let tj = self.tension_jet(t, x, p, q)?;
        let [w, w_t, w_tt] = self.volume_jet(t)?;
        let wd = |a: usize| if a == TT { w_t } else { 0.0 };
        let tv = tj.value;

        let mut out = PartialsL::zeros(1);
        out.value = w * tv * tv;
        for (a, &slot) in SLOTS.iter().enumerate() {
            out.set_grad(slot, wd(a) * tv * tv + 2.0 * w * tv * tj.grad[a]);
        }
        for a in 0..4 {
            for b in a..4 {
                let wab = if a == TT && b == TT { w_tt } else { 0.0 };
                let v = wab * tv * tv
                    + 2.0 * wd(a) * tv * tj.grad[b]
                    + 2.0 * wd(b) * tv * tj.grad[a]
                    + 2.0 * w * (tj.grad[a] * tj.grad[b] + tv * tj.hess[a][b]);
                out.set_hess(SLOTS[a], SLOTS[b], v);
            }
        }
        Ok(out)
    }
}

const TT: usize = 0;
const X: usize = 1;
const P: usize = 2;
const Q: usize = 3;
const SLOTS: [Slot; 4] = [Slot::T, Slot::X(0), Slot::P(0), Slot::Q(0)];

#[derive(Debug, Default)]
struct TensionJet {
    value: f64,
    grad: [f64; 4],
    hess: [[f64; 4]; 4],
}

fn positive_warp(f: &WarpFn, r: f64) -> Result<[f64; 4]> {
    let d = f.derivs(r)?;
    if !(d[0] > 0.0) {
        return Err(BiharmError::NonPositiveWarp { r, value: d[0] });
    }
    Ok(d)
}

/// A Lagrangian `L(t, x, p, q)` with exact first and second partials.
///
/// The `*_unchecked` methods skip the domain test so that stencils may probe
/// slightly past an endpoint; they still reject non-finite input and invalid warps.
pub trait Lagrangian: Send + Sync {
    fn dim(&self) -> usize;

    fn domain(&self) -> Domain;

    fn value_unchecked(&self, jet: &Jet2) -> Result<f64>;

    fn partials_unchecked(&self, jet: &Jet2) -> Result<PartialsL>;

    fn value(&self, jet: &Jet2) -> Result<f64> {
        self.check(jet)?;
        self.value_unchecked(jet)
    }

    fn partials(&self, jet: &Jet2) -> Result<PartialsL> {
        self.check(jet)?;
        self.partials_unchecked(jet)
    }

    fn check(&self, jet: &Jet2) -> Result<()> {
        jet.validate()?;
        if jet.dim() != self.dim() {
            return Err(BiharmError::Incompatible(format!(
                "jet has {} components, Lagrangian expects {}",
                jet.dim(),
                self.dim()
            )));
        }
        self.domain().check(jet.t)
    }
}

impl Lagrangian for GeometrySpec {
    fn dim(&self) -> usize {
        1
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn value_unchecked(&self, jet: &Jet2) -> Result<f64> {
        jet.validate()?;
        self.value_raw(jet.t, jet.x[0], jet.p[0], jet.q[0])
    }

    fn partials_unchecked(&self, jet: &Jet2) -> Result<PartialsL> {
        jet.validate()?;
        self.partials_raw(jet.t, jet.x[0], jet.p[0], jet.q[0])
    }

    fn check(&self, jet: &Jet2) -> Result<()> {
        self.check_jet(jet)
    }
}

/// Sum of independent Lagrangians, one per component block.
///
/// `L(t, x_1.., x_r..) = sum_j L_j(t, x_j, p_j, q_j)`; the system form of the
/// Euler-Lagrange equations then decouples into one equation per block.
#[derive(Debug, Clone)]
pub struct Uncoupled<L> {
    parts: Vec<L>,
    offsets: Vec<usize>,
    dim: usize,
}

impl<L: Lagrangian> Uncoupled<L> {
    pub fn new(parts: Vec<L>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| BiharmError::InvalidParameter("empty system".into()))?
            .domain();
        if parts.iter().any(|p| p.domain() != first) {
            return Err(BiharmError::Incompatible(
                "system blocks must share one domain".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(parts.len());
        let mut dim = 0;
        for part in &parts {
            offsets.push(dim);
            dim += part.dim();
        }
        Ok(Self {
            parts,
            offsets,
            dim,
        })
    }

    pub fn parts(&self) -> &[L] {
        &self.parts
    }

    fn block_jet(&self, jet: &Jet2, block: usize) -> Jet2 {
        let lo = self.offsets[block];
        let hi = lo + self.parts[block].dim();
        Jet2 {
            t: jet.t,
            x: jet.x[lo..hi].to_vec(),
            p: jet.p[lo..hi].to_vec(),
            q: jet.q[lo..hi].to_vec(),
        }
    }
}

impl<L: Lagrangian> Lagrangian for Uncoupled<L> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn domain(&self) -> Domain {
        self.parts[0].domain()
    }

    fn value_unchecked(&self, jet: &Jet2) -> Result<f64> {
        let mut total = 0.0;
        for b in 0..self.parts.len() {
            total += self.parts[b].value_unchecked(&self.block_jet(jet, b))?;
        }
        Ok(total)
    }

    fn partials_unchecked(&self, jet: &Jet2) -> Result<PartialsL> {
        let mut out = PartialsL::zeros(self.dim);
        for (b, part) in self.parts.iter().enumerate() {
            let offset = self.offsets[b];
            let local = part.partials_unchecked(&self.block_jet(jet, b))?;
            let lift = |s: Slot| match s.component() {
                None => s,
                Some(c) => s.with_component(offset + c),
            };
            out.value += local.value;
            let slots = Slot::all(part.dim());
            for &a in &slots {
                let ga = lift(a);
                out.set_grad(ga, out.grad(ga) + local.grad(a));
            }
            for (i, &a) in slots.iter().enumerate() {
                for &b in &slots[i..] {
                    let (ga, gb) = (lift(a), lift(b));
                    out.set_hess(ga, gb, out.hess(ga, gb) + local.hess(a, b));
                }
            }
        }
        Ok(out)
    }
}

/// Maximum discrepancy between analytic partials and finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct FdCheckReport {
    pub max_grad_discrepancy: f64,
    pub max_hess_discrepancy: f64,
    /// Slot (or slot pair) where the largest discrepancy occurred.
    pub worst: (Slot, Option<Slot>),
}

impl FdCheckReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.max_grad_discrepancy.max(self.max_hess_discrepancy)
    }
}

fn richardson_central<F>(f: F, step: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let d = |s: f64| -> Result<f64> { Ok((f(s)? - f(-s)?) / (2.0 * s)) };
    let coarse = d(step)?;
    let fine = d(0.5 * step)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Compares analytic partials against Richardson-extrapolated central differences.
///
/// First partials are differenced from `L` itself; second partials are differenced
/// from the analytic first partials, so each level is checked against the one below.
/// Evaluation failures at perturbed points are reported as an infinite discrepancy.
pub fn check_partials_fd<L: Lagrangian + ?Sized>(lag: &L, jet: &Jet2, step: f64) -> FdCheckReport {
    let mut report = FdCheckReport {
        max_grad_discrepancy: 0.0,
        max_hess_discrepancy: 0.0,
        worst: (Slot::T, None),
    };
    let analytic = match lag.partials_unchecked(jet) {
        Ok(p) => p,
        Err(_) => {
            report.max_grad_discrepancy = f64::INFINITY;
            return report;
        }
    };
    let dim = lag.dim();
    let slots = Slot::all(dim);
    let shifted = |slot: Slot, s: f64| {
        let mut j = jet.clone();
        *j.get_mut(slot) += s;
        j
    };
    for &a in &slots {
        let fd = richardson_central(|s| lag.value_unchecked(&shifted(a, s)), step);
        let err = fd.map_or(f64::INFINITY, |v| (v - analytic.grad(a)).abs());
        if err > report.max_grad_discrepancy || err.is_nan() {
            report.max_grad_discrepancy = if err.is_nan() { f64::INFINITY } else { err };
            report.worst = (a, None);
        }
        for &b in &slots {
            let fd = richardson_central(
                |s| lag.partials_unchecked(&shifted(a, s)).map(|p| p.grad(b)),
                step,
            );
            let err = fd.map_or(f64::INFINITY, |v| (v - analytic.hess(a, b)).abs());
            if err > report.max_hess_discrepancy || err.is_nan() {
                report.max_hess_discrepancy = if err.is_nan() { f64::INFINITY } else { err };
                if report.max_hess_discrepancy >= report.max_grad_discrepancy {
                    report.worst = (a, Some(b));
                }
            }
        }
    }
    report
}
