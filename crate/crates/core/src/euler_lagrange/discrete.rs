//! Quadrature discretization of the reduced bienergy and its exact derivatives.
//!
//! At node `i` the jet uses central stencils
//! `p_i = (a_{i+1} - a_{i-1}) / 2h`, `q_i = (a_{i+1} - 2 a_i + a_{i-1}) / h^2`.
//! Clamped ends replace the missing neighbour by a ghost value built from the
//! prescribed slope and a one-sided second difference, so every jet is an affine
//! function of the node values and the gradient and Hessian follow by the chain rule.

use crate::banded::BandedMatrix;
use crate::error::{BiharmError, Result};
use crate::lagrangian::{Jet2, Lagrangian, PartialsL, Slot};

/// Value and slope prescribed at both ends, for one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampedEnds {
    pub value_a: f64,
    pub slope_a: f64,
    pub value_b: f64,
    pub slope_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryConditions {
    Periodic,
    /// One entry per component.
    Clamped(Vec<ClampedEnds>),
}

impl BoundaryConditions {
    /// Single-component clamped data.
    pub fn clamped(value_a: f64, slope_a: f64, value_b: f64, slope_b: f64) -> Self {
        BoundaryConditions::Clamped(vec![ClampedEnds {
            value_a,
            slope_a,
            value_b,
            slope_b,
        }])
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, BoundaryConditions::Periodic)
    }
}

/// Uniform grid on `[a, b]`.
///
/// Periodic grids have `n` distinct nodes with node `n` identified with node 0;
/// clamped grids include both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    n: usize,
    bc: BoundaryConditions,
}

pub const MIN_NODES: usize = 8;

impl Grid {
    pub fn new(a: f64, b: f64, n: usize, bc: BoundaryConditions) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(BiharmError::InvalidParameter(format!(
                "grid interval must satisfy a < b, got [{a}, {b}]"
            )));
        }
        if n < MIN_NODES {
            return Err(BiharmError::InvalidParameter(format!(
                "grid needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        if let BoundaryConditions::Clamped(ends) = &bc {
            if ends.is_empty() {
                return Err(BiharmError::InvalidParameter(
                    "clamped conditions need data for at least one component".into(),
                ));
            }
            let finite = ends.iter().all(|e| {
                [e.value_a, e.slope_a, e.value_b, e.slope_b]
                    .iter()
                    .all(|v| v.is_finite())
            });
            if !finite {
                return Err(BiharmError::NonFinite("boundary data".into()));
            }
        }
        Ok(Self { a, b, n, bc })
    }

    /// Grid covering the domain of `lag`; periodic domains get periodic conditions.
    pub fn for_domain<L: Lagrangian + ?Sized>(
        lag: &L,
        n: usize,
        bc: BoundaryConditions,
    ) -> Result<Self> {
        let d = lag.domain();
        let grid = Self::new(d.a, d.b, n, bc)?;
        grid.check_compatible(lag)?;
        Ok(grid)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bc(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn is_periodic(&self) -> bool {
        self.bc.is_periodic()
    }

    pub fn h(&self) -> f64 {
        if self.is_periodic() {
            (self.b - self.a) / self.n as f64
        } else {
            (self.b - self.a) / (self.n - 1) as f64
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.a + i as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Quadrature weight of node `i`: rectangle rule when periodic, trapezoid otherwise.
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.h();
        if !self.is_periodic() && (i == 0 || i == self.n - 1) {
            0.5 * h
        } else {
            h
        }
    }

    /// Number of nodes whose values are unknowns.
    pub fn free_nodes(&self) -> usize {
        if self.is_periodic() {
            self.n
        } else {
            self.n - 2
        }
    }

    /// Unknown index of node `i`, if it is free.
    pub fn free_index(&self, i: usize) -> Option<usize> {
        if self.is_periodic() {
            Some(i)
        } else if i == 0 || i == self.n - 1 {
            None
        } else {
            Some(i - 1)
        }
    }

    pub fn check_compatible<L: Lagrangian + ?Sized>(&self, lag: &L) -> Result<()> {
        let d = lag.domain();
        if d.periodic != self.is_periodic() {
            return Err(BiharmError::Incompatible(if d.periodic {
                "periodic geometry requires periodic boundary conditions".into()
            } else {
                "periodic boundary conditions need a periodic geometry".into()
            }));
        }
        let tol = 1e-12 * d.length().max(1.0);
        if d.periodic {
            if ((self.b - self.a) - d.length()).abs() > tol {
                return Err(BiharmError::Incompatible(format!(
                    "periodic grid length {} differs from the period {}",
                    self.b - self.a,
                    d.length()
                )));
            }
        } else if self.a < d.a - tol || self.b > d.b + tol {
            return Err(BiharmError::Incompatible(format!(
                "grid [{}, {}] leaves the domain [{}, {}]",
                self.a, self.b, d.a, d.b
            )));
        }
        if let BoundaryConditions::Clamped(ends) = &self.bc {
            if ends.len() != lag.dim() {
                return Err(BiharmError::Incompatible(format!(
                    "clamped data for {} components, Lagrangian has {}",
                    ends.len(),
                    lag.dim()
                )));
            }
        }
        Ok(())
    }
}

/// Grid samples of a (possibly vector-valued) profile, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl DiscreteFunction {
    /// For clamped grids the end values are overwritten by the boundary data.
    pub fn new(grid: Grid, dim: usize, mut values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != grid.n() * dim {
            return Err(BiharmError::Incompatible(format!(
                "{} samples for {} nodes with {dim} components",
                values.len(),
                grid.n()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BiharmError::NonFinite("profile samples".into()));
        }
        if let BoundaryConditions::Clamped(ends) = grid.bc() {
            if ends.len() != dim {
                return Err(BiharmError::Incompatible(format!(
                    "clamped data for {} components, profile has {dim}",
                    ends.len()
                )));
            }
            let last = grid.n() - 1;
            for (c, e) in ends.iter().enumerate() {
                values[c] = e.value_a;
                values[last * dim + c] = e.value_b;
            }
        }
        Ok(Self { grid, dim, values })
    }

    pub fn from_fn<F: Fn(f64) -> Vec<f64>>(grid: Grid, dim: usize, f: F) -> Result<Self> {
        let values = grid.nodes().into_iter().flat_map(f).collect();
        Self::new(grid, dim, values)
    }

    pub fn from_scalar_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Result<Self> {
        Self::from_fn(grid, 1, |t| vec![f(t)])
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::from_scalar_fn(grid, |_| value)
    }

    /// Straight line between the clamped end values.
    pub fn linear_interpolant(grid: Grid) -> Result<Self> {
        let ends = match grid.bc() {
            BoundaryConditions::Clamped(ends) => ends.clone(),
            BoundaryConditions::Periodic => {
                return Err(BiharmError::Incompatible(
                    "linear interpolant needs clamped boundary data".into(),
                ))
            }
        };
        let (a, b) = (grid.a(), grid.b());
        let dim = ends.len();
        Self::from_fn(grid, dim, |t| {
            let s = (t - a) / (b - a);
            ends.iter()
                .map(|e| e.value_a + s * (e.value_b - e.value_a))
                .collect()
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, node: usize, component: usize) -> f64 {
        self.values[node * self.dim + component]
    }

    /// Samples of one component.
    pub fn component(&self, c: usize) -> Vec<f64> {
        (0..self.grid.n()).map(|i| self.value(i, c)).collect()
    }

    /// Values at the free nodes, node-major.
    pub fn free_values(&self) -> Vec<f64> {
        (0..self.grid.n())
            .filter(|&i| self.grid.free_index(i).is_some())
            .flat_map(|i| (0..self.dim).map(move |c| (i, c)))
            .map(|(i, c)| self.value(i, c))
            .collect()
    }

    /// Copy with the free-node values replaced; fixed ends are untouched.
    pub fn with_free_values(&self, free: &[f64]) -> Result<Self> {
        if free.len() != self.grid.free_nodes() * self.dim {
            return Err(BiharmError::Incompatible(format!(
                "{} free values for {} unknowns",
                free.len(),
                self.grid.free_nodes() * self.dim
            )));
        }
        if free.iter().any(|v| !v.is_finite()) {
            return Err(BiharmError::NonFinite("free values".into()));
        }
        let mut values = self.values.clone();
        for i in 0..self.grid.n() {
            if let Some(f) = self.grid.free_index(i) {
                values[i * self.dim..(i + 1) * self.dim]
                    .copy_from_slice(&free[f * self.dim..(f + 1) * self.dim]);
            }
        }
        Ok(Self {
            grid: self.grid.clone(),
            dim: self.dim,
            values,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Affine map from node values to the jet at one node: per referenced node the
/// coefficients of `(x, p, q)`, plus slope-driven constants.
#[derive(Debug, Clone)]
struct NodeStencil {
    terms: Vec<(usize, [f64; 3])>,
    // (which end, p coefficient, q coefficient) multiplying the prescribed slope
    slope: Option<(End, f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
enum End {
    A,
    B,
}

fn push_term(terms: &mut Vec<(usize, [f64; 3])>, node: usize, coef: [f64; 3]) {
    match terms.iter_mut().find(|(j, _)| *j == node) {
        Some((_, c)) => {
            for k in 0..3 {
                c[k] += coef[k];
            }
        }
        None => terms.push((node, coef)),
    }
}

fn build_stencils(grid: &Grid) -> Vec<NodeStencil> {
    let n = grid.n();
    let h = grid.h();
    let (cp, cq) = (0.5 / h, 1.0 / (h * h));
    // ghost value as a combination of nodes adjacent to the end
    let ghost = |end: usize, inward: fn(usize, usize) -> usize| -> Vec<(usize, f64)> {
        vec![
            (end, 2.0),
            (inward(end, 1), -2.5),
            (inward(end, 2), 2.0),
            (inward(end, 3), -0.5),
        ]
    };
    (0..n)
        .map(|i| {
            let mut terms = Vec::with_capacity(6);
            push_term(&mut terms, i, [1.0, 0.0, -2.0 * cq]);
            let mut slope = None;
            let left: Vec<(usize, f64)> = if i > 0 {
                vec![(i - 1, 1.0)]
            } else if grid.is_periodic() {
                vec![(n - 1, 1.0)]
            } else {
                // ghost = 2a0 - 2.5a1 + 2a2 - 0.5a3 - h*slope_a
                slope = Some((End::A, cp * h, -cq * h));
                ghost(0, |e, k| e + k)
            };
            let right: Vec<(usize, f64)> = if i + 1 < n {
                vec![(i + 1, 1.0)]
            } else if grid.is_periodic() {
                vec![(0, 1.0)]
            } else {
                // ghost = 2a_{n-1} - 2.5a_{n-2} + 2a_{n-3} - 0.5a_{n-4} + h*slope_b
                slope = Some((End::B, cp * h, cq * h));
                ghost(n - 1, |e, k| e - k)
            };
            for (j, w) in left {
                push_term(&mut terms, j, [0.0, -cp * w, cq * w]);
            }
            for (j, w) in right {
                push_term(&mut terms, j, [0.0, cp * w, cq * w]);
            }
            NodeStencil { terms, slope }
        })
        .collect()
}

/// Quadrature-discretized bienergy of a Lagrangian on a fixed grid.
pub struct DiscreteProblem<'a, L: ?Sized> {
    lag: &'a L,
    grid: Grid,
    dim: usize,
    stencils: Vec<NodeStencil>,
}

impl<'a, L: Lagrangian + ?Sized> DiscreteProblem<'a, L> {
    pub fn new(lag: &'a L, grid: Grid) -> Result<Self> {
        grid.check_compatible(lag)?;
        let stencils = build_stencils(&grid);
        Ok(Self {
            lag,
            dim: lag.dim(),
            grid,
            stencils,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lagrangian(&self) -> &L {
        self.lag
    }

    pub fn unknowns(&self) -> usize {
        self.grid.free_nodes() * self.dim
    }

    fn check(&self, df: &DiscreteFunction) -> Result<()> {
        if df.grid() != &self.grid || df.dim() != self.dim {
            return Err(BiharmError::Incompatible(
                "profile grid or dimension differs from the problem's".into(),
            ));
        }
        Ok(())
    }

    fn slope(&self, end: End, c: usize) -> f64 {
        match (self.grid.bc(), end) {
            (BoundaryConditions::Clamped(e), End::A) => e[c].slope_a,
            (BoundaryConditions::Clamped(e), End::B) => e[c].slope_b,
            (BoundaryConditions::Periodic, _) => 0.0,
        }
    }

    /// Jet of `df` at node `i`.
    pub fn node_jet(&self, df: &DiscreteFunction, i: usize) -> Jet2 {
        let st = &self.stencils[i];
        let mut jet = Jet2 {
            t: self.grid.node(i),
            x: vec![0.0; self.dim],
            p: vec![0.0; self.dim],
            q: vec![0.0; self.dim],
        };
        for c in 0..self.dim {
            let (mut x, mut p, mut q) = (0.0, 0.0, 0.0);
            for &(j, [cx, cp, cq]) in &st.terms {
                let a = df.value(j, c);
                x += cx * a;
                p += cp * a;
                q += cq * a;
            }
            if let Some((end, sp, sq)) = st.slope {
                let s = self.slope(end, c);
                p += sp * s;
                q += sq * s;
            }
            jet.x[c] = x;
            jet.p[c] = p;
            jet.q[c] = q;
        }
        jet
    }

    fn node_partials(&self, df: &DiscreteFunction, i: usize) -> Result<PartialsL> {
        self.lag.partials(&self.node_jet(df, i))
    }

    pub fn energy(&self, df: &DiscreteFunction) -> Result<f64> {
        self.check(df)?;
        let mut total = 0.0;
        for i in 0..self.grid.n() {
            total += self.grid.weight(i) * self.lag.value(&self.node_jet(df, i))?;
        }
        Ok(total)
    }

    /// Gradient with respect to the free node values, node-major.
    pub fn gradient(&self, df: &DiscreteFunction) -> Result<Vec<f64>> {
        self.check(df)?;
        let d = self.dim;
        let mut grad = vec![0.0; self.unknowns()];
        for i in 0..self.grid.n() {
            let w = self.grid.weight(i);
            let pl = self.node_partials(df, i)?;
            for &(j, [cx, cp, cq]) in &self.stencils[i].terms {
                let Some(f) = self.grid.free_index(j) else {
                    continue;
                };
                for c in 0..d {
                    grad[f * d + c] += w
                        * (pl.grad(Slot::X(c)) * cx
                            + pl.grad(Slot::P(c)) * cp
                            + pl.grad(Slot::Q(c)) * cq);
                }
            }
        }
        Ok(grad)
    }

    /// Exact Hessian with respect to the free node values, mirrored so that it is
    /// symmetric bit for bit.
    pub fn hessian(&self, df: &DiscreteFunction) -> Result<BandedMatrix> {
        self.check(df)?;
        let d = self.dim;
        let mut hess = BandedMatrix::zeros(self.unknowns(), 3 * d - 1, self.grid.is_periodic())?;
        for i in 0..self.grid.n() {
            let w = self.grid.weight(i);
            let pl = self.node_partials(df, i)?;
            let terms: Vec<(usize, [f64; 3])> = self.stencils[i]
                .terms
                .iter()
                .filter_map(|&(j, c)| self.grid.free_index(j).map(|f| (f, c)))
                .collect();
            for (ta, &(fa, ca)) in terms.iter().enumerate() {
                for &(fb, cb) in &terms[ta..] {
                    for c in 0..d {
                        let c_start = if fa == fb { c } else { 0 };
                        for c2 in c_start..d {
                            let sa = [Slot::X(c), Slot::P(c), Slot::Q(c)];
                            let sb = [Slot::X(c2), Slot::P(c2), Slot::Q(c2)];
                            let mut v = 0.0;
                            for (ka, &a) in sa.iter().enumerate() {
                                for (kb, &b) in sb.iter().enumerate() {
                                    v += pl.hess(a, b) * ca[ka] * cb[kb];
                                }
                            }
                            let v = w * v;
                            let (r, s) = (fa * d + c, fb * d + c2);
                            hess.add(r, s, v);
                            if r != s {
                                hess.add(s, r, v);
                            }
                        }
                    }
                }
            }
        }
        Ok(hess)
    }

    /// `dir^T H dir` evaluated node by node from the jet variations, without
    /// assembling `H`. Avoids the cancellation between the large `O(h^-4)` entries
    /// of the assembled matrix.
    pub fn second_variation(&self, df: &DiscreteFunction, dir: &[f64]) -> Result<f64> {
        self.check(df)?;
        if dir.len() != self.unknowns() {
            return Err(BiharmError::Incompatible(format!(
                "direction has {} entries for {} unknowns",
                dir.len(),
                self.unknowns()
            )));
        }
        let d = self.dim;
        let mut total = 0.0;
        for i in 0..self.grid.n() {
            let pl = self.node_partials(df, i)?;
            let mut var = vec![0.0; 3 * d];
            for &(j, coefs) in &self.stencils[i].terms {
                let Some(f) = self.grid.free_index(j) else {
                    continue;
                };
                for c in 0..d {
                    for (k, cf) in coefs.iter().enumerate() {
                        var[3 * c + k] += cf * dir[f * d + c];
                    }
                }
            }
            let slots: Vec<(Slot, f64)> = (0..d)
                .flat_map(|c| {
                    [
                        (Slot::X(c), var[3 * c]),
                        (Slot::P(c), var[3 * c + 1]),
                        (Slot::Q(c), var[3 * c + 2]),
                    ]
                })
                .collect();
            let mut node = 0.0;
            for &(a, va) in &slots {
                for &(b, vb) in &slots {
                    node += pl.hess(a, b) * va * vb;
                }
            }
            total += self.grid.weight(i) * node;
        }
        Ok(total)
    }

    /// Scale of rounding noise in the gradient at `df`: machine epsilon times the
    /// largest absolute Hessian row sum, the profile size and sqrt(unknowns).
    pub fn gradient_noise_floor(&self, hess: &BandedMatrix, df: &DiscreteFunction) -> f64 {
        4.0 * f64::EPSILON
            * hess.max_abs_row_sum()
            * df.max_abs().max(1.0)
            * (self.unknowns() as f64).sqrt()
    }
}

pub fn discrete_energy<L: Lagrangian + ?Sized>(lag: &L, df: &DiscreteFunction) -> Result<f64> {
    DiscreteProblem::new(lag, df.grid().clone())?.energy(df)
}

pub fn discrete_gradient<L: Lagrangian + ?Sized>(
    lag: &L,
    df: &DiscreteFunction,
) -> Result<Vec<f64>> {
    DiscreteProblem::new(lag, df.grid().clone())?.gradient(df)
}

pub fn discrete_hessian<L: Lagrangian + ?Sized>(
    lag: &L,
    df: &DiscreteFunction,
) -> Result<BandedMatrix> {
    DiscreteProblem::new(lag, df.grid().clone())?.hessian(df)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::GeometrySpec;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn torus_grid(n: usize) -> Grid {
        Grid::new(0.0, 2.0 * PI, n, BoundaryConditions::Periodic).unwrap()
    }

    #[test]
    fn torus_constant_energies() {
        let g = GeometrySpec::torus_to_sphere(1).unwrap();
        let df = DiscreteFunction::constant(torus_grid(256), FRAC_PI_4).unwrap();
        assert!((discrete_energy(&g, &df).unwrap() - PI / 2.0).abs() <= 1e-10);
        assert!(norm(&discrete_gradient(&g, &df).unwrap()) <= 1e-12);

        let zero = DiscreteFunction::constant(torus_grid(256), 0.0).unwrap();
        assert_eq!(discrete_energy(&g, &zero).unwrap(), 0.0);
        assert_eq!(norm(&discrete_gradient(&g, &zero).unwrap()), 0.0);
    }

    #[test]
    fn ghost_nodes_are_exact_for_quadratics() {
        // alpha = t^2 + 3t - 1 on [0, 1], data consistent with the quadratic
        let bc = BoundaryConditions::clamped(-1.0, 3.0, 3.0, 5.0);
        let grid = Grid::new(0.0, 1.0, 11, bc).unwrap();
        let g = GeometrySpec::cylinder(1.0, 0.0, 1.0).unwrap();
        let df = DiscreteFunction::from_scalar_fn(grid.clone(), |t| t * t + 3.0 * t - 1.0).unwrap();
        let prob = DiscreteProblem::new(&g, grid.clone()).unwrap();
        for i in [0, 1, 5, 9, 10] {
            let jet = prob.node_jet(&df, i);
            let t = grid.node(i);
            assert!((jet.p[0] - (2.0 * t + 3.0)).abs() < 1e-12, "p at node {i}");
            assert!((jet.q[0] - 2.0).abs() < 1e-10, "q at node {i}");
        }
    }

    #[test]
    fn clamped_ends_are_pinned() {
        let bc = BoundaryConditions::clamped(1.0, 2.0, 5.0, 0.0);
        let grid = Grid::new(0.0, 1.0, 9, bc).unwrap();
        let df = DiscreteFunction::constant(grid, 0.0).unwrap();
        assert_eq!(df.value(0, 0), 1.0);
        assert_eq!(df.value(8, 0), 5.0);
        assert_eq!(df.free_values().len(), 7);
    }

    #[test]
    fn cylinder_hessian_independent_of_profile() {
        let g = GeometrySpec::cylinder(2.0, 0.0, 1.0).unwrap();
        let bc = BoundaryConditions::clamped(0.3, -1.0, 0.7, 2.0);
        let grid = Grid::new(0.0, 1.0, 20, bc).unwrap();
        let a = DiscreteFunction::from_scalar_fn(grid.clone(), |t| (3.0 * t).sin()).unwrap();
        let b = DiscreteFunction::from_scalar_fn(grid, |t| t.exp() - 4.0 * t).unwrap();
        let ha = discrete_hessian(&g, &a).unwrap();
        let hb = discrete_hessian(&g, &b).unwrap();
        assert_eq!(ha, hb);
        assert!(ha.is_symmetric());
    }

    #[test]
    fn incompatible_inputs_rejected() {
        let torus = GeometrySpec::torus_to_sphere(1).unwrap();
        let bc = BoundaryConditions::clamped(0.0, 0.0, 0.0, 0.0);
        let grid = Grid::new(0.0, 2.0 * PI, 16, bc).unwrap();
        let df = DiscreteFunction::constant(grid, 0.0).unwrap();
        assert!(matches!(
            discrete_energy(&torus, &df),
            Err(BiharmError::Incompatible(_))
        ));

        let cyl = GeometrySpec::cylinder(1.0, 0.0, 1.0).unwrap();
        let periodic = DiscreteFunction::constant(
            Grid::new(0.0, 1.0, 16, BoundaryConditions::Periodic).unwrap(),
            0.0,
        )
        .unwrap();
        assert!(discrete_gradient(&cyl, &periodic).is_err());
        assert!(Grid::new(0.0, 1.0, 4, BoundaryConditions::Periodic).is_err());
        assert!(DiscreteFunction::new(torus_grid(16), 1, vec![0.0; 15]).is_err());
    }

    #[test]
    fn linear_interpolant_hits_both_ends() {
        let bc = BoundaryConditions::clamped(1.0, 2.0, 3.0, 4.0);
        let grid = Grid::new(0.0, 2.0, 9, bc).unwrap();
        let df = DiscreteFunction::linear_interpolant(grid).unwrap();
        assert_eq!(df.value(0, 0), 1.0);
        assert_eq!(df.value(8, 0), 3.0);
        assert!((df.value(4, 0) - 2.0).abs() < 1e-15);
    }
}
