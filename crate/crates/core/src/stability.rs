//! Spectral classification of discrete critical points.

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::error::{BiharmError, Result};
use crate::euler_lagrange::{norm, BoundaryConditions, DiscreteFunction, DiscreteProblem, Grid};
use crate::lagrangian::{Geometry, GeometrySpec, Lagrangian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    StrictLocalMin,
    Degenerate,
    Unstable,
}

impl Classification {
    pub fn from_spectrum(lowest: f64, pos_tol: f64) -> Self {
        if lowest > pos_tol {
            Classification::StrictLocalMin
        } else if lowest >= -pos_tol {
            Classification::Degenerate
        } else {
            Classification::Unstable
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Classification::StrictLocalMin => "strict_local_min",
            Classification::Degenerate => "degenerate",
            Classification::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadFormCheck {
    pub label: String,
    pub discrete: f64,
    pub analytic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Up to ten smallest eigenvalues, ascending.
    pub eigen_low: Vec<f64>,
    pub classification: Classification,
    pub pos_tol: f64,
    pub quad_form_checks: Vec<QuadFormCheck>,
    /// Full spectrum, ascending.
    pub spectrum: Vec<f64>,
}

pub const MAX_DENSE: usize = 2048;
const LOW_COUNT: usize = 10;
/// Gradient norm above which a profile is not accepted as critical.
pub const CRITICAL_TOL: f64 = 1e-8;

/// Eigenvalues of the Hessian restricted to admissible variations (every node for
/// periodic grids, interior nodes for clamped ones), ascending.
pub fn restricted_spectrum<L: Lagrangian + ?Sized>(
    lag: &L,
    df: &DiscreteFunction,
) -> Result<Vec<f64>> {
    let problem = DiscreteProblem::new(lag, df.grid().clone())?;
    let hess = problem.hessian(df)?;
    sorted_eigenvalues(&hess.to_dense())
}

fn sorted_eigenvalues(m: &nalgebra::DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() > MAX_DENSE {
        return Err(BiharmError::InvalidParameter(format!(
            "{} unknowns exceed the dense eigensolver limit of {MAX_DENSE}",
            m.nrows()
        )));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| BiharmError::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(BiharmError::Eigen("non-finite eigenvalue".into()));
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Classifies a critical point by the spectrum of its restricted Hessian.
///
/// `pos_tol` defaults to `1e-8` times the largest Hessian diagonal entry. Inputs
/// whose gradient norm exceeds `1e-8` (or the rounding floor of the gradient, if
/// larger) are refused.
pub fn analyze_stability(
    geom: &GeometrySpec,
    critical: &DiscreteFunction,
    pos_tol: Option<f64>,
) -> Result<StabilityReport> {
    let problem = DiscreteProblem::new(geom, critical.grid().clone())?;
    let hess = problem.hessian(critical)?;
    let grad_norm = norm(&problem.gradient(critical)?);
    let tol = CRITICAL_TOL.max(problem.gradient_noise_floor(&hess, critical));
    if grad_norm > tol {
        return Err(BiharmError::NotCritical { grad_norm, tol });
    }
    let pos_tol = match pos_tol {
        Some(p) if !(p >= 0.0 && p.is_finite()) => {
            return Err(BiharmError::InvalidParameter(format!(
                "pos_tol must be non-negative, got {p}"
            )))
        }
        Some(p) => p,
        None => 1e-8 * hess.max_abs_diagonal(),
    };
    let spectrum = sorted_eigenvalues(&hess.to_dense())?;
    let lowest = spectrum.first().copied().ok_or_else(|| {
        BiharmError::InvalidParameter("no admissible variations on this grid".into())
    })?;

    let mut quad_form_checks = Vec::new();
    if critical.grid().is_periodic() && critical.dim() == 1 {
        let constant = constant_value(critical);
        let k = match geom.kind() {
            Geometry::TorusToSphere { k } => Some(*k),
            _ => None,
        };
        let grid = critical.grid();
        for mode in 0..=3u32 {
            let v = cos_mode(grid, mode);
            let analytic = match (k, constant) {
                (Some(k), Some(c)) => Some(torus_second_variation(k, c, mode)),
                _ => None,
            };
            quad_form_checks.push(QuadFormCheck {
                label: format!("cos({mode} t)"),
                discrete: problem.second_variation(critical, &v)?,
                analytic,
            });
        }
    }

    Ok(StabilityReport {
        eigen_low: spectrum.iter().take(LOW_COUNT).copied().collect(),
        classification: Classification::from_spectrum(lowest, pos_tol),
        pos_tol,
        quad_form_checks,
        spectrum,
    })
}

fn constant_value(df: &DiscreteFunction) -> Option<f64> {
    let first = df.values()[0];
    df.values().iter().all(|&v| v == first).then_some(first)
}

fn cos_mode(grid: &Grid, mode: u32) -> Vec<f64> {
    grid.nodes()
        .iter()
        .map(|t| (mode as f64 * t).cos())
        .collect()
}

/// Second variation of the torus functional at the constant profile `c` in the
/// direction `cos(n t)` over one period:
/// `pi (2 n^4 + 4 k^2 n^2 cos 2c + 2 k^4 cos 4c)` for `n >= 1`, twice the last term
/// for `n = 0`. At `c = pi/4` this is `2 pi (n^4 - k^4)`.
pub fn torus_second_variation(k: i64, c: f64, mode: u32) -> f64 {
    let k2 = (k * k) as f64;
    let tail = 2.0 * k2 * k2 * (4.0 * c).cos();
    if mode == 0 {
        return 2.0 * PI * tail;
    }
    let n2 = (mode as f64).powi(2);
    PI * (2.0 * n2 * n2 + 4.0 * k2 * n2 * (2.0 * c).cos() + tail)
}

/// Discrete quadratic form `V^T H V` at the constant profile `c` of the torus
/// problem, with `V = cos(mode t)` on an `n`-node periodic grid, next to its
/// continuum value. The form is evaluated without assembling `H`.
pub fn quad_form_at_constant(k: i64, c: f64, mode: u32, grid_n: usize) -> Result<(f64, f64)> {
    let geom = GeometrySpec::torus_to_sphere(k)?;
    let grid = Grid::new(0.0, 2.0 * PI, grid_n, BoundaryConditions::Periodic)?;
    let v = cos_mode(&grid, mode);
    let df = DiscreteFunction::constant(grid, c)?;
    let discrete = DiscreteProblem::new(&geom, df.grid().clone())?.second_variation(&df, &v)?;
    Ok((discrete, torus_second_variation(k, c, mode)))
}

/// [`quad_form_at_constant`] at `c = pi/4`.
pub fn quad_form_vs_analytic(k: i64, mode: u32, grid_n: usize) -> Result<(f64, f64)> {
    quad_form_at_constant(k, FRAC_PI_4, mode, grid_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus_constant(k: i64, c: f64, n: usize) -> (GeometrySpec, DiscreteFunction) {
        let g = GeometrySpec::torus_to_sphere(k).unwrap();
        let grid = Grid::new(0.0, 2.0 * PI, n, BoundaryConditions::Periodic).unwrap();
        (g, DiscreteFunction::constant(grid, c).unwrap())
    }

    #[test]
    fn constant_mode_is_exact() {
        // discrete Hessian of the constant mode is exactly the quadrature of L_xx
        let (d, a) = quad_form_vs_analytic(1, 0, 256).unwrap();
        assert!((d - a).abs() <= 1e-10, "{d} vs {a}");
        assert!((a + 4.0 * PI).abs() < 1e-12);
        let (d, a) = quad_form_at_constant(1, 0.0, 0, 64).unwrap();
        assert!((d - 4.0 * PI).abs() <= 1e-10 && (a - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn higher_modes_match_within_one_percent() {
        for (k, mode, n) in [(1, 2, 256), (1, 5, 256), (2, 3, 512)] {
            let (d, a) = quad_form_vs_analytic(k, mode, n).unwrap();
            assert!(((d - a) / a).abs() < 0.01, "k {k} mode {mode}: {d} vs {a}");
        }
        let (_, a) = quad_form_vs_analytic(2, 3, 512).unwrap();
        assert!((a - 2.0 * PI * 65.0).abs() < 1e-9);
    }

    #[test]
    fn quarter_pi_is_unstable() {
        let (g, df) = torus_constant(1, FRAC_PI_4, 256);
        let rep = analyze_stability(&g, &df, None).unwrap();
        assert_eq!(rep.classification, Classification::Unstable);
        let h = 2.0 * PI / 256.0;
        // exact value -2h; assembled entries of size 1e6 limit the agreement
        assert!((rep.eigen_low[0] + 2.0 * h).abs() < 1e-8);
        assert_eq!(rep.eigen_low.len(), 10);
        assert!(rep.eigen_low.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn mirror_solutions_share_a_spectrum() {
        let (g, a) = torus_constant(1, FRAC_PI_4, 64);
        let (_, b) = torus_constant(1, 3.0 * FRAC_PI_4, 64);
        let sa = restricted_spectrum(&g, &a).unwrap();
        let sb = restricted_spectrum(&g, &b).unwrap();
        let worst = sa
            .iter()
            .zip(&sb)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn clamped_cylinder_zero_is_strict_minimum() {
        let g = GeometrySpec::cylinder(1.0, -1.0, 1.0).unwrap();
        let grid = Grid::new(
            -1.0,
            1.0,
            64,
            BoundaryConditions::clamped(0.0, 0.0, 0.0, 0.0),
        )
        .unwrap();
        let df = DiscreteFunction::constant(grid, 0.0).unwrap();
        let rep = analyze_stability(&g, &df, None).unwrap();
        assert_eq!(rep.classification, Classification::StrictLocalMin);
        assert!(rep.quad_form_checks.is_empty());
        assert_eq!(rep.spectrum.len(), 62);
    }

    #[test]
    fn refuses_non_critical_input() {
        let (g, df) = torus_constant(1, 0.3, 64);
        assert!(matches!(
            analyze_stability(&g, &df, None),
            Err(BiharmError::NotCritical { .. })
        ));
    }

    #[test]
    fn classification_boundaries() {
        assert_eq!(
            Classification::from_spectrum(1.0, 0.5),
            Classification::StrictLocalMin
        );
        assert_eq!(
            Classification::from_spectrum(0.5, 0.5),
            Classification::Degenerate
        );
        assert_eq!(
            Classification::from_spectrum(-0.5, 0.5),
            Classification::Degenerate
        );
        assert_eq!(
            Classification::from_spectrum(-0.6, 0.5),
            Classification::Unstable
        );
    }
}
