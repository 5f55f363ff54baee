//! Fourth-order Euler-Lagrange operator of a reduced bienergy, in two forms that
//! share no code: a residual along a smooth curve and the exact derivatives of the
//! discretized functional.

pub mod continuous;
pub mod discrete;

pub use continuous::{
    curve_consistency, default_fd_step, el_residual_along_curve, ConstantCurve, ExpandedOde,
    FourierCurve, SmoothCurve, StackedCurve,
};
pub use discrete::{
    discrete_energy, discrete_gradient, discrete_hessian, norm, BoundaryConditions, ClampedEnds,
    DiscreteFunction, DiscreteProblem, Grid,
};
