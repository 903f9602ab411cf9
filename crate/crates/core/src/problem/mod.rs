//! Problem data, the space-time grid and the ε-regularized initial data.

mod calculus;
mod coefficients;
mod domain;
mod regularize;
mod spec;
mod trajectory;

pub use calculus::{boundary_normal_derivative, quadrature, simpson_weights, trapezoid, trapezoid_weights};
pub use coefficients::{CoefficientSpec, KernelSpec, Profile};
pub use domain::{Grid, IntervalDomain, Side};
pub use regularize::{corrector_width, regularize_family, regularize_initial, RegularizedDatum};
pub use spec::{
    compatibility_residual, nonlocal_flux, pos_pow, validate_problem, GridSpec, ProblemSpec,
    SampledCoefficients, ValidatedProblem, Violation, ViolationKind, COMPATIBILITY_TOL,
    NONNEGATIVITY_SLACK,
};
pub use trajectory::Trajectory;
