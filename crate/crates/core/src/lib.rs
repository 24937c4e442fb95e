//! Canonical spectral data for two-parameter eigenproblems of symmetric
//! bilinear-form triples (a, b, m) on finite Galerkin spaces, and solvers for
//! the associated linear and nonlinear Fredholm equations, instantiated on
//! 1D Steklov-Robin boundary-value problems.
//!
//! The pipeline: [`forms`] validates a triple and builds coercive shifted
//! forms, [`spectrum`] produces tau-independent eigenvalues with canonical
//! m-orthonormal eigenvectors, [`linear`] and [`nonlinear`] solve the
//! Fredholm equations off and on the spectrum, and [`steklov`] assembles the
//! whole setup from a 1D boundary-value problem.

pub mod error;
pub mod forms;
pub mod io;
pub mod linear;
pub mod nonlinear;
pub mod spectrum;
pub mod steklov;
pub mod verify;

pub use error::{Error, Result};
pub use forms::{
    find_coercive_shift, shifted_form, validate_triple, BasisMeta, FormTriple, ShiftedForm,
    ValidationReport,
};
pub use linear::{
    bound_below_first, bound_between, solvability_check, solve_nonresonant, solve_resonant,
    BoundReport, LinearProblem, LinearSolution, SolveMode,
};
pub use nonlinear::{
    find_bifurcation_point, injectivity_check, lambda_operator, newton_solve_nonresonant,
    newton_solve_resonant, picard_solve, residual, BranchInfo, BranchPoint, NonlinearSolution,
    NonlinearSpec, PowerTerm, SolveMethod,
};
pub use spectrum::{
    canonical_data, canonical_data_with_shift, resonance_group, solve_shifted_eigen,
    trace_eigencurves, verify_tau_invariance, EigencurveTable, InvarianceReport, ResonanceGroup,
    SpectralData,
};
pub use steklov::{
    assemble_forms, build_power_nonlinearity, build_rank_one_functional, check_compatibility,
    eigencurve_oracle_1d, functional_value, nemytskii_apply, nemytskii_derivative_check, Coef,
    Density, Mesh1D, NemytskiiFn, PositivityMode, SteklovCoefficients,
};
