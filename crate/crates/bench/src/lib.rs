//! Shared fixtures for the solver benchmarks.

use nalgebra::DVector;

use fredholm_core::nonlinear::{NonlinearSpec, PowerTerm};
use fredholm_core::steklov::{
    assemble_forms, build_rank_one_functional, Coef, Density, Mesh1D, PositivityMode,
    SteklovCoefficients,
};
use fredholm_core::FormTriple;

pub fn steklov_triple(n_elems: usize) -> (FormTriple, Mesh1D, SteklovCoefficients) {
    let coeffs = SteklovCoefficients::constant(1.0, 1.0, 1.0, [0.0, 0.0], [1.0, 1.0]);
    let mesh = Mesh1D::uniform(n_elems, [0.0, 1.0]).unwrap();
    let triple = assemble_forms(&mesh, &coeffs).unwrap();
    (triple, mesh, coeffs)
}

pub fn constant_load(mesh: &Mesh1D) -> DVector<f64> {
    build_rank_one_functional(
        mesh,
        &Density::Interior(Coef::Const(1.0)),
        PositivityMode::Strict,
    )
    .unwrap()
}

pub fn affine_power_spec(mesh: &Mesh1D) -> NonlinearSpec {
    let ell = constant_load(mesh);
    NonlinearSpec {
        affine: Some(ell.clone()),
        power_terms: vec![PowerTerm::new(1.0, ell, 3.0).unwrap()],
        nemytskii: None,
    }
}
