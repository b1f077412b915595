//! Finite-difference operators, elastic coupling terms and the elliptic
//! solves built on them.

pub mod elastic;
pub mod solve;
pub mod stencil;

pub use elastic::{
    chemical_potential, elastic_force, elastic_force_balanced, elastic_stress, TensorField22,
};
pub use solve::{Operator, SolverKind, Solvers, PROJECTION_REL_TOL, SOLVER_REL_TOL};
pub use stencil::{
    advect, dirichlet_form, divergence, divergence_with, gradient, gradient_with, laplacian,
    transport_adjoint, Bc,
};

use crate::error::Result;
use crate::model::{Field, ScalarField, VectorField2};

/// Solves `lap phi = rhs` with the five-point Laplacian and the given ghosts
/// by preconditioned conjugate gradients. Neumann problems have the mean of
/// `rhs` removed and return the zero-mean solution.
pub fn poisson_solve(rhs: &ScalarField, bc: Bc) -> Result<ScalarField> {
    let s = Solvers::new(*rhs.grid(), SolverKind::Cg);
    poisson_solve_with(&s, rhs, bc)
}

pub fn poisson_solve_with(s: &Solvers, rhs: &ScalarField, bc: Bc) -> Result<ScalarField> {
    let neg: Vec<f64> = rhs.values().iter().map(|x| -x).collect();
    let phi = s.solve(Operator::Laplacian(bc), &neg, 0.0, 1.0, SOLVER_REL_TOL)?;
    Ok(Field::from_parts(*rhs.grid(), [phi]))
}

/// Discrete Leray projection: returns `(v - grad phi, phi)` with `phi` the
/// zero-mean solution of `div grad phi = div v`, using the same centred
/// gradient and divergence as everywhere else. The output is discretely
/// divergence-free and the map is an orthogonal projection.
pub fn leray_project(v: &VectorField2) -> Result<(VectorField2, ScalarField)> {
    let s = Solvers::new(*v.grid(), SolverKind::Cg);
    leray_project_with(&s, v)
}

pub fn leray_project_with(s: &Solvers, v: &VectorField2) -> Result<(VectorField2, ScalarField)> {
    let g = *v.grid();
    let div = divergence(v);
    let scale = v.max_abs() / g.hx().min(g.hy());
    if div.max_abs() <= 1e-15 * scale || scale == 0.0 {
        return Ok((v.clone(), ScalarField::zeros(g)));
    }
    let rhs: Vec<f64> = div.values().iter().map(|x| -x).collect();
    let phi = s.solve(Operator::Projection, &rhs, 0.0, 1.0, PROJECTION_REL_TOL)?;
    let phi = Field::from_parts(g, [phi]);
    let mut out = v.clone();
    out.axpy(-1.0, &gradient(&phi));
    Ok((out, phi))
}
