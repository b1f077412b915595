//! Elastic stress `grad d (.) grad d` and the forces it exerts on the flow.

use crate::error::Result;
use crate::model::{Field, GridSpec, VectorField2, VectorField3};
use crate::ops::stencil::{dx, dy, laplacian, transport_adjoint, Bc};
use crate::potential::PotentialCoeffs;

/// Pointwise 2x2 tensor samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField22 {
    grid: GridSpec,
    pub s11: Vec<f64>,
    pub s12: Vec<f64>,
    pub s21: Vec<f64>,
    pub s22: Vec<f64>,
}

impl TensorField22 {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn at(&self, k: usize) -> [[f64; 2]; 2] {
        [[self.s11[k], self.s12[k]], [self.s21[k], self.s22[k]]]
    }

    pub fn max_abs(&self) -> f64 {
        [&self.s11, &self.s12, &self.s21, &self.s22]
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// `sigma_ij = sum_k d_i d^k d_j d^k` from centred Neumann gradients.
pub fn elastic_stress(d: &VectorField3) -> TensorField22 {
    let g = *d.grid();
    let n = g.len();
    let mut s = TensorField22 {
        grid: g,
        s11: vec![0.0; n],
        s12: vec![0.0; n],
        s21: vec![0.0; n],
        s22: vec![0.0; n],
    };
    for c in 0..3 {
        let gx = dx(d.comp(c), &g, 1.0);
        let gy = dy(d.comp(c), &g, 1.0);
        for k in 0..n {
            s.s11[k] += gx[k] * gx[k];
            s.s12[k] += gx[k] * gy[k];
            s.s22[k] += gy[k] * gy[k];
        }
    }
    s.s21.clone_from(&s.s12);
    s
}

/// Row-wise divergence `(div sigma)_j = d_1 sigma_1j + d_2 sigma_2j`.
///
/// Ghost parities follow the reflection symmetry of each entry under a
/// Neumann `d`: diagonal entries are even across their own walls, the
/// off-diagonal ones odd.
pub fn elastic_force(d: &VectorField3) -> VectorField2 {
    let s = elastic_stress(d);
    let g = *d.grid();
    let a = dx(&s.s11, &g, 1.0);
    let b = dy(&s.s21, &g, -1.0);
    let c = dx(&s.s12, &g, -1.0);
    let e = dy(&s.s22, &g, 1.0);
    let fx = a.iter().zip(&b).map(|(p, q)| p + q).collect();
    let fy = c.iter().zip(&e).map(|(p, q)| p + q).collect();
    Field::from_parts(g, [fx, fy])
}

/// Chemical potential `lap d - f(d)` (Neumann Laplacian).
pub fn chemical_potential(d: &VectorField3, pot: &PotentialCoeffs) -> VectorField3 {
    let mut w = laplacian(d, Bc::Neumann);
    w.axpy(-1.0, &pot.f_field(d));
    w
}

/// Elastic body force in the energy-consistent form used by the time
/// stepper: `-A_d*(lap d - f(d))`, where `A_d*` is the adjoint of the
/// transport `v -> advect(v, d)`.
///
/// In the continuum this equals `-div(grad d (.) grad d)` up to a gradient,
/// so after Leray projection it is the same force; discretely it makes the
/// work done on the flow cancel the transport term of the orientation
/// equation exactly.
pub fn elastic_force_balanced(d: &VectorField3, pot: &PotentialCoeffs) -> Result<VectorField2> {
    let w = chemical_potential(d, pot);
    Ok(transport_adjoint(d, &w, Bc::Neumann)?.scaled(-1.0))
}
