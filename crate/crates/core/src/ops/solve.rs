//! Linear solvers for the Poisson, Helmholtz and pressure-projection systems.
//!
//! The reference path is Jacobi-preconditioned conjugate gradients. Every
//! operator here is a sum of two one-dimensional symmetric operators, so a
//! separable eigen-transform solver gives the same solutions to round-off;
//! the time stepper uses it by default.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::GridSpec;
use crate::ops::stencil::{dx, dy, lap_into, Bc};

/// Relative residual target for every iterative solve.
pub const SOLVER_REL_TOL: f64 = 1e-10;

/// Tighter target used by the projection so that applying it twice agrees
/// to ~1e-12.
pub const PROJECTION_REL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Separable eigen-transform solver (exact up to round-off).
    #[default]
    Spectral,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

/// Which discrete elliptic operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    /// Compact five-point Laplacian with the given ghosts.
    Laplacian(Bc),
    /// `div o grad` with centred differences: Neumann gradient followed by
    /// the no-slip divergence. Its kernel is the constants.
    Projection,
}

impl Operator {
    fn singular(self) -> bool {
        !matches!(self, Operator::Laplacian(Bc::Dirichlet))
    }

    /// `out = -L f` (so the stored operator is positive semidefinite).
    fn apply_neg(self, f: &[f64], g: &GridSpec, out: &mut [f64]) {
        match self {
            Operator::Laplacian(bc) => {
                lap_into(f, g, bc.parity(), out);
                out.iter_mut().for_each(|x| *x = -*x);
            }
            Operator::Projection => {
                let gx = dx(f, g, 1.0);
                let gy = dy(f, g, 1.0);
                let a = dx(&gx, g, -1.0);
                let b = dy(&gy, g, -1.0);
                for k in 0..out.len() {
                    out[k] = -(a[k] + b[k]);
                }
            }
        }
    }

    /// Dense 1D factor of `-L` along an axis with `n` cells of width `h`.
    fn matrix_1d(self, n: usize, h: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for col in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[col] = 1.0;
            let out = match self {
                Operator::Laplacian(bc) => lap_1d(&e, h, bc.parity()),
                Operator::Projection => d_1d(&d_1d(&e, h, 1.0), h, -1.0),
            };
            for row in 0..n {
                m[(row, col)] = -out[row];
            }
        }
        m
    }
}

fn d_1d(f: &[f64], h: f64, p: f64) -> Vec<f64> {
    let n = f.len();
    let s = 0.5 / h;
    (0..n)
        .map(|i| {
            let l = if i == 0 { p * f[0] } else { f[i - 1] };
            let r = if i == n - 1 { p * f[n - 1] } else { f[i + 1] };
            (r - l) * s
        })
        .collect()
}

fn lap_1d(f: &[f64], h: f64, p: f64) -> Vec<f64> {
    let n = f.len();
    let c = 1.0 / (h * h);
    (0..n)
        .map(|i| {
            let l = if i == 0 { p * f[0] } else { f[i - 1] };
            let r = if i == n - 1 { p * f[n - 1] } else { f[i + 1] };
            (l + r - 2.0 * f[i]) * c
        })
        .collect()
}

struct Axis {
    n: usize,
    /// eigenvalues of the 1D factor of `-L`
    eig: Vec<f64>,
    /// column-major eigenvectors (`q[i + n*k]` = component i of vector k)
    q: Vec<f64>,
    diag: Vec<f64>,
}

impl Axis {
    fn new(op: Operator, n: usize, h: f64) -> Self {
        let m = op.matrix_1d(n, h);
        let diag = (0..n).map(|i| m[(i, i)]).collect();
        let se = SymmetricEigen::new(m);
        Axis {
            n,
            eig: se.eigenvalues.iter().copied().collect(),
            q: se.eigenvectors.as_slice().to_vec(),
            diag,
        }
    }
}

/// Exact solver for `(a I - c L) x = b` with `L` separable.
struct Separable {
    x: Axis,
    y: Axis,
}

impl Separable {
    fn new(op: Operator, g: &GridSpec) -> Self {
        Separable {
            x: Axis::new(op, g.nx, g.hx()),
            y: Axis::new(op, g.ny, g.hy()),
        }
    }

    fn solve(&self, b: &[f64], a: f64, c: f64) -> Vec<f64> {
        let (nx, ny) = (self.x.n, self.y.n);
        let mut data = b.to_vec();
        self.forward(&mut data);
        let scale = self.x.eig.iter().chain(&self.y.eig).fold(0.0_f64, |m, e| m.max(e.abs()));
        for m in 0..ny {
            for k in 0..nx {
                let lam = self.x.eig[k] + self.y.eig[m];
                let den = a + c * lam;
                let idx = m * nx + k;
                if a == 0.0 && lam.abs() <= 1e-10 * scale {
                    data[idx] = 0.0;
                } else {
                    data[idx] /= den;
                }
            }
        }
        self.inverse(&mut data);
        data
    }

    fn forward(&self, data: &mut [f64]) {
        self.apply(data, false);
    }

    fn inverse(&self, data: &mut [f64]) {
        self.apply(data, true);
    }

    /// Forward: `hat[m, k] = sum_{j,i} Qy[j, m] Qx[i, k] f[j, i]`.
    /// Inverse: `f[j, i] = sum_{m,k} Qy[j, m] Qx[i, k] hat[m, k]`.
    fn apply(&self, data: &mut [f64], inverse: bool) {
        let (nx, ny) = (self.x.n, self.y.n);
        let qx = &self.x.q;
        let qy = &self.y.q;
        let mut tmp = vec![0.0; nx * ny];
        for j in 0..ny {
            let row = &data[j * nx..(j + 1) * nx];
            let o = &mut tmp[j * nx..(j + 1) * nx];
            for (out_idx, oi) in o.iter_mut().enumerate() {
                let mut s = 0.0;
                for (in_idx, r) in row.iter().enumerate() {
                    // forward: Qx[in=i, out=k]; inverse: Qx[out=i, in=k]
                    let q = if inverse {
                        qx[out_idx + nx * in_idx]
                    } else {
                        qx[in_idx + nx * out_idx]
                    };
                    s += q * r;
                }
                *oi = s;
            }
        }
        data.iter_mut().for_each(|x| *x = 0.0);
        for out_row in 0..ny {
            let dst_start = out_row * nx;
            for in_row in 0..ny {
                let w = if inverse {
                    qy[out_row + ny * in_row]
                } else {
                    qy[in_row + ny * out_row]
                };
                let src = &tmp[in_row * nx..(in_row + 1) * nx];
                for (d, s) in data[dst_start..dst_start + nx].iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
}

/// Preconditioned CG on `(a I - c L) x = b`. Singular operators (`a == 0`,
/// Neumann-type `L`) are solved in the zero-mean subspace.
fn pcg(
    op: Operator,
    g: &GridSpec,
    diag: &[f64],
    b: &[f64],
    a: f64,
    c: f64,
    rel_tol: f64,
) -> Result<Vec<f64>> {
    let n = b.len();
    let singular = a == 0.0 && op.singular();
    let mut rhs = b.to_vec();
    if singular {
        let m = rhs.iter().sum::<f64>() / n as f64;
        rhs.iter_mut().for_each(|x| *x -= m);
    }
    let bnorm = norm(&rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let apply = |p: &[f64], out: &mut [f64]| {
        op.apply_neg(p, g, out);
        for k in 0..out.len() {
            out[k] = a * p[k] + c * out[k];
        }
    };
    let max_iter = 10 * n;
    let mut r = rhs;
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    if singular {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    for it in 0..max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        rel = norm(&r) / bnorm;
        if rel <= rel_tol {
            if singular {
                remove_mean(&mut x);
            }
            let _ = it;
            return Ok(x);
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        if singular {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NoConvergence {
        solver: "conjugate gradients",
        iterations: max_iter,
        residual: rel,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn remove_mean(a: &mut [f64]) {
    let m = a.iter().sum::<f64>() / a.len() as f64;
    a.iter_mut().for_each(|x| *x -= m);
}

/// Per-grid solver set: Neumann and Dirichlet Laplacians and the projection
/// operator, each with a separable factorization and CG diagonals.
pub struct Solvers {
    grid: GridSpec,
    kind: SolverKind,
    neumann: Separable,
    dirichlet: Separable,
    projection: Separable,
}

impl Solvers {
    pub fn new(grid: GridSpec, kind: SolverKind) -> Self {
        Solvers {
            grid,
            kind,
            neumann: Separable::new(Operator::Laplacian(Bc::Neumann), &grid),
            dirichlet: Separable::new(Operator::Laplacian(Bc::Dirichlet), &grid),
            projection: Separable::new(Operator::Projection, &grid),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    fn pick(&self, op: Operator) -> &Separable {
        match op {
            Operator::Laplacian(Bc::Neumann) => &self.neumann,
            Operator::Laplacian(Bc::Dirichlet) => &self.dirichlet,
            Operator::Projection => &self.projection,
        }
    }

    /// Solves `(a I - c L) x = b`. For singular systems (`a == 0` with a
    /// Neumann-type `L`) the mean of `b` is discarded and `x` has zero mean.
    pub fn solve(&self, op: Operator, b: &[f64], a: f64, c: f64, rel_tol: f64) -> Result<Vec<f64>> {
        debug_assert_eq!(b.len(), self.grid.len());
        let sep = self.pick(op);
        match self.kind {
            SolverKind::Spectral => Ok(sep.solve(b, a, c)),
            SolverKind::Cg => {
                let diag: Vec<f64> = (0..self.grid.ny)
                    .flat_map(|j| {
                        (0..self.grid.nx).map(move |i| a + c * (sep.x.diag[i] + sep.y.diag[j]))
                    })
                    .collect();
                pcg(op, &self.grid, &diag, b, a, c, rel_tol)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_and_cg_agree() {
        let g = GridSpec::new(12, 10, 1.0, 0.7).unwrap();
        let b: Vec<f64> = (0..g.len()).map(|k| ((k * 37 % 17) as f64 - 8.0) / 3.0).collect();
        let spec = Solvers::new(g, SolverKind::Spectral);
        let cg = Solvers::new(g, SolverKind::Cg);
        for op in [
            Operator::Laplacian(Bc::Dirichlet),
            Operator::Laplacian(Bc::Neumann),
            Operator::Projection,
        ] {
            for (a, c) in [(0.0, 1.0), (1.0, 0.01)] {
                let x1 = spec.solve(op, &b, a, c, 1e-13).unwrap();
                let x2 = cg.solve(op, &b, a, c, 1e-13).unwrap();
                let err = x1.iter().zip(&x2).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                let scale = x1.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                assert!(err <= 1e-9 * scale, "{op:?} a={a}: {err} vs {scale}");
            }
        }
    }

    #[test]
    fn operator_matrices_are_symmetric() {
        for op in [
            Operator::Laplacian(Bc::Dirichlet),
            Operator::Laplacian(Bc::Neumann),
            Operator::Projection,
        ] {
            let m = op.matrix_1d(9, 0.1);
            assert!((&m - m.transpose()).amax() < 1e-12);
        }
    }
}
