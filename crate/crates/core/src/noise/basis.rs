//! Orthonormal, discretely divergence-free velocity modes for the noise.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{GridSpec, VectorField2};
use crate::ops::{dirichlet_form, laplacian, leray_project_with, Bc, SolverKind, Solvers};

#[derive(Debug, Clone)]
pub struct ModeBasis {
    grid: GridSpec,
    modes: Vec<VectorField2>,
    alpha: Vec<f64>,
    q: f64,
}

impl ModeBasis {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[VectorField2] {
        &self.modes
    }

    pub fn mode(&self, n: usize) -> &VectorField2 {
        &self.modes[n]
    }

    /// Rayleigh quotients `<-lap e_n, e_n>`, ascending.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn spectrum_exponent(&self) -> f64 {
        self.q
    }

    /// Sets the exponent `q` in `lambda_n = (1 + alpha_n)^(-q)`.
    pub fn with_spectrum_exponent(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    pub fn lambda(&self, n: usize) -> f64 {
        (1.0 + self.alpha[n]).powf(-self.q)
    }

    pub fn lambdas(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.lambda(n)).collect()
    }

    /// `sum_n c_n e_n`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<VectorField2> {
        if coeffs.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        let mut out = VectorField2::zeros(self.grid);
        for (c, e) in coeffs.iter().zip(&self.modes) {
            if *c != 0.0 {
                out.axpy(*c, e);
            }
        }
        Ok(out)
    }

    /// `sum_n alpha_n c_n e_n`: the mode-space Stokes operator.
    pub fn stokes_apply(&self, coeffs: &[f64]) -> Result<VectorField2> {
        let scaled: Vec<f64> = coeffs.iter().zip(&self.alpha).map(|(c, a)| c * a).collect();
        self.reconstruct(&scaled)
    }

    /// Coefficients `<v, e_n>`.
    pub fn coefficients(&self, v: &VectorField2) -> Result<Vec<f64>> {
        self.grid_check(v)?;
        Ok(self.modes.iter().map(|e| e.inner(v)).collect())
    }

    fn grid_check(&self, v: &VectorField2) -> Result<()> {
        if *v.grid() != self.grid {
            Err(Error::GridMismatch)
        } else {
            Ok(())
        }
    }

    /// `sum_n lambda_n alpha_n^2`.
    pub fn trace_weighted(&self) -> f64 {
        (0..self.len()).map(|n| self.lambda(n) * self.alpha[n] * self.alpha[n]).sum()
    }
}

/// Sine-mode wavenumbers `(kx, ky)`, ordered by continuum eigenvalue.
fn wavenumbers(grid: &GridSpec, count: usize) -> Vec<(usize, usize)> {
    let kmax = grid.nx.min(grid.ny);
    let mut ks: Vec<(usize, usize)> = (1..=grid.nx)
        .flat_map(|a| (1..=grid.ny).map(move |b| (a, b)))
        .filter(|&(a, b)| a.max(b) <= kmax)
        .collect();
    let ev = |&(a, b): &(usize, usize)| {
        (a as f64 / grid.lx).powi(2) + (b as f64 / grid.ly).powi(2)
    };
    ks.sort_by(|p, q| ev(p).total_cmp(&ev(q)).then(p.cmp(q)));
    ks.truncate(count);
    ks
}

/// Builds `m` modes: projected vector sine modes, orthonormalized, then
/// rotated (Rayleigh-Ritz with the Dirichlet Laplacian) so that each mode
/// diagonalizes the Dirichlet form within the span, sorted by quotient.
pub fn build_mode_basis(grid: GridSpec, m: usize) -> Result<ModeBasis> {
    if m == 0 || m > grid.len() / 4 {
        return Err(Error::Precondition(format!(
            "mode count must be in 1..={} for a {}x{} grid (got {m})",
            grid.len() / 4,
            grid.nx,
            grid.ny
        )));
    }
    let solvers = Solvers::new(grid, SolverKind::Spectral);
    let mut pool_size = 3 * m + 6;
    loop {
        let ks = wavenumbers(&grid, pool_size.div_ceil(2));
        let exhausted = ks.len() < pool_size.div_ceil(2);
        let mut vecs: Vec<VectorField2> = Vec::new();
        for &(a, b) in &ks {
            let (fa, fb) = (
                std::f64::consts::PI * a as f64 / grid.lx,
                std::f64::consts::PI * b as f64 / grid.ly,
            );
            for c in 0..2 {
                let v = VectorField2::from_fn(grid, |x, y| {
                    let s = (fa * x).sin() * (fb * y).sin();
                    if c == 0 {
                        [s, 0.0]
                    } else {
                        [0.0, s]
                    }
                });
                let (p, _) = leray_project_with(&solvers, &v)?;
                vecs.push(p);
            }
        }
        let ortho = orthonormalize(vecs);
        if ortho.len() >= m {
            return Ok(ritz(grid, ortho, m));
        }
        if exhausted {
            return Err(Error::TooFewModes {
                requested: m,
                found: ortho.len(),
            });
        }
        pool_size *= 2;
    }
}

/// Modified Gram-Schmidt, two passes, dropping near-null vectors.
fn orthonormalize(vecs: Vec<VectorField2>) -> Vec<VectorField2> {
    let mut out: Vec<VectorField2> = Vec::new();
    for mut v in vecs {
        let n0 = v.norm_l2();
        if n0 < 1e-8 {
            continue;
        }
        for _ in 0..2 {
            for e in &out {
                let c = e.inner(&v);
                v.axpy(-c, e);
            }
        }
        let n = v.norm_l2();
        if n < 1e-8 * n0.max(1.0) || n < 1e-8 {
            continue;
        }
        out.push(v.scaled(1.0 / n));
    }
    out
}

fn ritz(grid: GridSpec, basis: Vec<VectorField2>, m: usize) -> ModeBasis {
    let p = basis.len();
    let lap: Vec<VectorField2> = basis.iter().map(|b| laplacian(b, Bc::Dirichlet)).collect();
    let mut k = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let val = -lap[i].inner(&basis[j]);
            k[(i, j)] = val;
            k[(j, i)] = val;
        }
    }
    let se = SymmetricEigen::new(k);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let mut modes = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    for &col in order.iter().take(m) {
        let mut e = VectorField2::zeros(grid);
        for (i, b) in basis.iter().enumerate() {
            e.axpy(se.eigenvectors[(i, col)], b);
        }
        // fix the sign so the largest-magnitude sample is positive
        let (mut best, mut sign) = (0.0, 1.0);
        for c in 0..2 {
            for &x in e.comp(c) {
                if x.abs() > best {
                    best = x.abs();
                    sign = x.signum();
                }
            }
        }
        let e = e.scaled(sign / e.norm_l2());
        alpha.push(dirichlet_form(&e, Bc::Dirichlet));
        modes.push(e);
    }
    ModeBasis {
        grid,
        modes,
        alpha,
        q: 3.0,
    }
}
