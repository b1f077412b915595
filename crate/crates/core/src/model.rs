//! Parameters, grid geometry and the sampled field containers shared by every
//! other module.
//!
//! Samples live on cell centres of a uniform `nx x ny` grid over the
//! rectangle `(0, lx) x (0, ly)`, stored row-major (`idx = j * nx + i`, with
//! `i` running along x). Vector fields keep one contiguous array per
//! component.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::potential::PotentialCoeffs;

/// Smallest admissible cell count per direction.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        let grid = GridSpec { nx, ny, lx, ly };
        let problems = grid.problems();
        if problems.is_empty() {
            Ok(grid)
        } else {
            Err(Error::InvalidParams(problems))
        }
    }

    /// `n x n` cells on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.nx < MIN_CELLS || self.ny < MIN_CELLS {
            out.push(format!(
                "grid dims must be >= {MIN_CELLS} in each direction (got {}x{})",
                self.nx, self.ny
            ));
        }
        if !(self.lx > 0.0 && self.lx.is_finite() && self.ly > 0.0 && self.ly.is_finite()) {
            out.push(format!(
                "domain edge lengths must be positive (got {} x {})",
                self.lx, self.ly
            ));
        }
        out
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell-centre x coordinate of column `i`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy()
    }

    /// True when `(i, j)` has no boundary face.
    #[inline]
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.nx && j + 1 < self.ny
    }
}

/// Cell-centred samples with `N` components.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<const N: usize> {
    grid: GridSpec,
    comps: [Vec<f64>; N],
}

pub type ScalarField = Field<1>;
pub type VectorField2 = Field<2>;
pub type VectorField3 = Field<3>;

impl<const N: usize> Field<N> {
    pub fn zeros(grid: GridSpec) -> Self {
        Field {
            grid,
            comps: std::array::from_fn(|_| vec![0.0; grid.len()]),
        }
    }

    /// Builds a field from per-component sample arrays. Rejects wrong lengths
    /// and non-finite samples.
    pub fn from_components(grid: GridSpec, comps: [Vec<f64>; N]) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::LengthMismatch {
                    expected: grid.len(),
                    got: c.len(),
                });
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("field constructor"));
            }
        }
        Ok(Field { grid, comps })
    }

    /// Internal constructor for operator outputs; lengths are correct by
    /// construction.
    pub(crate) fn from_parts(grid: GridSpec, comps: [Vec<f64>; N]) -> Self {
        debug_assert!(comps.iter().all(|c| c.len() == grid.len()));
        Field { grid, comps }
    }

    /// Samples `f(x, y)` at every cell centre.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> [f64; N]) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.idx(i, j);
                let val = f(grid.x(i), grid.y(j));
                for c in 0..N {
                    out.comps[c][k] = val[c];
                }
            }
        }
        out
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn comp(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    #[inline]
    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[Vec<f64>; N] {
        &self.comps
    }

    pub fn into_components(self) -> [Vec<f64>; N] {
        self.comps
    }

    /// Pointwise vector at cell `k`.
    #[inline]
    pub fn at(&self, k: usize) -> [f64; N] {
        std::array::from_fn(|c| self.comps[c][k])
    }

    #[inline]
    pub fn set(&mut self, k: usize, val: [f64; N]) {
        for (c, v) in val.into_iter().enumerate() {
            self.comps[c][k] = v;
        }
    }

    pub fn same_grid<const M: usize>(&self, other: &Field<M>) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|x| x.is_finite())
    }

    /// Quadrature inner product `sum_k f_k . g_k * hx * hy`.
    pub fn inner(&self, other: &Self) -> f64 {
        let s: f64 = self
            .comps
            .iter()
            .zip(other.comps.iter())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        s * self.grid.cell_area()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.comps
            .iter()
            .zip(other.comps.iter())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0_f64, f64::max)
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (dst, src) in self.comps.iter_mut().zip(other.comps.iter()) {
            for (x, y) in dst.iter_mut().zip(src) {
                *x += a * y;
            }
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.comps.iter_mut().flatten().for_each(|x| *x *= a);
        out
    }

    /// Pointwise squared Euclidean length.
    pub fn magnitude_sq(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|k| self.comps.iter().map(|c| c[k] * c[k]).sum())
            .collect()
    }

    /// Mean of each component (quadrature average).
    pub fn mean(&self) -> [f64; N] {
        let n = self.grid.len() as f64;
        std::array::from_fn(|c| self.comps[c].iter().sum::<f64>() / n)
    }
}

impl<const N: usize> Add for &Field<N> {
    type Output = Field<N>;
    fn add(self, rhs: Self) -> Field<N> {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl<const N: usize> Sub for &Field<N> {
    type Output = Field<N>;
    fn sub(self, rhs: Self) -> Field<N> {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl<const N: usize> Mul<f64> for &Field<N> {
    type Output = Field<N>;
    fn mul(self, rhs: f64) -> Field<N> {
        self.scaled(rhs)
    }
}

impl ScalarField {
    pub fn values(&self) -> &[f64] {
        self.comp(0)
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        Self::from_components(grid, [values])
    }
}

/// Physical parameters, potential, noise descriptors and discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationParams {
    pub mu: f64,
    pub lambda_c: f64,
    pub gamma_c: f64,
    /// `a_0 .. a_N` of the polynomial `f~(x) = sum a_k x^k`.
    pub potential_coeffs: Vec<f64>,
    pub potential_degree: usize,
    pub h_vec: [f64; 3],
    pub beta: f64,
    pub noise_spectrum_exponent: f64,
    pub noise_mode_count: usize,
    pub grid: GridSpec,
    pub dt: f64,
    pub seed: u64,
}

impl Default for SimulationParams {
    /// Ginzburg-Landau potential with unit constants on a 32x32 unit square.
    fn default() -> Self {
        SimulationParams {
            mu: 1.0,
            lambda_c: 1.0,
            gamma_c: 1.0,
            potential_coeffs: vec![-1.0, 1.0],
            potential_degree: 1,
            h_vec: [0.0; 3],
            beta: 1.0,
            noise_spectrum_exponent: 3.0,
            noise_mode_count: 8,
            grid: GridSpec {
                nx: 32,
                ny: 32,
                lx: 1.0,
                ly: 1.0,
            },
            dt: 1e-3,
            seed: 0,
        }
    }
}

impl SimulationParams {
    /// Ginzburg-Landau coefficients `a_0 = -1/eta^2`, `a_1 = 1/eta^2`.
    pub fn ginzburg_landau(eta: f64) -> Vec<f64> {
        let s = 1.0 / (eta * eta);
        vec![-s, s]
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let mut fail = |msg: String| rep.violations.push(msg);

        for (name, val) in [
            ("mu", self.mu),
            ("lambda_c", self.lambda_c),
            ("gamma_c", self.gamma_c),
        ] {
            if !(val > 0.0 && val.is_finite()) {
                fail(format!("{name} must be positive (got {val})"));
            }
        }
        if self.potential_degree < 1 {
            fail("potential_degree must be >= 1".into());
        }
        if self.potential_coeffs.len() != self.potential_degree + 1 {
            fail(format!(
                "potential_coeffs has {} entries, potential_degree {} needs {}",
                self.potential_coeffs.len(),
                self.potential_degree,
                self.potential_degree + 1
            ));
        }
        if self.potential_coeffs.iter().any(|a| !a.is_finite()) {
            fail("potential_coeffs must be finite".into());
        }
        match self.potential_coeffs.last() {
            Some(&a) if a > 0.0 => {}
            Some(&a) => fail(format!("leading coefficient a_N must be positive (got {a})")),
            None => fail("leading coefficient a_N missing".into()),
        }
        if self.h_vec.iter().any(|x| !x.is_finite()) {
            fail("h_vec must be finite".into());
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            fail(format!("beta must be >= 0 (got {})", self.beta));
        }
        if !(self.noise_spectrum_exponent > 0.0 && self.noise_spectrum_exponent.is_finite()) {
            fail(format!(
                "noise_spectrum_exponent must be positive (got {})",
                self.noise_spectrum_exponent
            ));
        }
        if self.noise_mode_count < 1 {
            fail("noise_mode_count must be >= 1".into());
        }
        rep.violations.extend(self.grid.problems());
        if self.noise_mode_count > self.grid.len() / 4 {
            rep.violations.push(format!(
                "noise_mode_count {} exceeds nx*ny/4 = {}",
                self.noise_mode_count,
                self.grid.len() / 4
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            rep.violations
                .push(format!("time step dt must be positive (got {})", self.dt));
        }

        if self.noise_spectrum_exponent < 3.0 {
            rep.warnings.push(format!(
                "noise_spectrum_exponent {} < 3: summability only holds on the truncated spectrum",
                self.noise_spectrum_exponent
            ));
        }
        if !self.is_normalized() {
            rep.warnings.push(
                "mu, lambda_c, gamma_c are not all 1: energy and Ito identity checkers assume the normalized triple"
                    .into(),
            );
        }
        if rep.violations.is_empty() {
            // implicit reaction solve is uniquely solvable when 1 + gamma dt f~ stays positive
            let pc = PotentialCoeffs::new(self.potential_coeffs.clone());
            if let Ok(pc) = pc {
                let worst = pc.min_value_on(0.0, 4.0);
                if 1.0 + self.gamma_c * self.dt * worst <= 0.0 {
                    rep.warnings.push(format!(
                        "gamma_c * dt * min f~ = {:.3} <= -1: implicit reaction substep may not be unique",
                        self.gamma_c * self.dt * worst
                    ));
                }
            }
        }
        rep
    }

    /// Rejecting wrapper around [`validate`](Self::validate).
    pub fn checked(self) -> Result<Self> {
        let rep = self.validate();
        if rep.passed() {
            Ok(self)
        } else {
            Err(Error::InvalidParams(rep.violations))
        }
    }

    pub fn potential(&self) -> Result<PotentialCoeffs> {
        PotentialCoeffs::new(self.potential_coeffs.clone())
    }

    pub fn is_normalized(&self) -> bool {
        self.mu == 1.0 && self.lambda_c == 1.0 && self.gamma_c == 1.0
    }

    pub fn h_norm(&self) -> f64 {
        self.h_vec.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Master-grid step index of `t`, if `t` is within a relative 1e-9 of a
    /// multiple of `dt`.
    pub fn step_of(&self, t: f64) -> Result<i64> {
        let k = (t / self.dt).round();
        if ((k * self.dt) - t).abs() > 1e-9 * self.dt.max(t.abs()) || !k.is_finite() {
            return Err(Error::OffGrid(t));
        }
        Ok(k as i64)
    }

    pub fn time_of(&self, step: i64) -> f64 {
        step as f64 * self.dt
    }
}

/// Report-style validation; never mutates its input.
pub fn validate_params(p: &SimulationParams) -> ValidationReport {
    p.validate()
}

/// Outcome of [`SimulationParams::validate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Velocity/orientation pair at an absolute time. `step` is the master-grid
/// index of `t`; it is what the integrator keys noise on.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub step: i64,
    pub v: VectorField2,
    pub d: VectorField3,
}

impl State {
    pub fn new(step: i64, dt: f64, v: VectorField2, d: VectorField3) -> Result<Self> {
        v.same_grid(&d)?;
        Ok(State {
            t: step as f64 * dt,
            step,
            v,
            d,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.v.grid()
    }

    /// Max absolute sample difference over both fields.
    pub fn max_abs_diff(&self, other: &State) -> f64 {
        self.v.max_abs_diff(&other.v).max(self.d.max_abs_diff(&other.d))
    }

    /// True when every sample (and the time) matches bit for bit.
    pub fn bit_eq(&self, other: &State) -> bool {
        fn same<const N: usize>(a: &Field<N>, b: &Field<N>) -> bool {
            a.grid() == b.grid()
                && a.components()
                    .iter()
                    .zip(b.components())
                    .all(|(x, y)| x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()))
        }
        self.step == other.step
            && self.t.to_bits() == other.t.to_bits()
            && same(&self.v, &other.v)
            && same(&self.d, &other.d)
    }
}
