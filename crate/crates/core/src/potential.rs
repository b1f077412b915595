//! Polynomial Ginzburg-Landau potential family.
//!
//! `f~(x) = sum_k a_k x^k`, `f(d) = f~(|d|^2) d` and the antiderivative
//! `F~(x) = sum_k a_k x^(k+1) / (k+1)` with `F~(0) = 0`. The first variation
//! of `d -> F~(|d|^2)` is `2 f(d) . xi`.

use crate::error::{Error, Result};
use crate::model::VectorField3;

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialCoeffs {
    coeffs: Vec<f64>,
}

impl PotentialCoeffs {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        match coeffs.last() {
            Some(&a) if coeffs.len() >= 2 && a > 0.0 && coeffs.iter().all(|c| c.is_finite()) => {
                Ok(PotentialCoeffs { coeffs })
            }
            _ => Err(Error::InvalidParams(vec![format!(
                "potential needs degree >= 1 with leading coefficient a_N > 0 (got {coeffs:?})"
            )])),
        }
    }

    /// `a_0 = -1/eta^2, a_1 = 1/eta^2`.
    pub fn ginzburg_landau(eta: f64) -> Self {
        let s = 1.0 / (eta * eta);
        PotentialCoeffs {
            coeffs: vec![-s, s],
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().expect("non-empty by construction")
    }

    /// Antiderivative coefficients `a_k / (k + 1)`, always derived from `a_k`.
    pub fn antiderivative_coeffs(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a / (k + 1) as f64)
            .collect()
    }

    #[inline]
    fn horner(c: &[f64], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, a| acc * x + a)
    }

    /// `f~(x)` without the sign check; hot loops use this.
    #[inline]
    pub(crate) fn eval_f(&self, x: f64) -> f64 {
        Self::horner(&self.coeffs, x)
    }

    #[inline]
    pub(crate) fn eval_df(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, a)| acc * x + k as f64 * a)
    }

    #[inline]
    pub(crate) fn eval_big_f(&self, x: f64) -> f64 {
        // x * sum a_k/(k+1) x^k
        let s = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (k, a)| acc * x + a / (k + 1) as f64);
        x * s
    }

    pub fn tilde_f(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::NegativeArgument {
                what: "tilde_f",
                value: x,
            });
        }
        Ok(self.eval_f(x))
    }

    pub fn tilde_big_f(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::NegativeArgument {
                what: "tilde_F",
                value: x,
            });
        }
        Ok(self.eval_big_f(x))
    }

    /// `f(d) = f~(|d|^2) d`.
    #[inline]
    pub fn f_of_d(&self, d: [f64; 3]) -> [f64; 3] {
        let s = self.eval_f(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        [s * d[0], s * d[1], s * d[2]]
    }

    /// Pointwise `f(d)` over a field.
    pub fn f_field(&self, d: &VectorField3) -> VectorField3 {
        let mut out = VectorField3::zeros(*d.grid());
        for k in 0..d.grid().len() {
            out.set(k, self.f_of_d(d.at(k)));
        }
        out
    }

    /// Midpoint-rule `sum F~(|d_i|^2) hx hy`.
    pub fn bulk_energy(&self, d: &VectorField3) -> f64 {
        let area = d.grid().cell_area();
        d.magnitude_sq()
            .into_iter()
            .map(|s| self.eval_big_f(s))
            .sum::<f64>()
            * area
    }

    /// Minimum of `f~` on `[a, b]` by dense sampling (used for solvability
    /// warnings only).
    pub fn min_value_on(&self, a: f64, b: f64) -> f64 {
        (0..=400)
            .map(|i| self.eval_f(a + (b - a) * i as f64 / 400.0))
            .fold(f64::INFINITY, f64::min)
    }

    /// Backward-Euler step of the pointwise relaxation `d' = -tau f(d)`:
    /// returns `s >= 0` with `s (1 + tau f~(s^2)) = r`. Since `f(d)` is
    /// parallel to `d` the update is a radial rescaling.
    pub fn implicit_radial(&self, r: f64, tau: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let g = |s: f64| s * (1.0 + tau * self.eval_f(s * s)) - r;
        let dg = |s: f64| {
            let x = s * s;
            1.0 + tau * (self.eval_f(x) + 2.0 * x * self.eval_df(x))
        };
        // bracket [lo, hi] with g(lo) <= 0 <= g(hi); g(0) = -r < 0
        let mut lo = 0.0;
        let mut hi = r.max(1.0);
        while g(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        let mut s = if g(r) >= 0.0 { r.min(hi) } else { hi };
        for _ in 0..200 {
            let val = g(s);
            if val == 0.0 {
                return s;
            }
            if val < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let slope = dg(s);
            let mut next = s - val / slope;
            if !(slope > 0.0) || !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 4.0 * f64::EPSILON * s.abs().max(1e-300) {
                return next;
            }
            s = next;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GridSpec;

    fn gl() -> PotentialCoeffs {
        PotentialCoeffs::ginzburg_landau(1.0)
    }

    #[test]
    fn tilde_f_values() {
        assert_eq!(gl().tilde_f(1.0).unwrap(), 0.0);
        assert_eq!(gl().tilde_f(4.0).unwrap(), 3.0);
        let c = PotentialCoeffs::new(vec![2.5, -1.0, 0.3]).unwrap();
        assert_eq!(c.tilde_f(0.0).unwrap(), 2.5);
        assert!(gl().tilde_f(-1e-3).is_err());
    }

    #[test]
    fn f_of_d_values() {
        assert_eq!(gl().f_of_d([1.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
        assert_eq!(gl().f_of_d([0.0; 3]), [0.0; 3]);
        assert_eq!(gl().f_of_d([2.0, 0.0, 0.0]), [6.0, 0.0, 0.0]);
    }

    #[test]
    fn tilde_big_f_values() {
        let c = PotentialCoeffs::new(vec![0.7, -2.0, 0.1, 3.0]).unwrap();
        assert_eq!(c.tilde_big_f(0.0).unwrap(), 0.0);
        assert!((gl().tilde_big_f(1.0).unwrap() + 0.5).abs() < 1e-15);
        assert!(gl().tilde_big_f(2.0).unwrap().abs() < 1e-15);
        assert!(gl().tilde_big_f(-1.0).is_err());
    }

    #[test]
    fn antiderivative_is_derived() {
        let c = PotentialCoeffs::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c.antiderivative_coeffs(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn bulk_energy_examples() {
        let g = GridSpec::unit_square(16).unwrap();
        assert_eq!(gl().bulk_energy(&VectorField3::zeros(g)), 0.0);
        let unit = VectorField3::from_fn(g, |_, _| [1.0, 0.0, 0.0]);
        assert!((gl().bulk_energy(&unit) + 0.5).abs() < 1e-13);
        let root2 = VectorField3::from_fn(g, |_, _| [2f64.sqrt(), 0.0, 0.0]);
        assert!(gl().bulk_energy(&root2).abs() < 1e-13);
    }

    #[test]
    fn rejects_nonpositive_leading_coefficient() {
        assert!(PotentialCoeffs::new(vec![1.0, -1.0]).is_err());
        assert!(PotentialCoeffs::new(vec![1.0]).is_err());
    }

    #[test]
    fn implicit_radial_solves_its_equation() {
        let c = PotentialCoeffs::new(vec![-1.0, 0.5, 0.25]).unwrap();
        for &r in &[0.0, 1e-3, 0.5, 1.0, 3.0, 100.0, 1e4] {
            for &tau in &[1e-4, 1e-2, 0.3] {
                let s = c.implicit_radial(r, tau);
                let resid = s * (1.0 + tau * c.eval_f(s * s)) - r;
                assert!(resid.abs() <= 1e-12 * r.max(1.0), "r={r} tau={tau} resid={resid}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let c = PotentialCoeffs::new(vec![0.3, -1.2, 0.7, 0.2]).unwrap();
        for &x in &[0.1, 0.9, 2.3] {
            let h = 1e-6;
            let fd = (c.eval_f(x + h) - c.eval_f(x - h)) / (2.0 * h);
            assert!((fd - c.eval_df(x)).abs() < 1e-7);
        }
    }
}
