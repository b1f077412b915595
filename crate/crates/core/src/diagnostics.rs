//! Norms, energies and the residual checks for the discrete balance laws.

use crate::error::{Error, Result};
use crate::integrator::{Integrator, Snapshot, Trajectory};
use crate::model::{Field, SimulationParams, State, VectorField2, VectorField3};
use crate::ops::{advect, dirichlet_form, divergence, laplacian, Bc};
use crate::potential::PotentialCoeffs;

/// One row of per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub step: i64,
    /// `|v|_2`
    pub v_l2: f64,
    /// `|grad v|_2`
    pub v_h1: f64,
    pub d_l2: f64,
    /// `(|d|_2^2 + |grad d|_2^2)^(1/2)`
    pub d_h1: f64,
    pub lap_d_l2: f64,
    /// `|d|_{4N+2}^{4N+2}`
    pub d_l4n2: f64,
    /// `ln(1 + d_l4n2)`
    pub log_energy: f64,
    pub energy: f64,
    pub div_v_l2: f64,
    pub ito_residual: Option<f64>,
    pub energy_residual: Option<f64>,
    pub scalar_flow_residual: Option<f64>,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 14] = [
        "t",
        "step",
        "v_l2",
        "v_h1",
        "d_l2",
        "d_h1",
        "lap_d_l2",
        "d_l4n2",
        "log_energy",
        "energy",
        "div_v_l2",
        "ito_residual",
        "energy_residual",
        "scalar_flow_residual",
    ];

    pub fn of(state: &State, params: &SimulationParams, pot: &PotentialCoeffs) -> Self {
        let v = &state.v;
        let d = &state.d;
        let gd = dirichlet_form(d, Bc::Neumann);
        let l = lebesgue_power(d, 4 * params.potential_degree as u32 + 2);
        DiagnosticsRecord {
            t: state.t,
            step: state.step,
            v_l2: v.norm_l2(),
            v_h1: dirichlet_form(v, Bc::Dirichlet).max(0.0).sqrt(),
            d_l2: d.norm_l2(),
            d_h1: (d.inner(d) + gd).max(0.0).sqrt(),
            lap_d_l2: laplacian(d, Bc::Neumann).norm_l2(),
            d_l4n2: l,
            log_energy: l.ln_1p(),
            energy: energy(state, params, pot),
            div_v_l2: divergence(v).norm_l2(),
            ito_residual: None,
            energy_residual: None,
            scalar_flow_residual: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|x| x.map_or(true, f64::is_finite))
    }

    /// Values in [`COLUMNS`](Self::COLUMNS) order.
    pub fn values(&self) -> [Option<f64>; 14] {
        [
            Some(self.t),
            Some(self.step as f64),
            Some(self.v_l2),
            Some(self.v_h1),
            Some(self.d_l2),
            Some(self.d_h1),
            Some(self.lap_d_l2),
            Some(self.d_l4n2),
            Some(self.log_energy),
            Some(self.energy),
            Some(self.div_v_l2),
            self.ito_residual,
            self.energy_residual,
            self.scalar_flow_residual,
        ]
    }
}

fn lebesgue_power<const N: usize>(f: &Field<N>, p: u32) -> f64 {
    let half = (p / 2) as i32;
    f.magnitude_sq().iter().map(|s| s.powi(half)).sum::<f64>() * f.grid().cell_area()
}

/// `sum |f|^p hx hy` for even `p >= 2` (the p-th power of the norm).
pub fn lebesgue_norm<const N: usize>(f: &Field<N>, p: u32) -> Result<f64> {
    if p < 2 || p % 2 != 0 {
        return Err(Error::UnsupportedExponent(p));
    }
    Ok(lebesgue_power(f, p))
}

/// `ln(1 + |d|_{4N+2}^{4N+2})`.
pub fn log_energy(d: &VectorField3, params: &SimulationParams) -> f64 {
    lebesgue_power(d, 4 * params.potential_degree as u32 + 2).ln_1p()
}

/// `1/2 |v|^2 + lambda/2 (|grad d|^2 + int F~(|d|^2))`.
pub fn energy(state: &State, params: &SimulationParams, pot: &PotentialCoeffs) -> f64 {
    0.5 * state.v.inner(&state.v)
        + 0.5
            * params.lambda_c
            * (dirichlet_form(&state.d, Bc::Neumann) + pot.bulk_energy(&state.d))
}

fn midpoint<const N: usize>(a: &Field<N>, b: &Field<N>) -> Field<N> {
    let mut m = a.scaled(0.5);
    m.axpy(0.5, b);
    m
}

fn weighted_d(d: &VectorField3, n: u32) -> VectorField3 {
    let mut out = d.clone();
    let s = d.magnitude_sq();
    for (c, comp) in out.components().clone().iter().enumerate() {
        let dst = out.comp_mut(c);
        for k in 0..comp.len() {
            dst[k] = s[k].powi(2 * n as i32) * comp[k];
        }
    }
    out
}

/// Per-step balance of `L = |d|_{4N+2}^{4N+2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItoResidual {
    /// `dL/dt + (4N+2) gamma <|d|^{4N} d, -lap d + f(d)> + (4N+2) <|d|^{4N} d, (v.grad) d>`
    pub residual: f64,
    /// `(4N+1) int |d|^{4N} |grad d|^2 - <|d|^{4N} d, -lap d>`, times
    /// `(4N+2) gamma`. Non-negative in the continuum; zero only where
    /// `grad d` is parallel to `d`.
    pub gradient_gap: f64,
}

/// Balance of `L` between two consecutive states, spatial terms at the
/// midpoint state.
pub fn ito_step_residual(
    prev: &State,
    next: &State,
    params: &SimulationParams,
    pot: &PotentialCoeffs,
) -> Result<ItoResidual> {
    let n = params.potential_degree as u32;
    let p = 4 * n + 2;
    let dt = (next.step - prev.step) as f64 * params.dt;
    let dl = (lebesgue_power(&next.d, p) - lebesgue_power(&prev.d, p)) / dt;
    let dm = midpoint(&prev.d, &next.d);
    let vm = midpoint(&prev.v, &next.v);
    let wd = weighted_d(&dm, n);
    let lap = laplacian(&dm, Bc::Neumann);
    let fd = pot.f_field(&dm);
    let adv = advect(&vm, &dm, Bc::Neumann)?;
    let pf = p as f64;
    let g = params.gamma_c;
    let diss = -wd.inner(&lap);
    let residual = dl + pf * g * (diss + wd.inner(&fd)) + pf * wd.inner(&adv);
    // literal gradient weight with centred gradients
    let s = dm.magnitude_sq();
    let mut grad_sq = vec![0.0; s.len()];
    for c in 0..3 {
        let gr = crate::ops::gradient(&Field::from_parts(*dm.grid(), [dm.comp(c).to_vec()]));
        for k in 0..s.len() {
            grad_sq[k] += gr.comp(0)[k].powi(2) + gr.comp(1)[k].powi(2);
        }
    }
    let lit: f64 = s
        .iter()
        .zip(&grad_sq)
        .map(|(sk, gk)| sk.powi(2 * n as i32) * gk)
        .sum::<f64>()
        * dm.grid().cell_area()
        * (pf - 1.0);
    Ok(ItoResidual {
        residual,
        gradient_gap: pf * g * (lit - diss),
    })
}

/// Per-step residual of the noise-free energy law
/// `dE/dt + mu |grad v|^2 + lambda gamma |lap d - f(d)|^2`, spatial terms at
/// the midpoint state.
pub fn energy_step_residual(
    prev: &State,
    next: &State,
    params: &SimulationParams,
    pot: &PotentialCoeffs,
) -> f64 {
    let dt = (next.step - prev.step) as f64 * params.dt;
    let de = (energy(next, params, pot) - energy(prev, params, pot)) / dt;
    let vm = midpoint(&prev.v, &next.v);
    let dm = midpoint(&prev.d, &next.d);
    let mut w = laplacian(&dm, Bc::Neumann);
    w.axpy(-1.0, &pot.f_field(&dm));
    de + params.mu * dirichlet_form(&vm, Bc::Dirichlet)
        + params.lambda_c * params.gamma_c * w.inner(&w)
}

/// `e^{W_2} (h . d)` pointwise.
pub fn scalar_flow_field(d: &VectorField3, h: [f64; 3], w2: f64) -> Field<1> {
    let a = w2.exp();
    let vals = (0..d.grid().len())
        .map(|k| {
            let x = d.at(k);
            a * (h[0] * x[0] + h[1] * x[1] + h[2] * x[2])
        })
        .collect();
    Field::from_parts(*d.grid(), [vals])
}

/// L2 norm of the residual of the scalar equation satisfied by
/// `e^{W_2}(h . d)` over one step. `w2_prev` is `W_2` at `prev`, `dw2` the
/// increment over the step. The Stratonovich product uses the weight
/// `2 tanh(dW/2)`, which the exact multiplicative factor satisfies with no
/// remainder.
pub fn scalar_flow_step_residual(
    prev: &State,
    next: &State,
    w2_prev: f64,
    dw2: f64,
    params: &SimulationParams,
    pot: &PotentialCoeffs,
) -> Result<f64> {
    let dt = (next.step - prev.step) as f64 * params.dt;
    let h = params.h_vec;
    let b0 = scalar_flow_field(&prev.d, h, w2_prev);
    let b1 = scalar_flow_field(&next.d, h, w2_prev + dw2);
    let bm = midpoint(&b0, &b1);
    let vm = midpoint(&prev.v, &next.v);
    let s0 = prev.d.magnitude_sq();
    let s1 = next.d.magnitude_sq();
    let lap = laplacian(&bm, Bc::Neumann);
    let adv = advect(&vm, &bm, Bc::Neumann)?;
    let tau = 2.0 * (0.5 * dw2).tanh();
    let g = params.gamma_c;
    let n = b0.grid().len();
    let mut r = vec![0.0; n];
    for k in 0..n {
        let m = bm.comp(0)[k];
        let fbar = pot.eval_f(0.5 * (s0[k] + s1[k])) * m;
        r[k] = (b1.comp(0)[k] - b0.comp(0)[k]) / dt + adv.comp(0)[k]
            - g * (lap.comp(0)[k] - fbar)
            - m * tau / dt;
    }
    Ok(Field::from_parts(*b0.grid(), [r]).norm_l2())
}

fn consecutive(traj: &Trajectory) -> Result<impl Iterator<Item = (&Snapshot, &Snapshot)>> {
    if traj.stride != 1 {
        return Err(Error::Precondition(format!(
            "residuals need every step (stride 1), got stride {}",
            traj.stride
        )));
    }
    Ok(traj.snapshots.iter().zip(traj.snapshots.iter().skip(1)))
}

/// Itô balance residuals for each step of a stride-1 trajectory.
pub fn ito_residual_l(traj: &Trajectory, params: &SimulationParams) -> Result<Vec<f64>> {
    let pot = params.potential()?;
    consecutive(traj)?
        .map(|(a, b)| ito_step_residual(&a.state, &b.state, params, &pot).map(|r| r.residual))
        .collect()
}

/// Energy-law residuals for each step of a noise-free stride-1 trajectory.
pub fn energy_balance_residual(traj: &Trajectory, params: &SimulationParams) -> Result<Vec<f64>> {
    if !traj.noise_free {
        return Err(Error::Precondition(
            "energy balance is the deterministic law; the trajectory carries noise".into(),
        ));
    }
    let pot = params.potential()?;
    Ok(consecutive(traj)?
        .map(|(a, b)| energy_step_residual(&a.state, &b.state, params, &pot))
        .collect())
}

/// Scalar-flow residuals for each step of a transformed-mode trajectory.
pub fn scalar_flow_residual(
    traj: &Trajectory,
    integ: &Integrator,
) -> Result<Vec<f64>> {
    if traj.snapshots.iter().any(|s| s.shifted.is_none()) {
        return Err(Error::Precondition(
            "scalar flow residual needs a transformed-mode trajectory".into(),
        ));
    }
    let params = integ.params();
    let pot = params.potential()?;
    let mut out = Vec::new();
    for (a, b) in consecutive(traj)? {
        let w2 = integ.w2_at_step(a.state.step);
        let dw = integ.w2_increment(a.state.step);
        out.push(scalar_flow_step_residual(&a.state, &b.state, w2, dw, params, &pot)?);
    }
    Ok(out)
}

/// Outcome of fitting `y(t) <= y0 e^{-c(t-t0)} + K/c (1 - e^{-c(t-t0)})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallFit {
    pub c: f64,
    pub k: f64,
    /// Samples above the bound for the reported `(c, K)`.
    pub violations: usize,
}

/// Fits the log-energy bound on `(t, y)` samples.
///
/// `K/c` is pinned to the ceiling of `y` over the final tenth of the
/// samples (the observed band); `c` is then the largest rate, up to
/// `c_max`, for which every sample lies under the bound.
pub fn gronwall_fit(samples: &[(f64, f64)], c_max: f64) -> GronwallFit {
    if samples.len() < 2 {
        return GronwallFit {
            c: 0.0,
            k: 0.0,
            violations: 0,
        };
    }
    let (t0, y0) = samples[0];
    let tail = (samples.len() / 10).max(1);
    let band = samples[samples.len() - tail..]
        .iter()
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let slack = 1e-12 * (1.0 + y0.abs().max(band));
    let count = |c: f64| {
        samples
            .iter()
            .filter(|&&(t, y)| {
                let e = (-c * (t - t0)).exp();
                y > y0 * e + band * (1.0 - e) + slack
            })
            .count()
    };
    let fits = |c: f64| count(c) == 0;
    let c = if fits(c_max) {
        c_max
    } else if !fits(c_max * 1e-9) {
        0.0
    } else {
        let (mut lo, mut hi) = (c_max * 1e-9, c_max);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo < 1.0 + 1e-10 {
                break;
            }
        }
        lo
    };
    GronwallFit {
        c,
        k: c * band,
        violations: if c > 0.0 { 0 } else { count(c_max * 1e-9) },
    }
}

/// [`gronwall_fit`] on the log-energy column of a trajectory.
pub fn gronwall_log_check(traj: &Trajectory) -> GronwallFit {
    let samples: Vec<(f64, f64)> = traj.records.iter().map(|r| (r.t, r.log_energy)).collect();
    let c_max = 1.0 / traj.dt.max(f64::MIN_POSITIVE);
    gronwall_fit(&samples, c_max)
}

/// Runs `s -> t` once and as `s -> r -> t` from the same snapshot and
/// returns the largest sample difference of the final states (including
/// the carried OU state in transformed mode).
pub fn cocycle_check(
    integ: &Integrator,
    s: f64,
    r: f64,
    t: f64,
    initial: &Snapshot,
) -> Result<f64> {
    let p = integ.params();
    let (ks, kr, kt) = (p.step_of(s)?, p.step_of(r)?, p.step_of(t)?);
    if !(ks <= kr && kr <= kt) || initial.state.step != ks {
        return Err(Error::Precondition(format!(
            "cocycle check needs s <= r <= t with the snapshot at s (got {s}, {r}, {t})"
        )));
    }
    let whole = integ.advance(initial.clone(), (kt - ks) as u64)?;
    let half = integ.advance(initial.clone(), (kr - ks) as u64)?;
    let split = integ.advance(half, (kt - kr) as u64)?;
    Ok(snapshot_diff(&whole, &split))
}

/// Largest absolute difference between two snapshots, `inf` when their
/// times or shapes differ.
pub fn snapshot_diff(a: &Snapshot, b: &Snapshot) -> f64 {
    if a.state.step != b.state.step || a.state.t.to_bits() != b.state.t.to_bits() {
        return f64::INFINITY;
    }
    let mut m = a.state.max_abs_diff(&b.state);
    match (&a.shifted, &b.shifted) {
        (None, None) => {}
        (Some(x), Some(y)) => {
            m = m.max(x.u.max_abs_diff(&y.u));
            if x.z.bin != y.z.bin || x.z.coeffs.len() != y.z.coeffs.len() {
                return f64::INFINITY;
            }
            for (p, q) in x.z.coeffs.iter().zip(&y.z.coeffs) {
                m = m.max((p - q).abs());
            }
        }
        _ => return f64::INFINITY,
    }
    m
}

/// `|v|_2` plus `||d||_1`, the distance used for continuity experiments.
pub fn state_distance(a: &State, b: &State) -> f64 {
    let dv: VectorField2 = &a.v - &b.v;
    let dd: VectorField3 = &a.d - &b.d;
    dv.norm_l2() + (dd.inner(&dd) + dirichlet_form(&dd, Bc::Neumann)).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GridSpec;

    fn unit() -> GridSpec {
        GridSpec::unit_square(16).unwrap()
    }

    #[test]
    fn lebesgue_examples() {
        let g = unit();
        assert_eq!(lebesgue_norm(&VectorField3::zeros(g), 6).unwrap(), 0.0);
        let d = VectorField3::from_fn(g, |_, _| [1.0, 0.0, 0.0]);
        assert!((lebesgue_norm(&d, 6).unwrap() - 1.0).abs() < 1e-13);
        let f = VectorField3::from_fn(g, |x, y| [x, y * x, 0.3]);
        let a = lebesgue_norm(&f, 4).unwrap();
        let b = lebesgue_norm(&f.scaled(2.0), 4).unwrap();
        assert!((b / a - 16.0).abs() < 1e-12);
        assert!(lebesgue_norm(&f, 3).is_err());
        assert!(lebesgue_norm(&f, 0).is_err());
    }

    #[test]
    fn log_energy_examples() {
        let g = unit();
        let p = SimulationParams::default();
        assert_eq!(log_energy(&VectorField3::zeros(g), &p), 0.0);
        let d = VectorField3::from_fn(g, |_, _| [1.0, 0.0, 0.0]);
        assert!((log_energy(&d, &p) - 2f64.ln()).abs() < 1e-13);
        assert!(log_energy(&d.scaled(1.1), &p) > log_energy(&d, &p));
    }

    #[test]
    fn record_is_consistent() {
        let g = unit();
        let p = SimulationParams::default();
        let pot = p.potential().unwrap();
        let d = VectorField3::from_fn(g, |x, y| [x.cos(), y, x * y]);
        let s = State::new(0, p.dt, VectorField2::zeros(g), d.clone()).unwrap();
        let r = DiagnosticsRecord::of(&s, &p, &pot);
        assert_eq!(r.log_energy, r.d_l4n2.ln_1p());
        let h1 = d.inner(&d) - laplacian(&d, Bc::Neumann).inner(&d);
        assert!((r.d_h1 * r.d_h1 - h1).abs() < 1e-8);
        assert!(r.is_finite());
    }

    #[test]
    fn zero_trajectory_residuals() {
        let g = unit();
        let p = SimulationParams::default();
        let pot = p.potential().unwrap();
        let s0 = State::new(0, p.dt, VectorField2::zeros(g), VectorField3::zeros(g)).unwrap();
        let s1 = State::new(1, p.dt, VectorField2::zeros(g), VectorField3::zeros(g)).unwrap();
        let r = ito_step_residual(&s0, &s1, &p, &pot).unwrap();
        assert_eq!(r.residual, 0.0);
        let e = VectorField3::from_fn(g, |_, _| [0.0, 1.0, 0.0]);
        let a = State::new(0, p.dt, VectorField2::zeros(g), e.clone()).unwrap();
        let b = State::new(1, p.dt, VectorField2::zeros(g), e).unwrap();
        assert!(energy_step_residual(&a, &b, &p, &pot).abs() < 1e-12);
    }

    #[test]
    fn gronwall_constant_and_decay() {
        let flat: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 0.1, 2.0)).collect();
        let f = gronwall_fit(&flat, 100.0);
        assert_eq!(f.c, 100.0);
        assert!((f.k - f.c * 2.0).abs() < 1e-12);
        let decay: Vec<(f64, f64)> =
            (0..200).map(|k| (k as f64 * 0.01, 1.0 + 5.0 * (-3.0 * k as f64 * 0.01).exp())).collect();
        let f = gronwall_fit(&decay, 1e3);
        assert!(f.c > 0.0 && f.violations == 0);
    }
}
