//! Measurements behind the twelve verification checks. Each returns a
//! [`Check`] carrying the measured numbers and a pass flag; callers decide
//! what to do with failures.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::attractor::{absorbing_radius_estimate, director_field, initial_datum};
use crate::diagnostics::{gronwall_log_check, lebesgue_norm, snapshot_diff, state_distance};
use crate::error::Result;
use crate::integrator::{rotate_orientation, Integrator, Mode, RunOptions, Snapshot, StepScheme, Trajectory};
use crate::io::Checkpoint;
use crate::model::{Field, GridSpec, SimulationParams, VectorField2, VectorField3};
use crate::noise::{build_mode_basis, ou_stationary_init, PathStore};
use crate::ops::{divergence, gradient_with, divergence_with, laplacian, leray_project, Bc};

/// One measured check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// Named measurements, in the order they were taken.
    pub values: Vec<(String, f64)>,
    /// Free-form remark (tolerances, informational notes).
    pub note: String,
}

impl Check {
    fn new(id: u8, name: &'static str) -> Self {
        Check {
            id,
            name,
            passed: true,
            values: Vec::new(),
            note: String::new(),
        }
    }

    fn val(&mut self, k: impl Into<String>, v: f64) {
        self.values.push((k.into(), v));
    }

    fn require(&mut self, ok: bool) {
        self.passed &= ok;
    }

    /// `PASS 3 ito-balance: ratio=1.84 ...`
    pub fn line(&self) -> String {
        let vals: Vec<String> = self.values.iter().map(|(k, v)| format!("{k}={v:.4e}")).collect();
        let mut s = format!(
            "{} {:>2} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            vals.join(" ")
        );
        if !self.note.is_empty() {
            s.push_str(" | ");
            s.push_str(&self.note);
        }
        s
    }
}

pub type CheckFn = fn(&SimulationParams) -> Result<Check>;

/// Every check with its id and name, in order.
pub const CHECKS: [(u8, &str, CheckFn); 12] = [
    (1, "potential-gradient", potential_gradient),
    (2, "rotation-invariance", rotation_invariance),
    (3, "ito-balance", ito_balance),
    (4, "energy-dissipation", energy_dissipation),
    (5, "log-energy-absorption", log_energy_absorption),
    (6, "cocycle", cocycle),
    (7, "scalar-flow", scalar_flow),
    (8, "transformed-direct", transformed_direct),
    (9, "ou-statistics", ou_statistics),
    (10, "operator-convergence", operator_convergence),
    (11, "absorbing-ball", absorbing_ball),
    (12, "lipschitz", lipschitz),
];

/// Runs the checks whose ids are listed (all when `ids` is empty).
pub fn run_checks(ids: &[u8], base: &SimulationParams) -> Result<Vec<Check>> {
    CHECKS
        .iter()
        .filter(|(id, _, _)| ids.is_empty() || ids.contains(id))
        .map(|(_, _, f)| f(base))
        .collect()
}

fn uniform(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    a + (b - a) * u
}

fn with_dt(base: &SimulationParams, dt: f64) -> SimulationParams {
    SimulationParams {
        dt,
        ..base.clone()
    }
}

fn start(integ: &Integrator, r: f64) -> Result<Snapshot> {
    let (v, d) = initial_datum(integ.basis(), r);
    integ.prepare(integ.state_at(0.0, v, d)?)
}

fn max_col(tr: &Trajectory, f: impl Fn(&crate::diagnostics::DiagnosticsRecord) -> Option<f64>) -> f64 {
    tr.records.iter().filter_map(f).fold(0.0, |m, x| m.max(x.abs()))
}

const HALVING_BAND: (f64, f64) = (1.7, 2.3);

fn in_band(x: f64, band: (f64, f64)) -> bool {
    x >= band.0 && x <= band.1
}

/// Central difference of `F~(|d|^2)` along `xi` against `2 f(d) . xi` at
/// 200 random points.
pub fn potential_gradient(base: &SimulationParams) -> Result<Check> {
    let mut c = Check::new(1, "potential-gradient");
    let pot = base.potential()?;
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed ^ 0x9e37_79b9);
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d: [f64; 3] = std::array::from_fn(|_| uniform(&mut rng, -1.5, 1.5));
        let xi: [f64; 3] = std::array::from_fn(|_| uniform(&mut rng, -1.0, 1.0));
        let sq = |s: f64| (0..3).map(|k| (d[k] + s * xi[k]).powi(2)).sum::<f64>();
        let fd = (pot.tilde_big_f(sq(eps))? - pot.tilde_big_f(sq(-eps))?) / (2.0 * eps);
        let f = pot.f_of_d(d);
        let exact = 2.0 * (0..3).map(|k| f[k] * xi[k]).sum::<f64>();
        worst = worst.max((fd - exact).abs() / exact.abs());
    }
    c.val("max_rel_err", worst);
    c.require(worst < 1e-6);
    c.note = "200 samples, eps=1e-5, tol 1e-6".into();
    Ok(c)
}

/// Rotation substeps alone, driven by the orientation path: 1e4 steps.
pub fn rotation_invariance(base: &SimulationParams) -> Result<Check> {
    let mut c = Check::new(2, "rotation-invariance");
    let mut p = base.clone();
    if p.h_norm() == 0.0 {
        p.h_vec = [0.3, -0.5, 0.8];
    }
    let integ = Integrator::new(p.clone(), StepScheme::default())?.with_noise(false, true);
    let n = 4 * p.potential_degree as u32 + 2;
    let mut d = director_field(p.grid, 1.0).scaled(1.3);
    let m0 = lebesgue_norm(&d, n)?;
    let mut worst_step = 0.0f64;
    for k in 0..10_000 {
        let next = rotate_orientation(&d, p.h_vec, integ.w2_increment(k));
        let a = d.magnitude_sq();
        let b = next.magnitude_sq();
        for (x, y) in a.iter().zip(&b) {
            worst_step = worst_step.max((x.sqrt() - y.sqrt()).abs());
        }
        d = next;
    }
    let drift = (lebesgue_norm(&d, n)? - m0).abs() / m0;
    c.val("max_step_change", worst_step);
    c.val("norm_drift", drift);
    c.val("w2_end", integ.w2_at_step(10_000));
    c.require(worst_step < 1e-13 && drift < 1e-10);
    c.note = format!("L^{n} norm, tol 1e-13 / 1e-10");
    Ok(c)
}

fn relaxation_runs(base: &SimulationParams) -> Result<Vec<Trajectory>> {
    [2e-3, 1e-3]
        .iter()
        .map(|&dt| {
            let integ = Integrator::new(with_dt(base, dt), StepScheme::default())?.silenced();
            let s = start(&integ, 1.0)?;
            integ.run_until(
                s,
                0.5,
                RunOptions {
                    stride: u64::MAX,
                    residuals: true,
                },
            )
        })
        .collect()
}

/// Noise-free relaxation to T=0.5 at dt 2e-3 and 1e-3.
pub fn ito_balance(base: &SimulationParams) -> Result<Check> {
    let mut c = Check::new(3, "ito-balance");
    let runs = relaxation_runs(base)?;
    let r: Vec<f64> = runs.iter().map(|t| max_col(t, |r| r.ito_residual)).collect();
    c.val("max_res_dt2e-3", r[0]);
    c.val("max_res_dt1e-3", r[1]);
    c.val("ratio", r[0] / r[1]);
    c.require(in_band(r[0] / r[1], HALVING_BAND));
    c.note = "ratio in [1.7, 2.3]".into();
    Ok(c)
}

/// Energy monotone at every step and first-order balance residual, with
/// unit constants.
pub fn energy_dissipation(base: &SimulationParams) -> Result<Check> {
    let mut c = Check::new(4, "energy-dissipation");
    let p = SimulationParams {
        mu: 1.0,
        lambda_c: 1.0,
        gamma_c: 1.0,
        ..base.clone()
    };
    let runs = relaxation_runs(&p)?;
    let mut increases = 0usize;
    for t in &runs {
        increases += t.records.windows(2).filter(|w| w[1].energy > w[0].energy).count();
    }
    let r: Vec<f64> = runs.iter().map(|t| max_col(t, |r| r.energy_residual)).collect();
    c.val("energy_increases", increases as f64);
    c.val("max_res_dt2e-3", r[0]);
    c.val("max_res_dt1e-3", r[1]);
    c.val("ratio", r[0] / r[1]);
    c.require(increases == 0 && in_band(r[0] / r[1], HALVING_BAND));
    c.note = "no increase, ratio in [1.7, 2.3]".into();
    Ok(c)
}

/// Noisy shifted runs from data scaled by 10 and 100 up to T=2.
pub fn log_energy_absorption(base: &SimulationParams) -> Result<Check> {
    let mut c = Check::new(5, "log-energy-absorption");
    let mut p = with_dt(base, 5e-4);
    if p.h_norm() == 0.0 {
        p.h_vec = [0.1; 3];
    }
    let integ = Integrator::new(p, StepScheme::transformed())?;
    let mut ends = Vec::new();
    let mut ok = true;
    for r in [10.0, 100.0] {
        let tr = integ.run_until(
            start(&integ, r)?,
            2.0,
            RunOptions {
                stride: u64::MAX,
                residuals: false,
            },
        )?;
        let fit = gronwall_log_check(&tr);
        let y0 = tr.records[0].log_energy;
        let y1 = tr.records.last().expect("non-empty").log_energy;
        c.val(format!("y0_R{r}"), y0);
        c.val(format!("yT_R{r}"), y1);
        c.val(format!("c_R{r}"), fit.c);
        c.val(format!("band_R{r}"), fit.k / fit.c);
        ok &= fit.c > 0.0;
        ends.push(y1);
    }
    let spread = (ends[0] - ends[1]).abs() / ends[0].abs().min(ends[1].abs());
    c.val("terminal_spread", spread);
    c.require(ok && spread < 0.05);
    c.note = "c > 0 for both, terminal spread < 5%".into();
    Ok(c)
}

/// Split runs vs whole runs for three random triples in each mode, plus a
/// checkpoint replay.
pub fn cocycle(base: &SimulationParams) -> Result<Check> {
    let mut c = Check::new(6, "cocycle");
    let mut p = base.clone();
    if p.h_norm() == 0.0 {
        p.h_vec = [0.1; 3];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed.wrapping_add(6));
    let mut worst = 0.0f64;
    for scheme in [StepScheme::default(), StepScheme::transformed()] {
        let integ = Integrator::new(p.clone(), scheme)?;
        for _ in 0..3 {
            let mut k = [0i64; 3];
            for x in &mut k {
                *x = (rng.next_u64() % 200) as i64 - 100;
            }
            k.sort_unstable();
            let [s, r, t] = k.map(|x| p.time_of(x));
            let (v, d) = initial_datum(integ.basis(), 1.0);
            let init = integ.prepare(integ.state_at(s, v, d)?)?;
            worst = worst.max(crate::diagnostics::cocycle_check(&integ, s, r, t, &init)?);
        }
    }
    c.val("max_split_diff", worst);

    // checkpoint at r, resume from the decoded bytes
    let integ = Integrator::new(p.clone(), StepScheme::transformed())?.with_substeps(2)?;
    let init = start(&integ, 1.0)?;
    let whole = integ.advance(init.clone(), 120)?;
    let mid = integ.advance(init, 50)?;
    let bytes = Checkpoint {
        params: p.clone(),
        mode: Mode::Transformed,
        substeps: integ.substeps(),
        snapshot: mid,
    }
    .to_bytes();
    let ck = Checkpoint::from_bytes(&bytes)?;
    let same_bytes = ck.to_bytes() == bytes;
    let resumed = Integrator::new(ck.params.clone(), StepScheme::transformed())?
        .with_substeps(ck.substeps)?;
    let replay = resumed.advance(ck.snapshot, 70)?;
    let replay_diff = snapshot_diff(&whole, &replay);
    c.val("checkpoint_replay_diff", replay_diff);
    c.val("reencode_identical", if same_bytes { 1.0 } else { 0.0 });
    c.require(worst == 0.0 && replay_diff == 0.0 && same_bytes);
    c.note = "bit-exact".into();
    Ok(c)
}

/// Shifted run with orientation noise at dt and dt/2 on a shared path.
fn flow_pair(base: &SimulationParams) -> Result<(Integrator, Integrator, SimulationParams)> {
    let mut p = with_dt(base, 1e-3);
    p.h_vec = [0.1; 3];
    let coarse = Integrator::new(p.clone(), StepScheme::transformed())?
        .with_substeps(2)?
        .with_burn_in(0);
    let fine = Integrator::new(with_dt(&p, 5e-4), StepScheme::transformed())?
        .with_substeps(1)?
        .with_burn_in(0);
    Ok((coarse, fine, p))
}

/// Time-averaged scalar-flow residual under dt halving, h = 0.1 (1,1,1).
pub fn scalar_flow(base: &SimulationParams) -> Result<Check> {
    let mut c = Check::new(7, "scalar-flow");
    let (coarse, fine, _) = flow_pair(base)?;
    let mut avg = Vec::new();
    for integ in [&coarse, &fine] {
        let tr = integ.run_until(
            start(integ, 1.0)?,
            0.5,
            RunOptions {
                stride: u64::MAX,
                residuals: true,
            },
        )?;
        let xs: Vec<f64> = tr.records.iter().filter_map(|r| r.scalar_flow_residual).collect();
        avg.push(xs.iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64);
    }
    c.val("mean_res_dt1e-3", avg[0]);
    c.val("mean_res_dt5e-4", avg[1]);
    c.val("ratio", avg[0] / avg[1]);
    c.require(in_band(avg[0] / avg[1], (1.5, 2.5)));
    c.note = "ratio in [1.5, 2.5]".into();
    Ok(c)
}

/// `max_t |v_direct - (u + z)|` under dt halving with matched paths.
pub fn transformed_direct(base: &SimulationParams) -> Result<Check> {
    let mut c = Check::new(8, "transformed-direct");
    let (coarse, fine, p) = flow_pair(base)?;
    let mut gaps = Vec::new();
    for (integ, dt) in [(&coarse, p.dt), (&fine, 0.5 * p.dt)] {
        let direct = Integrator::new(
            with_dt(&p, dt),
            StepScheme {
                mode: Mode::Direct,
                ..*integ.scheme()
            },
        )?
        .with_substeps(integ.substeps())?;
        let mut a = start(integ, 1.0)?;
        let mut b = start(&direct, 1.0)?;
        let n = integ.params().step_of(0.5)?;
        let mut gap = 0.0f64;
        for _ in 0..n {
            a = integ.step(&a)?;
            b = direct.step(&b)?;
            gap = gap.max((&a.state.v - &b.state.v).norm_l2());
        }
        gaps.push(gap);
    }
    c.val("max_gap_dt1e-3", gaps[0]);
    c.val("max_gap_dt5e-4", gaps[1]);
    c.val("ratio", gaps[0] / gaps[1]);
    c.require(in_band(gaps[0] / gaps[1], HALVING_BAND));
    c.note = "ratio in [1.7, 2.3]".into();
    Ok(c)
}

/// Ensemble variance of the leading OU coefficient over 1000 seeds.
pub fn ou_statistics(base: &SimulationParams) -> Result<Check> {
    let mut c = Check::new(9, "ou-statistics");
    let basis = build_mode_basis(base.grid, base.noise_mode_count)?
        .with_spectrum_exponent(base.noise_spectrum_exponent);
    let dt = 5e-4;
    let k = basis.alpha()[0] + base.beta;
    let burn = (20.0 / (k * dt)).ceil() as u64;
    let n = 1000u64;
    let mut xs = Vec::with_capacity(n as usize);
    for i in 0..n {
        let store = PathStore::new(base.seed.wrapping_add(i), dt, basis.len() + 1)?;
        xs.push(ou_stationary_init(&store, &basis, base.beta, 0.0, burn)?.coeffs[0]);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let oracle = basis.lambda(0) / (2.0 * k);
    let rel = (var - oracle).abs() / oracle;
    c.val("variance", var);
    c.val("oracle", oracle);
    c.val("rel_err", rel);
    c.require(rel < 0.1);
    c.note = format!("n={n}, dt={dt}, tol 10%");
    Ok(c)
}

fn order(errs: &[f64]) -> f64 {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min)
}

/// Manufactured solutions on 16, 32 and 64 cells per side; projection
/// idempotence and divergence.
pub fn operator_convergence(_base: &SimulationParams) -> Result<Check> {
    use std::f64::consts::PI;
    let mut c = Check::new(10, "operator-convergence");
    let (mut el, mut eg, mut ed) = (Vec::new(), Vec::new(), Vec::new());
    for n in [16, 32, 64] {
        let g = GridSpec::unit_square(n)?;
        let cc = Field::<1>::from_fn(g, |x, y| [(PI * x).cos() * (2.0 * PI * y).cos()]);
        let ss = Field::<1>::from_fn(g, |x, y| [(PI * x).sin() * (PI * y).sin()]);
        let lap_n = laplacian(&cc, Bc::Neumann);
        let lap_d = laplacian(&ss, Bc::Dirichlet);
        let e_lap = Field::<1>::from_fn(g, |x, y| [-5.0 * PI * PI * (PI * x).cos() * (2.0 * PI * y).cos()])
            .max_abs_diff(&lap_n)
            .max(
                Field::<1>::from_fn(g, |x, y| [-2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()])
                    .max_abs_diff(&lap_d),
            );
        el.push(e_lap);
        let gr = gradient_with(&cc, Bc::Neumann);
        let gx = Field::<2>::from_fn(g, |x, y| {
            [
                -PI * (PI * x).sin() * (2.0 * PI * y).cos(),
                -2.0 * PI * (PI * x).cos() * (2.0 * PI * y).sin(),
            ]
        });
        eg.push(gr.max_abs_diff(&gx));
        let v = Field::<2>::from_fn(g, |x, y| {
            [
                (PI * x).sin() * (PI * y).cos(),
                (2.0 * PI * y).sin() * (PI * x).cos(),
            ]
        });
        let dv = divergence_with(&v, Bc::Dirichlet);
        let dx = Field::<1>::from_fn(g, |x, y| {
            [PI * (PI * x).cos() * (PI * y).cos() + 2.0 * PI * (2.0 * PI * y).cos() * (PI * x).cos()]
        });
        ed.push(dv.max_abs_diff(&dx));
    }
    let (ol, og, od) = (order(&el), order(&eg), order(&ed));
    c.val("order_laplacian", ol);
    c.val("order_gradient", og);
    c.val("order_divergence", od);

    let g = GridSpec::unit_square(32)?;
    let v = Field::<2>::from_fn(g, |x, y| {
        [
            (PI * x).sin() * (3.0 * y).exp() * x,
            (PI * y).sin() * (2.0 * x).cos() + y * (1.0 - y),
        ]
    });
    let (pv, _) = leray_project(&v)?;
    let (ppv, _) = leray_project(&pv)?;
    let idem = ppv.max_abs_diff(&pv) / pv.max_abs();
    let div = divergence(&pv).norm_l2();
    c.val("projection_idempotence", idem);
    c.val("projected_div_l2", div);
    c.require(ol >= 1.9 && og >= 1.9 && od >= 1.9 && idem <= 1e-12 && div <= 1e-8);
    c.note = "orders >= 1.9, idempotence 1e-12, div 1e-8".into();
    Ok(c)
}

/// g(0) from R = 1 and R = 100 started at s = -8 with noise off; the
/// noisy table is produced twice and compared.
pub fn absorbing_ball(base: &SimulationParams) -> Result<Check> {
    let mut c = Check::new(11, "absorbing-ball");
    let p = with_dt(base, 5e-4);
    let s_list = [-1.0, -2.0, -4.0, -8.0];
    let radii = [1.0, 100.0];
    let quiet = absorbing_radius_estimate(&radii, &s_list, &[p.seed], &p, false, 0.0)?;
    let g1 = quiet.g(1.0, -8.0, p.seed).unwrap_or(f64::NAN);
    let g100 = quiet.g(100.0, -8.0, p.seed).unwrap_or(f64::NAN);
    let rel = (g1 - g100).abs() / g1.abs();
    c.val("g0_R1", g1);
    c.val("g0_R100", g100);
    c.val("rel_diff", rel);
    let noisy_s = [-1.0, -2.0];
    let a = absorbing_radius_estimate(&radii, &noisy_s, &[p.seed], &p, true, 0.0)?;
    let b = absorbing_radius_estimate(&radii, &noisy_s, &[p.seed], &p, true, 0.0)?;
    let same = a.rows.len() == b.rows.len()
        && a.rows.iter().zip(&b.rows).all(|(x, y)| x.g.to_bits() == y.g.to_bits() && x.status == y.status);
    c.val("noisy_table_repeatable", if same { 1.0 } else { 0.0 });
    if let Some(x) = a.g(100.0, -2.0, p.seed) {
        c.val("noisy_g0_R100_s-2", x);
    }
    c.require(rel < 0.2 && same);
    c.note = "noise-off tol 20%; noisy table informational".into();
    Ok(c)
}

/// Response to perturbations of size delta, delta/2, delta/4 over T=0.5
/// along one noise path.
pub fn lipschitz(base: &SimulationParams) -> Result<Check> {
    let mut c = Check::new(12, "lipschitz");
    let mut p = with_dt(base, 1e-3);
    if p.h_norm() == 0.0 {
        p.h_vec = [0.1; 3];
    }
    let integ = Integrator::new(p.clone(), StepScheme::transformed())?;
    let (v, d) = initial_datum(integ.basis(), 1.0);
    let dv: VectorField2 = integ.basis().mode(1).clone();
    let dd: VectorField3 = Field::from_fn(p.grid, |x, y| [x * y, (3.0 * x).cos(), y * y]);
    let n = p.step_of(0.5)? as u64;
    let base_snap = integ.prepare(integ.state_at(0.0, v.clone(), d.clone())?)?;
    let end = integ.advance(base_snap.clone(), n)?;
    let mut ratios = Vec::new();
    for delta in [1e-2, 5e-3, 2.5e-3] {
        let v1 = &v + &dv.scaled(delta);
        let d1 = &d + &dd.scaled(delta);
        let s1 = integ.prepare(integ.state_at(0.0, v1, d1)?)?;
        let e1 = integ.advance(s1.clone(), n)?;
        let r = state_distance(&end.state, &e1.state) / state_distance(&base_snap.state, &s1.state);
        c.val(format!("ratio_delta{delta}"), r);
        ratios.push(r);
    }
    let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
    let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
    c.val("spread", hi / lo);
    c.require(lo > 0.0 && hi / lo <= 2.0);
    c.note = "ratios within a factor 2".into();
    Ok(c)
}
