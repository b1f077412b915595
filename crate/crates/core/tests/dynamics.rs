use nematic_core::diagnostics::{
    cocycle_check, energy_balance_residual, gronwall_log_check, ito_residual_l, ito_step_residual,
    lebesgue_norm, scalar_flow_residual, scalar_flow_step_residual,
};
use nematic_core::integrator::{
    rotate_euler_heun, rotate_orientation, Integrator, Mode, Rotation, RunOptions, StepScheme,
};
use nematic_core::ops::divergence;
use nematic_core::{GridSpec, SimulationParams, VectorField2, VectorField3};

fn params(n: usize, dt: f64) -> SimulationParams {
    SimulationParams {
        grid: GridSpec::unit_square(n).unwrap(),
        dt,
        noise_mode_count: 4,
        ..SimulationParams::default()
    }
}

const EVERY: RunOptions = RunOptions {
    stride: 1,
    residuals: true,
};

#[test]
fn constant_director_follows_radial_ode() {
    // r' = -gamma (r^2 - 1) r  =>  r^2 = 1 / (1 + (1/r0^2 - 1) e^{-2 gamma t})
    let p = params(8, 5e-4);
    let integ = Integrator::new(p.clone(), StepScheme::default()).unwrap().silenced();
    let r0: f64 = 2.0;
    let d0 = VectorField3::from_fn(p.grid, |_, _| [r0, 0.0, 0.0]);
    let s = integ
        .prepare(integ.state_at(0.0, VectorField2::zeros(p.grid), d0).unwrap())
        .unwrap();
    let tr = integ.run_until(s, 1.0, RunOptions { stride: 1, residuals: false }).unwrap();
    let mut worst = 0.0f64;
    let mut prev = f64::INFINITY;
    for snap in &tr.snapshots {
        let t = snap.t();
        let exact = (1.0 / (1.0 + (1.0 / (r0 * r0) - 1.0) * (-2.0 * t).exp())).sqrt();
        let r = snap.state.d.at(0)[0];
        assert!(r <= prev && r >= 1.0);
        prev = r;
        worst = worst.max((r - exact).abs());
        assert!(snap.state.v.max_abs() < 1e-14);
    }
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn stokes_mode_decays_at_continuum_rate() {
    // lowest Stokes eigenvalue of the unit square
    const LAMBDA1: f64 = 52.3447;
    let mut p = params(64, 1e-3);
    p.noise_mode_count = 1;
    let integ = Integrator::new(p.clone(), StepScheme::default()).unwrap().silenced();
    let v0 = integ.basis().mode(0).scaled(0.05);
    let d0 = VectorField3::from_fn(p.grid, |_, _| [1.0, 0.0, 0.0]);
    let s = integ.prepare(integ.state_at(0.0, v0, d0).unwrap()).unwrap();
    let tr = integ.run_until(s, 0.05, RunOptions { stride: 1, residuals: false }).unwrap();
    for w in tr.records.windows(2) {
        assert!(w[1].v_l2 < w[0].v_l2);
    }
    for snap in &tr.snapshots {
        assert!(divergence(&snap.state.v).norm_l2() <= 1e-8);
    }
    let (a, b) = (&tr.records[10], tr.records.last().unwrap());
    let rate = (a.v_l2 / b.v_l2).ln() / (b.t - a.t);
    assert!((rate - LAMBDA1).abs() / LAMBDA1 < 0.05, "rate {rate}");
}

#[test]
fn noise_only_orientation_is_rotation() {
    let mut p = params(8, 1e-3);
    p.h_vec = [0.3, -0.4, 1.2];
    let scheme = StepScheme {
        orientation_relaxation: false,
        ..StepScheme::default()
    };
    let integ = Integrator::new(p.clone(), scheme).unwrap().with_noise(false, true);
    // spatially constant director: no elastic force, so v stays zero
    let d0 = VectorField3::from_fn(p.grid, |_, _| [0.6, 0.0, 0.8]);
    let s = integ
        .prepare(integ.state_at(0.0, VectorField2::zeros(p.grid), d0.clone()).unwrap())
        .unwrap();
    let end = integ.advance(s, 200).unwrap();
    let mut seq = d0.clone();
    for k in 0..200 {
        seq = rotate_orientation(&seq, p.h_vec, integ.w2_increment(k));
    }
    assert_eq!(end.state.d.max_abs_diff(&seq), 0.0);
    assert_eq!(end.state.v.max_abs(), 0.0);
    let once = rotate_orientation(&d0, p.h_vec, integ.w2_at_step(200));
    assert!(end.state.d.max_abs_diff(&once) < 1e-12);

    // a non-constant director under the orientation substep alone
    let d = VectorField3::from_fn(p.grid, |x, y| [x, y * y, 1.0 - x * y]);
    let out = integ.step_orientation(&d, &VectorField2::zeros(p.grid), 0.37).unwrap();
    assert!(out.max_abs_diff(&rotate_orientation(&d, p.h_vec, 0.37)) == 0.0);
}

#[test]
fn euler_heun_rotation_converges_to_exact() {
    let g = GridSpec::unit_square(8).unwrap();
    let d = VectorField3::from_fn(g, |x, y| [x + 0.5, y, 0.3]);
    let h = [0.2, 0.7, -0.4];
    let errs: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&w| rotate_euler_heun(&d, h, w).max_abs_diff(&rotate_orientation(&d, h, w)))
        .collect();
    // one Heun step is third-order locally
    assert!(errs[0] / errs[1] > 7.0 && errs[1] / errs[2] > 7.0, "{errs:?}");
}

#[test]
fn projected_velocity_every_step() {
    let mut p = params(16, 1e-3);
    p.h_vec = [0.5, 0.5, 0.0];
    for mode in [Mode::Direct, Mode::Transformed] {
        let integ = Integrator::new(p.clone(), StepScheme { mode, ..StepScheme::default() }).unwrap();
        let d0 = VectorField3::from_fn(p.grid, |x, y| [x.cos(), y.sin(), 0.2]);
        let s = integ
            .prepare(integ.state_at(0.0, VectorField2::zeros(p.grid), d0).unwrap())
            .unwrap();
        let tr = integ.run_steps(s, 30, RunOptions { stride: 1, residuals: false }).unwrap();
        assert!(tr.records.iter().all(|r| r.div_v_l2 <= 1e-8));
        assert!(tr.records.last().unwrap().v_l2 > 0.0);
    }
}

#[test]
fn zero_state_stays_zero() {
    let p = params(8, 1e-3);
    let integ = Integrator::new(p.clone(), StepScheme::default()).unwrap().silenced();
    let s = integ
        .prepare(integ.state_at(0.0, VectorField2::zeros(p.grid), VectorField3::zeros(p.grid)).unwrap())
        .unwrap();
    let tr = integ.run_steps(s, 10, EVERY).unwrap();
    let last = tr.last();
    assert_eq!(last.state.v.max_abs(), 0.0);
    assert_eq!(last.state.d.max_abs(), 0.0);
    assert!(ito_residual_l(&tr, &p).unwrap().iter().all(|r| *r == 0.0));
    assert!(energy_balance_residual(&tr, &p).unwrap().iter().all(|r| *r == 0.0));
}

#[test]
fn rotation_run_keeps_lebesgue_norm() {
    let mut p = params(8, 1e-3);
    p.h_vec = [1.0, 0.0, 0.0];
    let scheme = StepScheme {
        orientation_relaxation: false,
        ..StepScheme::default()
    };
    let integ = Integrator::new(p.clone(), scheme).unwrap().with_noise(false, true);
    let d0 = VectorField3::from_fn(p.grid, |_, _| [0.3, 1.1, -0.2]);
    let s = integ
        .prepare(integ.state_at(0.0, VectorField2::zeros(p.grid), d0).unwrap())
        .unwrap();
    let tr = integ.run_steps(s, 50, EVERY).unwrap();
    let pot = p.potential().unwrap();
    // residual evaluated with gamma hooked to 0, matching the dynamics
    let hooked = SimulationParams { gamma_c: 0.0, ..p.clone() };
    for w in tr.snapshots.windows(2) {
        let a = lebesgue_norm(&w[0].state.d, 6).unwrap();
        let b = lebesgue_norm(&w[1].state.d, 6).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        let r = ito_step_residual(&w[0].state, &w[1].state, &hooked, &pot).unwrap();
        assert!(r.residual.abs() < 1e-9, "{}", r.residual);
    }
}

#[test]
fn scalar_flow_vanishes_without_rotation_axis() {
    let p = params(8, 1e-3);
    let integ = Integrator::new(p.clone(), StepScheme::transformed()).unwrap();
    let d0 = VectorField3::from_fn(p.grid, |x, y| [x, y, 1.0]);
    let s = integ
        .prepare(integ.state_at(0.0, VectorField2::zeros(p.grid), d0).unwrap())
        .unwrap();
    let tr = integ.run_steps(s, 5, EVERY).unwrap();
    let pot = p.potential().unwrap();
    for w in tr.snapshots.windows(2) {
        let r = scalar_flow_step_residual(&w[0].state, &w[1].state, 0.4, 0.01, &p, &pot).unwrap();
        assert_eq!(r, 0.0);
    }
    assert!(scalar_flow_residual(&tr, &integ).unwrap().iter().all(|r| *r == 0.0));
}

#[test]
fn scalar_flow_pure_rotation_is_exact() {
    // v = u = z = 0 and gamma hooked to 0: e^{W_2} (h . d) only picks up the
    // exponential factor, which the tanh weight reproduces exactly
    let mut p = params(8, 1e-3);
    p.h_vec = [0.5, 0.5, 0.5];
    let scheme = StepScheme {
        mode: Mode::Transformed,
        orientation_relaxation: false,
        ..StepScheme::default()
    };
    let integ = Integrator::new(p.clone(), scheme).unwrap().with_noise(false, true);
    let d0 = VectorField3::from_fn(p.grid, |_, _| [1.0, -0.5, 0.25]);
    let s = integ
        .prepare(integ.state_at(0.0, VectorField2::zeros(p.grid), d0).unwrap())
        .unwrap();
    let tr = integ.run_steps(s, 100, RunOptions { stride: 1, residuals: false }).unwrap();
    let pot = p.potential().unwrap();
    let hooked = SimulationParams { gamma_c: 0.0, ..p.clone() };
    for w in tr.snapshots.windows(2) {
        let k = w[0].step();
        let r = scalar_flow_step_residual(
            &w[0].state,
            &w[1].state,
            integ.w2_at_step(k),
            integ.w2_increment(k),
            &hooked,
            &pot,
        )
        .unwrap();
        assert!(r < 1e-10, "step {k}: {r}");
    }
}

#[test]
fn cocycle_trivial_splits() {
    let mut p = params(8, 1e-3);
    p.h_vec = [0.1, 0.2, 0.3];
    let integ = Integrator::new(p.clone(), StepScheme::transformed()).unwrap();
    let d0 = VectorField3::from_fn(p.grid, |x, y| [1.0, x - y, 0.0]);
    let s = integ
        .prepare(integ.state_at(-0.01, VectorField2::zeros(p.grid), d0).unwrap())
        .unwrap();
    assert_eq!(cocycle_check(&integ, -0.01, -0.01, 0.02, &s).unwrap(), 0.0);
    assert_eq!(cocycle_check(&integ, -0.01, 0.02, 0.02, &s).unwrap(), 0.0);
    assert_eq!(cocycle_check(&integ, -0.01, 0.007, 0.02, &s).unwrap(), 0.0);
    assert!(cocycle_check(&integ, -0.01, 0.03, 0.02, &s).is_err());
}

#[test]
fn large_datum_log_energy_decays() {
    let mut p = params(16, 5e-4);
    p.h_vec = [0.1; 3];
    let integ = Integrator::new(p.clone(), StepScheme::transformed()).unwrap();
    let (v, d) = nematic_core::attractor::initial_datum(integ.basis(), 100.0);
    let s = integ.prepare(integ.state_at(0.0, v, d).unwrap()).unwrap();
    let tr = integ.run_until(s, 0.5, RunOptions { stride: 1, residuals: false }).unwrap();
    let fit = gronwall_log_check(&tr);
    assert!(fit.c > 0.0 && fit.violations == 0, "{fit:?}");
    assert!(tr.records.last().unwrap().log_energy < tr.records[0].log_energy);
}

#[test]
fn exact_rotation_matches_closed_form() {
    let g = GridSpec::unit_square(8).unwrap();
    let d = VectorField3::from_fn(g, |_, _| [1.0, 0.0, 0.0]);
    let out = rotate_orientation(&d, [0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2);
    let [a, b, c] = out.at(5);
    assert!(a.abs() < 1e-15 && (b + 1.0).abs() < 1e-15 && c == 0.0);
    let scheme = StepScheme {
        rotation: Rotation::EulerHeun,
        ..StepScheme::default()
    };
    assert!(scheme.validate().is_ok());
}
