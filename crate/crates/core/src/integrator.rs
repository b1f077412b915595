//! Time stepping for the direct system and for the shifted system
//! `v = u + z` driven by the OU convolution.
//!
//! One step: orientation first (implicit diffusion with explicit transport,
//! then the pointwise reaction, then the exact rotation by the `W_2`
//! increment), then velocity (implicit viscosity, explicit skew transport,
//! elastic force from the new orientation, noise or OU forcing, projection).

use crate::diagnostics::{
    energy_step_residual, ito_step_residual, scalar_flow_step_residual, DiagnosticsRecord,
};
use crate::error::{Error, Result};
use crate::model::{Field, SimulationParams, State, VectorField2, VectorField3};
use crate::noise::{
    build_mode_basis, ou_stationary_init_bins, ou_step_bins, w1_coefficients, ModeBasis, OuState,
    PathStore,
};
use crate::ops::{
    advect, chemical_potential, elastic_force, laplacian, leray_project_with, transport_adjoint,
    Bc, Operator, SolverKind, Solvers, SOLVER_REL_TOL,
};
use crate::potential::PotentialCoeffs;

/// Overflow guard on every sample of `v` and `d`.
pub const BLOW_UP_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Direct,
    Transformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rotation {
    #[default]
    ExactExponential,
    EulerHeun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reaction {
    /// Backward Euler on the pointwise relaxation `d' = -gamma f(d)`.
    #[default]
    Implicit,
    /// `-gamma f(d)` evaluated at the old state.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ElasticForm {
    /// `-A_d*(lap d - f(d))`, the adjoint of the orientation transport.
    #[default]
    Balanced,
    /// `-div(grad d (.) grad d)` from the stress tensor.
    Stress,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepScheme {
    pub mode: Mode,
    /// Weight of the implicit part of every Laplacian, in `[0.5, 1]`.
    pub theta_implicit: f64,
    pub rotation: Rotation,
    pub reaction: Reaction,
    pub elastic: ElasticForm,
    pub solver: SolverKind,
    /// When false the orientation diffusion and reaction are switched off
    /// (`gamma` treated as 0), leaving transport and rotation.
    pub orientation_relaxation: bool,
}

impl Default for StepScheme {
    fn default() -> Self {
        StepScheme {
            mode: Mode::Direct,
            theta_implicit: 1.0,
            rotation: Rotation::ExactExponential,
            reaction: Reaction::Implicit,
            elastic: ElasticForm::Balanced,
            solver: SolverKind::Spectral,
            orientation_relaxation: true,
        }
    }
}

impl StepScheme {
    pub fn transformed() -> Self {
        StepScheme {
            mode: Mode::Transformed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.theta_implicit) {
            return Err(Error::InvalidParams(vec![format!(
                "theta_implicit must lie in [0.5, 1] (got {})",
                self.theta_implicit
            )]));
        }
        Ok(())
    }
}

/// Shifted-system part of the carried state.
#[derive(Debug, Clone, PartialEq)]
pub struct Shifted {
    pub u: VectorField2,
    pub z: OuState,
}

/// Everything needed to continue a run: the physical state plus, in
/// transformed mode, `u` and the OU coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: State,
    pub shifted: Option<Shifted>,
}

impl Snapshot {
    pub fn t(&self) -> f64 {
        self.state.t
    }

    pub fn step(&self) -> i64 {
        self.state.step
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub mode: Mode,
    pub stride: u64,
    pub dt: f64,
    pub noise_free: bool,
    /// Snapshots at every `stride` steps, starting with the initial one; the
    /// final state is always included.
    pub snapshots: Vec<Snapshot>,
    /// One record per step, starting with the initial state.
    pub records: Vec<DiagnosticsRecord>,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory holds the initial snapshot")
    }
}

/// Which per-step residuals to attach to the records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub stride: u64,
    pub residuals: bool,
}

/// `R(-|h| dW, h/|h|) d` pointwise (Rodrigues); identity for `h = 0`.
pub fn rotate_orientation(d: &VectorField3, h: [f64; 3], dw2: f64) -> VectorField3 {
    let hn = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
    if hn == 0.0 || dw2 == 0.0 {
        return d.clone();
    }
    let k = [h[0] / hn, h[1] / hn, h[2] / hn];
    let phi = -hn * dw2;
    let (s, c) = phi.sin_cos();
    let mut out = d.clone();
    for idx in 0..d.grid().len() {
        let x = d.at(idx);
        let kx = [
            k[1] * x[2] - k[2] * x[1],
            k[2] * x[0] - k[0] * x[2],
            k[0] * x[1] - k[1] * x[0],
        ];
        let kd = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
        let r: [f64; 3] = std::array::from_fn(|i| x[i] * c + kx[i] * s + k[i] * kd * (1.0 - c));
        out.set(idx, r);
    }
    out
}

/// Stratonovich Euler-Heun step of `dd = (d x h) o dW`.
pub fn rotate_euler_heun(d: &VectorField3, h: [f64; 3], dw2: f64) -> VectorField3 {
    let cross = |x: [f64; 3]| {
        [
            x[1] * h[2] - x[2] * h[1],
            x[2] * h[0] - x[0] * h[2],
            x[0] * h[1] - x[1] * h[0],
        ]
    };
    let mut out = d.clone();
    for idx in 0..d.grid().len() {
        let x = d.at(idx);
        let a = cross(x);
        let pred: [f64; 3] = std::array::from_fn(|i| x[i] + a[i] * dw2);
        let b = cross(pred);
        out.set(idx, std::array::from_fn(|i| x[i] + 0.5 * (a[i] + b[i]) * dw2));
    }
    out
}

pub struct Integrator {
    params: SimulationParams,
    pot: PotentialCoeffs,
    scheme: StepScheme,
    store: PathStore,
    /// Copy of `store` used for the velocity noise; silenced when it is off.
    w1_store: PathStore,
    w2_on: bool,
    basis: ModeBasis,
    solvers: Solvers,
    bins: u32,
    burn_in: Option<u64>,
}

impl Integrator {
    /// Builds the mode basis, the path store (one bin per step) and the
    /// solvers for `params.grid`.
    pub fn new(params: SimulationParams, scheme: StepScheme) -> Result<Self> {
        let params = params.checked()?;
        scheme.validate()?;
        let pot = params.potential()?;
        let basis = build_mode_basis(params.grid, params.noise_mode_count)?
            .with_spectrum_exponent(params.noise_spectrum_exponent);
        let store = PathStore::new(params.seed, params.dt, params.noise_mode_count + 1)?;
        let solvers = Solvers::new(params.grid, scheme.solver);
        Ok(Integrator {
            params,
            pot,
            scheme,
            w1_store: store.clone(),
            store,
            w2_on: true,
            basis,
            solvers,
            bins: 1,
            burn_in: None,
        })
    }

    /// Refines the increment bins: each step consumes `m` bins of width
    /// `dt / m`. Runs at `dt` and `dt / 2` with bins `2m` and `m` then see
    /// the same Brownian path.
    pub fn with_substeps(mut self, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParams(vec!["substeps must be positive".into()]));
        }
        let w1_on = !self.w1_store.is_silent();
        self.store = PathStore::new(
            self.params.seed,
            self.params.dt / m as f64,
            self.params.noise_mode_count + 1,
        )?;
        self.bins = m;
        let w2_on = self.w2_on;
        Ok(self.with_noise(w1_on, w2_on))
    }

    /// Turns all noise off (both Wiener processes).
    pub fn silenced(self) -> Self {
        self.with_noise(false, false)
    }

    /// Switches the velocity noise `W_1` (and with it the OU forcing) and
    /// the orientation noise `W_2` independently.
    pub fn with_noise(mut self, w1: bool, w2: bool) -> Self {
        self.w1_store = if w1 {
            self.store.clone()
        } else {
            self.store.clone().silenced()
        };
        self.w2_on = w2;
        self
    }

    /// OU burn-in length in master bins (default `20 / ((alpha_1 + beta) dt)`).
    pub fn with_burn_in(mut self, bins: u64) -> Self {
        self.burn_in = Some(bins);
        self
    }

    pub fn params(&self) -> &SimulationParams {
        &self.params
    }

    pub fn potential(&self) -> &PotentialCoeffs {
        &self.pot
    }

    pub fn scheme(&self) -> &StepScheme {
        &self.scheme
    }

    pub fn store(&self) -> &PathStore {
        &self.store
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    pub fn solvers(&self) -> &Solvers {
        &self.solvers
    }

    pub fn substeps(&self) -> u32 {
        self.bins
    }

    pub fn noise_free(&self) -> bool {
        self.w1_store.is_silent() && !self.w2_on
    }

    pub fn burn_in_bins(&self) -> u64 {
        self.burn_in.unwrap_or_else(|| {
            let k = self.basis.alpha()[0] + self.params.beta;
            (20.0 / (k * self.store.dt_master())).ceil().max(1.0) as u64
        })
    }

    fn first_bin(&self, step: i64) -> i64 {
        step * self.bins as i64
    }

    /// `W_2` at the start of step `step`.
    pub fn w2_at_step(&self, step: i64) -> f64 {
        if self.w2_on {
            self.store.w2_at_bin(self.first_bin(step))
        } else {
            0.0
        }
    }

    /// `W_2` increment consumed by step `step`.
    pub fn w2_increment(&self, step: i64) -> f64 {
        if self.w2_on {
            self.store.coarse_unchecked(0, self.first_bin(step), self.bins)
        } else {
            0.0
        }
    }

    /// Wraps an initial state. In transformed mode `z` is initialized from
    /// its stationary approximation at the state's time and `u = v - z`.
    pub fn prepare(&self, state: State) -> Result<Snapshot> {
        if *state.grid() != self.params.grid {
            return Err(Error::GridMismatch);
        }
        if !(state.v.is_finite() && state.d.is_finite()) {
            return Err(Error::NonFinite("initial state"));
        }
        let shifted = match self.scheme.mode {
            Mode::Direct => None,
            Mode::Transformed => {
                let z = ou_stationary_init_bins(
                    &self.w1_store,
                    &self.basis,
                    self.params.beta,
                    self.first_bin(state.step),
                    self.burn_in_bins(),
                    self.bins,
                )?;
                let zf = z.field(&self.basis)?;
                Some(Shifted {
                    u: &state.v - &zf,
                    z,
                })
            }
        };
        Ok(Snapshot { state, shifted })
    }

    /// Initial state at time `t0` (must lie on the step grid).
    pub fn state_at(&self, t0: f64, v: VectorField2, d: VectorField3) -> Result<State> {
        State::new(self.params.step_of(t0)?, self.params.dt, v, d)
    }

    fn gamma_eff(&self) -> f64 {
        if self.scheme.orientation_relaxation {
            self.params.gamma_c
        } else {
            0.0
        }
    }

    fn helmholtz(&self, bc: Bc, b: Vec<f64>, c: f64) -> Result<Vec<f64>> {
        if c == 0.0 {
            return Ok(b);
        }
        self.solvers.solve(Operator::Laplacian(bc), &b, 1.0, c, SOLVER_REL_TOL)
    }

    /// Orientation substep with transport velocity `v_eff` and rotation
    /// increment `dw2`.
    pub fn step_orientation(
        &self,
        d: &VectorField3,
        v_eff: &VectorField2,
        dw2: f64,
    ) -> Result<VectorField3> {
        let dt = self.params.dt;
        let g = self.gamma_eff();
        let th = self.scheme.theta_implicit;
        let mut rhs = d.clone();
        if g != 0.0 && th < 1.0 {
            rhs.axpy((1.0 - th) * g * dt, &laplacian(d, Bc::Neumann));
        }
        if g != 0.0 && self.scheme.reaction == Reaction::Explicit {
            rhs.axpy(-g * dt, &self.pot.f_field(d));
        }
        if v_eff.max_abs() != 0.0 {
            rhs.axpy(-dt, &advect(v_eff, d, Bc::Neumann)?);
        }
        let c = th * g * dt;
        let comps = rhs.into_components();
        let mut out = [Vec::new(), Vec::new(), Vec::new()];
        for (o, b) in out.iter_mut().zip(comps) {
            *o = self.helmholtz(Bc::Neumann, b, c)?;
        }
        let mut dn = Field::from_parts(self.params.grid, out);
        if g != 0.0 && self.scheme.reaction == Reaction::Implicit {
            let tau = g * dt;
            for k in 0..dn.grid().len() {
                let x = dn.at(k);
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                if r > 0.0 {
                    let s = self.pot.implicit_radial(r, tau) / r;
                    dn.set(k, [x[0] * s, x[1] * s, x[2] * s]);
                }
            }
        }
        Ok(match self.scheme.rotation {
            Rotation::ExactExponential => rotate_orientation(&dn, self.params.h_vec, dw2),
            Rotation::EulerHeun => rotate_euler_heun(&dn, self.params.h_vec, dw2),
        })
    }

    fn elastic(&self, d_old: &VectorField3, d_new: &VectorField3) -> Result<VectorField2> {
        Ok(match self.scheme.elastic {
            ElasticForm::Balanced => {
                let w = chemical_potential(d_new, &self.pot);
                transport_adjoint(d_old, &w, Bc::Neumann)?.scaled(-1.0)
            }
            ElasticForm::Stress => elastic_force(d_new).scaled(-1.0),
        })
    }

    /// `(I - theta mu dt lap) x = rhs`, then projection.
    fn viscous_project(&self, rhs: VectorField2) -> Result<VectorField2> {
        let c = self.scheme.theta_implicit * self.params.mu * self.params.dt;
        let [a, b] = rhs.into_components();
        let sol = Field::from_parts(
            self.params.grid,
            [self.helmholtz(Bc::Dirichlet, a, c)?, self.helmholtz(Bc::Dirichlet, b, c)?],
        );
        Ok(leray_project_with(&self.solvers, &sol)?.0)
    }

    /// Explicit part shared by both modes: `w + (1-theta) mu dt lap w -
    /// dt advect(a, a) + dt lambda F`.
    fn velocity_rhs(
        &self,
        base: &VectorField2,
        transport: &VectorField2,
        d_old: &VectorField3,
        d_new: &VectorField3,
    ) -> Result<VectorField2> {
        let dt = self.params.dt;
        let th = self.scheme.theta_implicit;
        let mut rhs = base.clone();
        if th < 1.0 {
            rhs.axpy((1.0 - th) * self.params.mu * dt, &laplacian(base, Bc::Dirichlet));
        }
        if transport.max_abs() != 0.0 {
            rhs.axpy(-dt, &advect(transport, transport, Bc::Dirichlet)?);
        }
        if self.params.lambda_c != 0.0 {
            rhs.axpy(self.params.lambda_c * dt, &self.elastic(d_old, d_new)?);
        }
        Ok(rhs)
    }

    /// Direct-mode velocity substep given the new orientation.
    pub fn step_velocity(
        &self,
        state: &State,
        d_new: &VectorField3,
    ) -> Result<VectorField2> {
        let mut rhs = self.velocity_rhs(&state.v, &state.v, &state.d, d_new)?;
        if !self.w1_store.is_silent() {
            let c = w1_coefficients(&self.w1_store, &self.basis, self.first_bin(state.step), self.bins)?;
            rhs.axpy(1.0, &self.basis.reconstruct(&c)?);
        }
        self.viscous_project(rhs)
    }

    /// `beta z + mu lap z + A z` for OU coefficients `z`.
    fn ou_forcing(&self, z: &OuState) -> Result<VectorField2> {
        let zf = z.field(&self.basis)?;
        let mut f = zf.scaled(self.params.beta);
        f.axpy(self.params.mu, &laplacian(&zf, Bc::Dirichlet));
        f.axpy(1.0, &self.basis.stokes_apply(&z.coeffs)?);
        Ok(f)
    }

    fn check(&self, s: &State) -> Result<()> {
        for (name, m) in [("v", s.v.max_abs()), ("d", s.d.max_abs())] {
            if !(m <= BLOW_UP_LIMIT) {
                return Err(Error::BlowUp {
                    t: s.t,
                    quantity: name,
                    value: m,
                });
            }
        }
        Ok(())
    }

    /// One step.
    pub fn step(&self, snap: &Snapshot) -> Result<Snapshot> {
        let state = &snap.state;
        let dw2 = self.w2_increment(state.step);
        let next_step = state.step + 1;
        let out = match (&snap.shifted, self.scheme.mode) {
            (None, Mode::Direct) => {
                let d_new = self.step_orientation(&state.d, &state.v, dw2)?;
                let v_new = self.step_velocity(state, &d_new)?;
                Snapshot {
                    state: State::new(next_step, self.params.dt, v_new, d_new)?,
                    shifted: None,
                }
            }
            (Some(sh), Mode::Transformed) => {
                let dt = self.params.dt;
                let th = self.scheme.theta_implicit;
                let zf = sh.z.field(&self.basis)?;
                let w = &sh.u + &zf;
                let d_new = self.step_orientation(&state.d, &w, dw2)?;
                let z_new = ou_step_bins(&sh.z, &self.w1_store, &self.basis, self.bins)?;
                let mut rhs = self.velocity_rhs(&sh.u, &w, &state.d, &d_new)?;
                rhs.axpy(th * dt, &self.ou_forcing(&z_new)?);
                if th < 1.0 {
                    rhs.axpy((1.0 - th) * dt, &self.ou_forcing(&sh.z)?);
                }
                let u_new = self.viscous_project(rhs)?;
                let v_new = &u_new + &z_new.field(&self.basis)?;
                Snapshot {
                    state: State::new(next_step, dt, v_new, d_new)?,
                    shifted: Some(Shifted { u: u_new, z: z_new }),
                }
            }
            _ => {
                return Err(Error::Precondition(
                    "snapshot does not match the integrator mode".into(),
                ))
            }
        };
        self.check(&out.state)?;
        Ok(out)
    }

    /// `n` steps without recording.
    pub fn advance(&self, mut snap: Snapshot, n: u64) -> Result<Snapshot> {
        for _ in 0..n {
            snap = self.step(&snap)?;
        }
        Ok(snap)
    }

    /// Runs `n` steps, keeping every `stride`-th snapshot and a record per
    /// step.
    pub fn run_steps(&self, initial: Snapshot, n: u64, opts: RunOptions) -> Result<Trajectory> {
        let stride = opts.stride.max(1);
        let mut traj = Trajectory {
            mode: self.scheme.mode,
            stride,
            dt: self.params.dt,
            noise_free: self.noise_free(),
            snapshots: vec![initial.clone()],
            records: vec![DiagnosticsRecord::of(&initial.state, &self.params, &self.pot)],
        };
        let mut cur = initial;
        let residual_flow = opts.residuals
            && self.scheme.mode == Mode::Transformed
            && self.params.h_norm() > 0.0;
        let mut w2 = if residual_flow {
            self.w2_at_step(cur.state.step)
        } else {
            0.0
        };
        for i in 1..=n {
            let next = self.step(&cur)?;
            let mut rec = DiagnosticsRecord::of(&next.state, &self.params, &self.pot);
            if opts.residuals {
                rec.ito_residual =
                    Some(ito_step_residual(&cur.state, &next.state, &self.params, &self.pot)?.residual);
                if self.noise_free() {
                    rec.energy_residual =
                        Some(energy_step_residual(&cur.state, &next.state, &self.params, &self.pot));
                }
                if residual_flow {
                    let dw = self.w2_increment(cur.state.step);
                    rec.scalar_flow_residual = Some(scalar_flow_step_residual(
                        &cur.state,
                        &next.state,
                        w2,
                        dw,
                        &self.params,
                        &self.pot,
                    )?);
                    w2 += dw;
                }
            }
            traj.records.push(rec);
            if i % stride == 0 || i == n {
                traj.snapshots.push(next.clone());
            }
            cur = next;
        }
        Ok(traj)
    }

    /// Runs from the snapshot's time to `t1`.
    pub fn run_until(&self, initial: Snapshot, t1: f64, opts: RunOptions) -> Result<Trajectory> {
        let k1 = self.params.step_of(t1)?;
        let k0 = initial.state.step;
        if k1 < k0 {
            return Err(Error::Precondition(format!(
                "end time {t1} precedes start time {}",
                initial.state.t
            )));
        }
        self.run_steps(initial, (k1 - k0) as u64, opts)
    }
}

/// Convenience driver: runs `initial` over `[t0, t1]` with the given scheme
/// and path store (whose bin width must divide `dt`).
pub fn run(
    initial: State,
    t0: f64,
    t1: f64,
    params: &SimulationParams,
    scheme: StepScheme,
    store: &PathStore,
) -> Result<Trajectory> {
    let ratio = params.dt / store.dt_master();
    let m = ratio.round();
    if (ratio - m).abs() > 1e-9 * m || m < 1.0 {
        return Err(Error::Precondition(
            "path store bin width must divide the time step".into(),
        ));
    }
    let mut p = params.clone();
    p.seed = store.seed();
    let mut integ = Integrator::new(p, scheme)?.with_substeps(m as u32)?;
    if store.is_silent() {
        integ = integ.silenced();
    }
    let k0 = params.step_of(t0)?;
    if initial.step != k0 {
        return Err(Error::Precondition(format!(
            "initial state is at t = {}, not t0 = {t0}",
            initial.t
        )));
    }
    let snap = integ.prepare(initial)?;
    integ.run_until(
        snap,
        t1,
        RunOptions {
            stride: 1,
            residuals: false,
        },
    )
}
