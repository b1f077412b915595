//! Pullback and absorbing-ball experiments, and seed ensembles.

use rayon::prelude::*;

use crate::diagnostics::state_distance;
use crate::error::{Error, Result};
use crate::integrator::{Integrator, Mode, Snapshot, StepScheme};
use crate::model::{GridSpec, SimulationParams, State, VectorField2, VectorField3};
use crate::noise::ModeBasis;
use crate::ops::{dirichlet_form, Bc};

/// Smooth unit director field with zero normal derivative on the walls,
/// tilted away from `(1, 0, 0)` by angles proportional to `amp`.
pub fn director_field(grid: GridSpec, amp: f64) -> VectorField3 {
    let (lx, ly) = (grid.lx, grid.ly);
    let pi = std::f64::consts::PI;
    VectorField3::from_fn(grid, |x, y| {
        let cx = (pi * x / lx).cos();
        let cy = (pi * y / ly).cos();
        let theta = amp * (0.6 * cx * cy + 0.3 * (2.0 * pi * x / lx).cos());
        let phi = 0.5 * pi - amp * 0.4 * cy;
        [theta.cos() * phi.sin(), theta.sin() * phi.sin(), phi.cos()]
    })
}

/// Initial datum of magnitude `r`: velocity `0.1 r e_1` (`e_1` the leading
/// noise mode) and director `max(1, r) n`, where `n` is [`director_field`]
/// with tilt `min(1, r)`. `r = 0` is the resting constant minimizer
/// `(1, 0, 0)` of the Ginzburg-Landau potential; for `r >= 1` the
/// magnitude `|d| = r` is uniform in space.
pub fn initial_datum(basis: &ModeBasis, r: f64) -> (VectorField2, VectorField3) {
    let g = *basis.grid();
    (
        basis.mode(0).scaled(0.1 * r),
        director_field(g, r.min(1.0)).scaled(r.max(1.0)),
    )
}

/// `|u|^2 + |grad d|^2 + int F~(|d|^2)` where `u = v - z` in transformed
/// mode and `u = v` otherwise.
pub fn g_functional(snap: &Snapshot, integ: &Integrator) -> f64 {
    let u = snap.shifted.as_ref().map_or(&snap.state.v, |s| &s.u);
    u.inner(u)
        + dirichlet_form(&snap.state.d, Bc::Neumann)
        + integ.potential().bulk_energy(&snap.state.d)
}

/// Outcome of one experiment cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

impl CellStatus {
    pub fn label(&self) -> String {
        match self {
            CellStatus::Ok => "ok".into(),
            CellStatus::Failed(m) => format!("failed: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackConfig {
    pub t_star: f64,
    /// Start times, strictly decreasing and below `t_star`.
    pub s_list: Vec<f64>,
    /// Magnitudes of the initial data; every pair is compared.
    pub radii: Vec<f64>,
    pub seeds: Vec<u64>,
    pub noise: bool,
}

impl Default for PullbackConfig {
    fn default() -> Self {
        PullbackConfig {
            t_star: 0.0,
            s_list: vec![-1.0, -2.0, -4.0, -8.0],
            radii: vec![1.0, 10.0],
            seeds: vec![0],
            noise: true,
        }
    }
}

impl PullbackConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.s_list.is_empty() || self.s_list.iter().any(|s| *s >= self.t_star) {
            bad.push("start times must be non-empty and below the target time".to_string());
        }
        if self.s_list.windows(2).any(|w| w[1] >= w[0]) {
            bad.push("start times must be strictly decreasing".to_string());
        }
        if self.radii.is_empty() || self.radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            bad.push("radii must be finite and non-negative".to_string());
        }
        if self.seeds.is_empty() {
            bad.push("at least one seed is required".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(bad))
        }
    }
}

fn integrator_for(params: &SimulationParams, seed: u64, noise: bool) -> Result<Integrator> {
    let mut p = params.clone();
    p.seed = seed;
    let integ = Integrator::new(p, StepScheme::transformed())?;
    Ok(if noise { integ } else { integ.silenced() })
}

/// Evolves magnitude-`r` data from `s` to `t_star`.
fn evolve(integ: &Integrator, r: f64, s: f64, t_star: f64) -> Result<Snapshot> {
    let (v, d) = initial_datum(integ.basis(), r);
    let snap = integ.prepare(integ.state_at(s, v, d)?)?;
    let k = integ.params().step_of(t_star)? - snap.state.step;
    integ.advance(snap, k as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackRow {
    pub s: f64,
    pub seed: u64,
    pub radius_a: f64,
    pub radius_b: f64,
    /// `|v_a - v_b|_2 + ||d_a - d_b||_1` at `t_star`.
    pub distance: f64,
    pub norm_a: f64,
    pub norm_b: f64,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackTable {
    pub config: PullbackConfig,
    pub rows: Vec<PullbackRow>,
}

fn zero_state(grid: GridSpec) -> State {
    State {
        t: 0.0,
        step: 0,
        v: VectorField2::zeros(grid),
        d: VectorField3::zeros(grid),
    }
}

/// For each start time and seed, evolves every initial magnitude under the
/// same path to `t_star` and tabulates the pairwise distances.
pub fn pullback_run(cfg: &PullbackConfig, params: &SimulationParams) -> Result<PullbackTable> {
    cfg.validate()?;
    let cells: Vec<(u64, f64)> = cfg
        .seeds
        .iter()
        .flat_map(|&seed| cfg.s_list.iter().map(move |&s| (seed, s)))
        .collect();
    let per_cell: Vec<Result<Vec<PullbackRow>>> = cells
        .par_iter()
        .map(|&(seed, s)| {
            let integ = integrator_for(params, seed, cfg.noise)?;
            let ends: Vec<Result<Snapshot>> =
                cfg.radii.iter().map(|&r| evolve(&integ, r, s, cfg.t_star)).collect();
            let zero = zero_state(params.grid);
            let mut rows = Vec::new();
            for i in 0..cfg.radii.len() {
                for j in i + 1..cfg.radii.len() {
                    let row = match (&ends[i], &ends[j]) {
                        (Ok(a), Ok(b)) => PullbackRow {
                            s,
                            seed,
                            radius_a: cfg.radii[i],
                            radius_b: cfg.radii[j],
                            distance: state_distance(&a.state, &b.state),
                            norm_a: state_distance(&a.state, &zero),
                            norm_b: state_distance(&b.state, &zero),
                            status: CellStatus::Ok,
                        },
                        (a, b) => PullbackRow {
                            s,
                            seed,
                            radius_a: cfg.radii[i],
                            radius_b: cfg.radii[j],
                            distance: f64::NAN,
                            norm_a: f64::NAN,
                            norm_b: f64::NAN,
                            status: CellStatus::Failed(
                                a.as_ref().err().or(b.as_ref().err()).map(|e| e.to_string()).unwrap_or_default(),
                            ),
                        },
                    };
                    rows.push(row);
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_cell {
        rows.extend(r?);
    }
    Ok(PullbackTable {
        config: cfg.clone(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbRow {
    pub radius: f64,
    pub s: f64,
    pub seed: u64,
    /// `g` at the target time.
    pub g: f64,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbTable {
    pub noise: bool,
    pub t_star: f64,
    pub rows: Vec<AbsorbRow>,
}

impl AbsorbTable {
    pub fn g(&self, radius: f64, s: f64, seed: u64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.radius == radius && r.s == s && r.seed == seed && r.status == CellStatus::Ok)
            .map(|r| r.g)
    }
}

/// `g(t_star)` for every `(R, s, seed)` cell, evolved in the shifted
/// formulation.
pub fn absorbing_radius_estimate(
    radii: &[f64],
    s_list: &[f64],
    seeds: &[u64],
    params: &SimulationParams,
    noise: bool,
    t_star: f64,
) -> Result<AbsorbTable> {
    PullbackConfig {
        t_star,
        s_list: s_list.to_vec(),
        radii: radii.to_vec(),
        seeds: seeds.to_vec(),
        noise,
    }
    .validate()?;
    let cells: Vec<(f64, f64, u64)> = radii
        .iter()
        .flat_map(|&r| {
            s_list
                .iter()
                .flat_map(move |&s| seeds.iter().map(move |&seed| (r, s, seed)))
        })
        .collect();
    let rows: Vec<Result<AbsorbRow>> = cells
        .par_iter()
        .map(|&(radius, s, seed)| {
            let integ = integrator_for(params, seed, noise)?;
            Ok(match evolve(&integ, radius, s, t_star) {
                Ok(end) => AbsorbRow {
                    radius,
                    s,
                    seed,
                    g: g_functional(&end, &integ),
                    status: CellStatus::Ok,
                },
                Err(e) if e.is_numerical() => AbsorbRow {
                    radius,
                    s,
                    seed,
                    g: f64::NAN,
                    status: CellStatus::Failed(e.to_string()),
                },
                Err(e) => return Err(e),
            })
        })
        .collect();
    Ok(AbsorbTable {
        noise,
        t_star,
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// Mean, sample standard deviation, min and max of one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub n: usize,
    pub base_seed: u64,
    pub columns: Vec<ColumnStats>,
    /// Raw member outputs in seed order.
    pub members: Vec<Vec<f64>>,
}

/// Runs `job(seed)` for `seed` in `base_seed..base_seed + n` in parallel and
/// aggregates the returned vectors column-wise, in seed order.
pub fn ensemble_run<F>(n: usize, base_seed: u64, job: F) -> Result<EnsembleStats>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    if n == 0 {
        return Err(Error::Precondition("ensemble needs at least one member".into()));
    }
    let members: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            job(base_seed.wrapping_add(i as u64)).map_err(|e| Error::EnsembleMember {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let width = members[0].len();
    if let Some((i, m)) = members.iter().enumerate().find(|(_, m)| m.len() != width) {
        return Err(Error::EnsembleMember {
            index: i,
            source: Box::new(Error::LengthMismatch {
                expected: width,
                got: m.len(),
            }),
        });
    }
    let columns = (0..width)
        .map(|c| {
            let xs: Vec<f64> = members.iter().map(|m| m[c]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            ColumnStats {
                mean,
                std: var.sqrt(),
                min: xs.iter().copied().fold(f64::INFINITY, f64::min),
                max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    Ok(EnsembleStats {
        n,
        base_seed,
        columns,
        members,
    })
}

/// Whether a snapshot comes from the shifted formulation.
pub fn is_transformed(snap: &Snapshot) -> bool {
    snap.shifted.is_some()
}

/// Mode of an integrator, for table provenance.
pub fn mode_label(mode: Mode) -> &'static str {
    match mode {
        Mode::Direct => "direct",
        Mode::Transformed => "transformed",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SimulationParams {
        SimulationParams {
            grid: GridSpec::unit_square(16).unwrap(),
            noise_mode_count: 4,
            dt: 2e-3,
            ..SimulationParams::default()
        }
    }

    #[test]
    fn director_is_unit() {
        let d = director_field(GridSpec::unit_square(12).unwrap(), 1.0);
        assert!(d.magnitude_sq().iter().all(|s| (s - 1.0).abs() < 1e-14));
    }

    #[test]
    fn identical_initials_have_zero_distance() {
        let cfg = PullbackConfig {
            s_list: vec![-0.02, -0.04],
            radii: vec![2.0, 2.0],
            ..PullbackConfig::default()
        };
        let t = pullback_run(&cfg, &params()).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows.iter().all(|r| r.distance == 0.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = PullbackConfig::default();
        cfg.s_list = vec![-1.0, -0.5];
        assert!(cfg.validate().is_err());
        cfg.s_list = vec![-1.0, 0.5];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ensemble_determinism() {
        let job = |seed: u64| Ok(vec![seed as f64, (seed as f64).sqrt()]);
        let a = ensemble_run(10, 3, job).unwrap();
        let b = ensemble_run(10, 3, job).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.columns[0].mean, 7.5);
        let one = ensemble_run(1, 9, job).unwrap();
        assert_eq!(one.members, vec![vec![9.0, 3.0]]);
        assert!(ensemble_run(0, 0, job).is_err());
    }

    #[test]
    fn zero_radius_noise_off_is_constant_state_value() {
        let p = params();
        let t = absorbing_radius_estimate(&[0.0], &[-0.02], &[0], &p, false, 0.0).unwrap();
        // resting unit director: g = int F~(1) = -1/2 on the unit square
        let g = t.g(0.0, -0.02, 0).unwrap();
        assert!((g + 0.5).abs() < 1e-12, "{g}");
    }
}
