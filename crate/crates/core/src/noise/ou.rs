//! Ornstein-Uhlenbeck convolution `dz = -(A + beta) z dt + dW_1` in mode
//! coordinates.

use crate::error::{Error, Result};
use crate::model::VectorField2;
use crate::noise::basis::ModeBasis;
use crate::noise::path::PathStore;

#[derive(Debug, Clone, PartialEq)]
pub struct OuState {
    /// Master-grid bin index of the current time.
    pub bin: i64,
    pub beta: f64,
    pub coeffs: Vec<f64>,
}

impl OuState {
    pub fn zero(bin: i64, beta: f64, modes: usize) -> Self {
        OuState {
            bin,
            beta,
            coeffs: vec![0.0; modes],
        }
    }

    pub fn t(&self, store: &PathStore) -> f64 {
        self.bin as f64 * store.dt_master()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn field(&self, basis: &ModeBasis) -> Result<VectorField2> {
        basis.reconstruct(&self.coeffs)
    }
}

/// `sqrt(lambda_n) dB_n` for the step of `m` bins starting at `first`.
pub fn w1_coefficients(store: &PathStore, basis: &ModeBasis, first: i64, m: u32) -> Result<Vec<f64>> {
    if store.channels() < basis.len() + 1 {
        return Err(Error::ChannelOutOfRange {
            channel: basis.len(),
            count: store.channels(),
        });
    }
    Ok((0..basis.len())
        .map(|n| basis.lambda(n).sqrt() * store.coarse_unchecked(n + 1, first, m))
        .collect())
}

fn bins_per(store: &PathStore, dt: f64) -> Result<u32> {
    let r = dt / store.dt_master();
    let m = r.round();
    if !(m >= 1.0) || (r - m).abs() > 1e-9 * m || m > u32::MAX as f64 {
        return Err(Error::Precondition(format!(
            "step {dt} is not a whole multiple of the increment bin {}",
            store.dt_master()
        )));
    }
    Ok(m as u32)
}

/// Velocity noise increment `sum_n sqrt(lambda_n) dB_n e_n` over `[t, t+dt)`.
pub fn sample_w1_increment(
    store: &PathStore,
    basis: &ModeBasis,
    t: f64,
    dt: f64,
) -> Result<VectorField2> {
    let first = store.bin_of(t)?;
    let m = bins_per(store, dt)?;
    basis.reconstruct(&w1_coefficients(store, basis, first, m)?)
}

/// Exponential-Euler step using the same increments as
/// [`sample_w1_increment`] over the same interval.
pub fn ou_step(z: &OuState, store: &PathStore, basis: &ModeBasis, dt: f64) -> Result<OuState> {
    let m = bins_per(store, dt)?;
    ou_step_bins(z, store, basis, m)
}

pub fn ou_step_bins(z: &OuState, store: &PathStore, basis: &ModeBasis, m: u32) -> Result<OuState> {
    if z.coeffs.len() != basis.len() {
        return Err(Error::LengthMismatch {
            expected: basis.len(),
            got: z.coeffs.len(),
        });
    }
    let dt = m as f64 * store.dt_master();
    let inc = w1_coefficients(store, basis, z.bin, m)?;
    let coeffs = z
        .coeffs
        .iter()
        .zip(basis.alpha())
        .zip(&inc)
        .map(|((c, a), w)| (-(a + z.beta) * dt).exp() * c + w)
        .collect();
    Ok(OuState {
        bin: z.bin + m as i64,
        beta: z.beta,
        coeffs,
    })
}

/// Default burn-in: `ceil(20 / ((alpha_1 + beta) dt))` bins.
pub fn default_burn_in(basis: &ModeBasis, beta: f64, dt: f64) -> u64 {
    let k = basis.alpha().first().copied().unwrap_or(0.0) + beta;
    (20.0 / (k * dt)).ceil().max(1.0) as u64
}

/// Approximates the stationary convolution at `t0` by running from zero over
/// the preceding `burn_in_bins` master bins.
pub fn ou_stationary_init(
    store: &PathStore,
    basis: &ModeBasis,
    beta: f64,
    t0: f64,
    burn_in_bins: u64,
) -> Result<OuState> {
    let bin = store.bin_of(t0)?;
    ou_stationary_init_bins(store, basis, beta, bin, burn_in_bins, 1)
}

/// Same as [`ou_stationary_init`] but stepping `m` bins at a time; the
/// burn-in is rounded up to whole steps.
pub fn ou_stationary_init_bins(
    store: &PathStore,
    basis: &ModeBasis,
    beta: f64,
    bin: i64,
    burn_in_bins: u64,
    m: u32,
) -> Result<OuState> {
    let steps = burn_in_bins.div_ceil(m as u64) as i64;
    let mut z = OuState::zero(bin - steps * m as i64, beta, basis.len());
    for _ in 0..steps {
        z = ou_step_bins(&z, store, basis, m)?;
    }
    Ok(z)
}
