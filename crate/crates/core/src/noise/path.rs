//! Counter-based Brownian increments addressed by `(seed, channel, bin)`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Immutable store of Brownian increments.
///
/// Channel 0 drives `W_2`, channels `1..=M` the velocity noise modes. Each
/// `(channel, bin)` pair maps to its own position in a ChaCha8 keystream, so
/// any increment can be regenerated without touching the others. Bins are
/// signed so negative times are addressable.
#[derive(Debug, Clone)]
pub struct PathStore {
    seed: u64,
    dt_master: f64,
    channels: usize,
    silent: bool,
    base: ChaCha8Rng,
}

impl PathStore {
    /// `channels` counts channel 0, so a store for `M` modes has `M + 1`.
    pub fn new(seed: u64, dt_master: f64, channels: usize) -> Result<Self> {
        if !(dt_master > 0.0 && dt_master.is_finite()) {
            return Err(Error::InvalidParams(vec![format!(
                "increment bin width must be positive (got {dt_master})"
            )]));
        }
        if channels == 0 {
            return Err(Error::InvalidParams(vec!["path store needs at least one channel".into()]));
        }
        Ok(PathStore {
            seed,
            dt_master,
            channels,
            silent: false,
            base: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Same addressing, but every increment is zero.
    pub fn silenced(mut self) -> Self {
        self.silent = true;
        self
    }

    pub fn is_silent(&self) -> bool {
        self.silent
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt_master(&self) -> f64 {
        self.dt_master
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    fn check(&self, channel: usize) -> Result<()> {
        if channel >= self.channels {
            Err(Error::ChannelOutOfRange {
                channel,
                count: self.channels,
            })
        } else {
            Ok(())
        }
    }

    /// Standard normal for `(channel, k)` (Box-Muller on two 64-bit words).
    fn normal(&self, channel: usize, k: i64) -> f64 {
        let mut rng = self.base.clone();
        rng.set_stream(channel as u64);
        let pos = (k as i128 - i64::MIN as i128) as u128;
        rng.set_word_pos(pos * 4);
        let a = rng.next_u64();
        let b = rng.next_u64();
        let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// `N(0, dt_master)` increment of bin `k` (covering `[k dt, (k+1) dt)`).
    pub fn increment(&self, channel: usize, k: i64) -> Result<f64> {
        self.check(channel)?;
        Ok(self.increment_unchecked(channel, k))
    }

    #[inline]
    pub(crate) fn increment_unchecked(&self, channel: usize, k: i64) -> f64 {
        if self.silent {
            0.0
        } else {
            self.dt_master.sqrt() * self.normal(channel, k)
        }
    }

    /// Sum of the `m` consecutive bins starting at `first`, i.e. the
    /// increment over a step of width `m * dt_master`.
    pub fn coarse_increment(&self, channel: usize, first: i64, m: u32) -> Result<f64> {
        self.check(channel)?;
        Ok(self.coarse_unchecked(channel, first, m))
    }

    pub(crate) fn coarse_unchecked(&self, channel: usize, first: i64, m: u32) -> f64 {
        let mut s = 0.0;
        for j in 0..m as i64 {
            s += self.increment_unchecked(channel, first + j);
        }
        s
    }

    /// Bin index of a time on the master grid.
    pub fn bin_of(&self, t: f64) -> Result<i64> {
        let r = t / self.dt_master;
        let k = r.round();
        if !r.is_finite() || (r - k).abs() > 1e-9 * k.abs().max(1.0) {
            return Err(Error::OffGrid(t));
        }
        Ok(k as i64)
    }

    /// `W_2` at bin boundary `k`, anchored at `W_2(0) = 0`.
    pub fn w2_at_bin(&self, k: i64) -> f64 {
        if k >= 0 {
            (0..k).map(|j| self.increment_unchecked(0, j)).sum()
        } else {
            -(k..0).map(|j| self.increment_unchecked(0, j)).sum::<f64>()
        }
    }

    /// `W_2(t)` for `t` on the master grid.
    pub fn w2_value(&self, t: f64) -> Result<f64> {
        Ok(self.w2_at_bin(self.bin_of(t)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_exact() {
        let p = PathStore::new(42, 1e-3, 4).unwrap();
        for k in [-5, 0, 17, i64::MAX / 3] {
            assert_eq!(p.increment(2, k).unwrap().to_bits(), p.increment(2, k).unwrap().to_bits());
        }
        let q = PathStore::new(42, 1e-3, 4).unwrap();
        assert_eq!(p.increment(1, 9).unwrap(), q.increment(1, 9).unwrap());
        assert_ne!(p.increment(1, 9).unwrap(), p.increment(2, 9).unwrap());
        assert_ne!(p.increment(1, 9).unwrap(), p.increment(1, 10).unwrap());
    }

    #[test]
    fn channel_out_of_range() {
        let p = PathStore::new(1, 1e-3, 3).unwrap();
        assert!(matches!(p.increment(3, 0), Err(Error::ChannelOutOfRange { .. })));
    }

    #[test]
    fn w2_anchoring_and_telescoping() {
        let p = PathStore::new(7, 0.01, 1).unwrap();
        assert_eq!(p.w2_value(0.0).unwrap(), 0.0);
        let a = p.w2_value(0.05).unwrap();
        let b = p.w2_value(0.2).unwrap();
        let direct: f64 = (5..20).map(|k| p.increment(0, k).unwrap()).sum();
        assert!((b - a - direct).abs() < 1e-14);
        let neg = p.w2_value(-0.03).unwrap();
        let direct: f64 = (-3..0).map(|k| p.increment(0, k).unwrap()).sum();
        assert!((neg + direct).abs() < 1e-15);
        assert!(p.w2_value(0.005).is_err());
    }

    #[test]
    fn silenced_store_is_zero() {
        let p = PathStore::new(3, 1e-3, 2).unwrap().silenced();
        assert_eq!(p.increment(1, 5).unwrap(), 0.0);
        assert_eq!(p.w2_at_bin(100), 0.0);
    }

    #[test]
    fn coarse_increment_is_bin_sum() {
        let p = PathStore::new(11, 1e-3, 2).unwrap();
        let s = p.coarse_increment(1, 4, 3).unwrap();
        let d: f64 = (4..7).map(|k| p.increment(1, k).unwrap()).sum();
        assert_eq!(s, d);
    }
}
