//! Browser bindings: a live orientation simulation rendered to RGBA, the
//! potential profile, and the noise modes.

use wasm_bindgen::prelude::*;

use nematic_core::attractor::initial_datum;
use nematic_core::diagnostics::energy;
use nematic_core::integrator::{Integrator, Snapshot, StepScheme};
use nematic_core::noise::{build_mode_basis, ModeBasis};
use nematic_core::{GridSpec, PotentialCoeffs, SimulationParams};

fn js_err(e: nematic_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Maps a director to a colour: hue from the in-plane angle, brightness
/// from `|d|` (clamped at 1.5).
fn director_rgba(d: [f64; 3]) -> [u8; 4] {
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    // nematic symmetry: d and -d look the same
    let hue = (2.0 * d[1].atan2(d[0])).rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU;
    let val = (r / 1.5).min(1.0);
    let sat = if r > 0.0 { (d[0].hypot(d[1]) / r).min(1.0) } else { 0.0 };
    let h6 = hue * 6.0;
    let f = h6 - h6.floor();
    let (p, q, t) = (val * (1.0 - sat), val * (1.0 - sat * f), val * (1.0 - sat * (1.0 - f)));
    let (rr, gg, bb) = match h6 as u32 % 6 {
        0 => (val, t, p),
        1 => (q, val, p),
        2 => (p, val, t),
        3 => (p, q, val),
        4 => (t, p, val),
        _ => (val, p, q),
    };
    let c = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
    [c(rr), c(gg), c(bb), 255]
}

/// Rows are flipped so that `y = 0` is at the bottom of the image.
fn to_rgba(nx: usize, ny: usize, px: impl Fn(usize) -> [u8; 4]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 * nx * ny);
    for row in (0..ny).rev() {
        for i in 0..nx {
            out.extend_from_slice(&px(row * nx + i));
        }
    }
    out
}

/// Interactive trajectory on an `n x n` unit square.
#[wasm_bindgen]
pub struct Simulation {
    integ: Integrator,
    snap: Snapshot,
}

#[wasm_bindgen]
impl Simulation {
    /// `h` scales the rotation axis `(1, 1, 1)`; `radius` is the size of the
    /// initial datum.
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, seed: u64, h: f64, radius: f64, noise: bool) -> Result<Simulation, JsError> {
        let params = SimulationParams {
            grid: GridSpec::unit_square(n).map_err(js_err)?,
            h_vec: [h; 3],
            dt: 1e-3,
            seed,
            ..SimulationParams::default()
        };
        let mut integ = Integrator::new(params, StepScheme::transformed()).map_err(js_err)?;
        if !noise {
            integ = integ.silenced();
        }
        let (v, d) = initial_datum(integ.basis(), radius);
        let snap = integ
            .prepare(integ.state_at(0.0, v, d).map_err(js_err)?)
            .map_err(js_err)?;
        Ok(Simulation { integ, snap })
    }

    /// Advances `k` steps.
    pub fn advance(&mut self, k: u32) -> Result<(), JsError> {
        let s = self.integ.advance(self.snap.clone(), k as u64).map_err(js_err)?;
        self.snap = s;
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.snap.t()
    }

    pub fn energy(&self) -> f64 {
        energy(&self.snap.state, self.integ.params(), self.integ.potential())
    }

    pub fn size(&self) -> usize {
        self.integ.params().grid.nx
    }

    /// Director field as RGBA bytes, `n * n * 4` long.
    pub fn rgba(&self) -> Vec<u8> {
        let g = self.integ.params().grid;
        let d = &self.snap.state.d;
        to_rgba(g.nx, g.ny, |k| director_rgba(d.at(k)))
    }

    /// Velocity samples `(v_x, v_y)` interleaved, for arrow overlays.
    pub fn velocity(&self) -> Vec<f64> {
        let v = &self.snap.state.v;
        (0..v.grid().len()).flat_map(|k| v.at(k)).collect()
    }
}

/// `F~(r^2)` sampled at `samples` radii in `[0, r_max]`; `coeffs` are the
/// polynomial coefficients of the potential.
#[wasm_bindgen]
pub fn potential_profile(coeffs: Vec<f64>, r_max: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    let pot = PotentialCoeffs::new(coeffs).map_err(js_err)?;
    let n = samples.max(2);
    (0..n)
        .map(|i| {
            let r = r_max * i as f64 / (n - 1) as f64;
            pot.tilde_big_f(r * r).map_err(js_err)
        })
        .collect()
}

/// Divergence-free noise modes on an `n x n` grid.
#[wasm_bindgen]
pub struct Modes {
    basis: ModeBasis,
}

#[wasm_bindgen]
impl Modes {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, count: usize) -> Result<Modes, JsError> {
        let g = GridSpec::unit_square(n).map_err(js_err)?;
        Ok(Modes {
            basis: build_mode_basis(g, count).map_err(js_err)?,
        })
    }

    pub fn count(&self) -> usize {
        self.basis.len()
    }

    /// Eigenvalues of the discrete Stokes operator.
    pub fn alpha(&self) -> Vec<f64> {
        self.basis.alpha().to_vec()
    }

    /// Mode `index` as RGBA: red/blue for the sign of the stream direction,
    /// brightness for the magnitude.
    pub fn rgba(&self, index: usize) -> Vec<u8> {
        let g = *self.basis.grid();
        let e = self.basis.mode(index.min(self.basis.len().saturating_sub(1)));
        let peak = e.max_abs().max(f64::MIN_POSITIVE);
        to_rgba(g.nx, g.ny, |k| {
            let [x, y] = e.at(k);
            let c = |s: f64| (s.abs() / peak * 255.0).min(255.0) as u8;
            [c(x.max(0.0)) / 2 + c(y.max(0.0)) / 2, c(x.hypot(y)) / 3, c(x.min(0.0)) / 2 + c(y.min(0.0)) / 2, 255]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_renders() {
        let mut s = Simulation::new(8, 1, 0.5, 1.0, true).unwrap();
        let e0 = s.energy();
        s.advance(5).unwrap();
        assert!((s.time() - 5e-3).abs() < 1e-15);
        assert_eq!(s.rgba().len(), 8 * 8 * 4);
        assert_eq!(s.velocity().len(), 2 * 64);
        assert!(s.energy().is_finite() && e0.is_finite());
    }

    #[test]
    fn profile_minimum_at_unit_radius() {
        let f = potential_profile(vec![-1.0, 1.0], 2.0, 201).unwrap();
        let imin = f
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(imin, 100);
        assert!((f[100] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn modes_render() {
        let m = Modes::new(12, 4).unwrap();
        assert_eq!(m.count(), 4);
        assert!(m.alpha().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(m.rgba(2).len(), 12 * 12 * 4);
    }

    #[test]
    fn director_colour_is_sign_blind() {
        assert_eq!(director_rgba([0.6, 0.8, 0.0]), director_rgba([-0.6, -0.8, 0.0]));
    }
}
