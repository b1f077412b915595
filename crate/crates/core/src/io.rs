//! Plain-text configuration, CSV output and binary checkpoints.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::integrator::{Mode, Shifted, Snapshot};
use crate::model::{Field, GridSpec, SimulationParams, State};
use crate::noise::OuState;

/// Keys accepted in configuration files.
pub const CONFIG_KEYS: [&str; 12] = [
    "mu",
    "lambda_c",
    "gamma_c",
    "potential_coeffs",
    "potential_degree",
    "h_vec",
    "beta",
    "noise_spectrum_exponent",
    "noise_mode_count",
    "grid",
    "dt",
    "seed",
];

fn cfg_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn parse_f64(line: usize, key: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| cfg_err(line, format!("{key}: cannot parse {:?} as a number", s.trim())))
}

fn parse_list(line: usize, key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|x| parse_f64(line, key, x)).collect()
}

fn parse_usize(line: usize, key: &str, s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| cfg_err(line, format!("{key}: cannot parse {:?} as a count", s.trim())))
}

/// Parses `key = value` lines (`#` starts a comment). Missing keys keep
/// their defaults; `potential_degree` defaults to the coefficient count
/// minus one. Unknown or repeated keys are errors. The result is not
/// validated.
pub fn parse_config(text: &str) -> Result<SimulationParams> {
    let mut p = SimulationParams::default();
    let mut seen: Vec<&str> = Vec::new();
    let mut degree: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, val) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(ln, format!("expected `key = value`, got {line:?}")))?;
        let key = key.trim();
        let Some(&k) = CONFIG_KEYS.iter().find(|k| **k == key) else {
            return Err(cfg_err(ln, format!("unknown key {key:?}")));
        };
        if seen.contains(&k) {
            return Err(cfg_err(ln, format!("duplicate key {key:?}")));
        }
        seen.push(k);
        match k {
            "mu" => p.mu = parse_f64(ln, k, val)?,
            "lambda_c" => p.lambda_c = parse_f64(ln, k, val)?,
            "gamma_c" => p.gamma_c = parse_f64(ln, k, val)?,
            "potential_coeffs" => p.potential_coeffs = parse_list(ln, k, val)?,
            "potential_degree" => degree = Some(parse_usize(ln, k, val)?),
            "h_vec" => {
                let h = parse_list(ln, k, val)?;
                p.h_vec = h
                    .try_into()
                    .map_err(|_| cfg_err(ln, "h_vec needs exactly 3 entries"))?;
            }
            "beta" => p.beta = parse_f64(ln, k, val)?,
            "noise_spectrum_exponent" => p.noise_spectrum_exponent = parse_f64(ln, k, val)?,
            "noise_mode_count" => p.noise_mode_count = parse_usize(ln, k, val)?,
            "grid" => {
                let parts: Vec<&str> = val.split(',').collect();
                if parts.len() != 4 {
                    return Err(cfg_err(ln, "grid needs `nx, ny, Lx, Ly`"));
                }
                p.grid = GridSpec {
                    nx: parse_usize(ln, k, parts[0])?,
                    ny: parse_usize(ln, k, parts[1])?,
                    lx: parse_f64(ln, k, parts[2])?,
                    ly: parse_f64(ln, k, parts[3])?,
                };
            }
            "dt" => p.dt = parse_f64(ln, k, val)?,
            "seed" => {
                p.seed = val
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| cfg_err(ln, format!("seed: cannot parse {:?}", val.trim())))?
            }
            _ => unreachable!(),
        }
    }
    p.potential_degree = degree.unwrap_or(p.potential_coeffs.len().saturating_sub(1));
    Ok(p)
}

/// Reads and parses a configuration file, then rejects invalid parameters.
pub fn load_config(path: &Path) -> Result<SimulationParams> {
    let text = fs::read_to_string(path)?;
    let p = parse_config(&text)?;
    p.checked()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

/// Serializes parameters in the configuration syntax. Floats use the
/// shortest representation that parses back to the same value.
pub fn format_config(p: &SimulationParams) -> String {
    let g = &p.grid;
    format!(
        "mu = {:?}\nlambda_c = {:?}\ngamma_c = {:?}\npotential_coeffs = {}\npotential_degree = {}\n\
         h_vec = {}\nbeta = {:?}\nnoise_spectrum_exponent = {:?}\nnoise_mode_count = {}\n\
         grid = {}, {}, {:?}, {:?}\ndt = {:?}\nseed = {}\n",
        p.mu,
        p.lambda_c,
        p.gamma_c,
        join(&p.potential_coeffs),
        p.potential_degree,
        join(&p.h_vec),
        p.beta,
        p.noise_spectrum_exponent,
        p.noise_mode_count,
        g.nx,
        g.ny,
        g.lx,
        g.ly,
        p.dt,
        p.seed
    )
}

/// Shortest round-trip decimal for a float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// `# key = value` provenance lines followed by a CSV table.
pub fn write_table(
    path: &Path,
    provenance: &[(String, String)],
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    for (k, v) in provenance {
        for (i, line) in v.lines().enumerate() {
            if i == 0 {
                writeln!(buf, "# {k} = {line}")?;
            } else {
                writeln!(buf, "#   {line}")?;
            }
        }
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Diagnostics CSV: header row, one row per record, missing residuals as
/// empty fields.
pub fn write_csv(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(DiagnosticsRecord::COLUMNS)?;
    for r in records {
        let mut row: Vec<String> = r
            .values()
            .iter()
            .map(|v| v.map(fmt_f64).unwrap_or_default())
            .collect();
        row[1] = r.step.to_string();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != DiagnosticsRecord::COLUMNS {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<Option<f64>> {
            let s = rec.get(i).unwrap_or("");
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::Config(format!("bad number {s:?} in CSV")))
            }
        };
        let req = |i: usize| -> Result<f64> {
            f(i)?.ok_or_else(|| Error::Config(format!("missing {} in CSV", DiagnosticsRecord::COLUMNS[i])))
        };
        out.push(DiagnosticsRecord {
            t: req(0)?,
            step: rec
                .get(1)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::Config("bad step in CSV".into()))?,
            v_l2: req(2)?,
            v_h1: req(3)?,
            d_l2: req(4)?,
            d_h1: req(5)?,
            lap_d_l2: req(6)?,
            d_l4n2: req(7)?,
            log_energy: req(8)?,
            energy: req(9)?,
            div_v_l2: req(10)?,
            ito_residual: f(11)?,
            energy_residual: f(12)?,
            scalar_flow_residual: f(13)?,
        });
    }
    Ok(out)
}

const MAGIC: &[u8; 8] = b"NEMCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume a run bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: SimulationParams,
    pub mode: Mode,
    /// Increment bins per step; the step at index `k` starts at bin
    /// `k * substeps` of the path with seed `params.seed`.
    pub substeps: u32,
    pub snapshot: Snapshot,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn i64(&mut self, x: i64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn floats(&mut self, xs: &[f64]) {
        for x in xs {
            self.f64(*x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("file is truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u8(match self.mode {
            Mode::Direct => 0,
            Mode::Transformed => 1,
        });
        let echo = format_config(&self.params);
        w.u32(echo.len() as u32);
        w.0.extend_from_slice(echo.as_bytes());
        let st = &self.snapshot.state;
        w.f64(st.t);
        w.i64(st.step);
        let g = st.grid();
        w.u32(g.nx as u32);
        w.u32(g.ny as u32);
        w.u64(self.params.seed);
        w.u32(self.substeps);
        w.i64(st.step * self.substeps as i64);
        for c in 0..2 {
            w.floats(st.v.comp(c));
        }
        for c in 0..3 {
            w.floats(st.d.comp(c));
        }
        match &self.snapshot.shifted {
            None => w.u8(0),
            Some(sh) => {
                w.u8(1);
                w.u32(sh.z.coeffs.len() as u32);
                w.i64(sh.z.bin);
                w.f64(sh.z.beta);
                w.floats(&sh.z.coeffs);
                for c in 0..2 {
                    w.floats(sh.u.comp(c));
                }
            }
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {version}, this build reads version {CHECKPOINT_VERSION}"
            )));
        }
        let mode = match r.u8()? {
            0 => Mode::Direct,
            1 => Mode::Transformed,
            m => return Err(Error::Checkpoint(format!("unknown mode flag {m}"))),
        };
        let n = r.u32()? as usize;
        let echo = std::str::from_utf8(r.take(n)?)
            .map_err(|_| Error::Checkpoint("parameter echo is not UTF-8".into()))?;
        let params = parse_config(echo)?;
        let t = r.f64()?;
        let step = r.i64()?;
        let (nx, ny) = (r.u32()? as usize, r.u32()? as usize);
        if nx != params.grid.nx || ny != params.grid.ny {
            return Err(Error::Checkpoint("grid size disagrees with the parameter echo".into()));
        }
        let seed = r.u64()?;
        if seed != params.seed {
            return Err(Error::Checkpoint("seed disagrees with the parameter echo".into()));
        }
        let substeps = r.u32()?;
        let origin = r.i64()?;
        if substeps == 0 || origin != step * substeps as i64 {
            return Err(Error::Checkpoint("inconsistent bin origin".into()));
        }
        let g = params.grid;
        let cells = g.len();
        let v = Field::from_components(g, [r.floats(cells)?, r.floats(cells)?])?;
        let d = Field::from_components(g, [r.floats(cells)?, r.floats(cells)?, r.floats(cells)?])?;
        let shifted = match r.u8()? {
            0 => None,
            1 => {
                let m = r.u32()? as usize;
                let bin = r.i64()?;
                let beta = r.f64()?;
                let coeffs = r.floats(m)?;
                let u = Field::from_components(g, [r.floats(cells)?, r.floats(cells)?])?;
                Some(Shifted {
                    u,
                    z: OuState { bin, beta, coeffs },
                })
            }
            f => return Err(Error::Checkpoint(format!("unknown shifted-state flag {f}"))),
        };
        if r.pos != buf.len() {
            return Err(Error::Checkpoint("trailing bytes after checkpoint".into()));
        }
        if (mode == Mode::Transformed) != shifted.is_some() {
            return Err(Error::Checkpoint("mode flag disagrees with the stored state".into()));
        }
        Ok(Checkpoint {
            params,
            mode,
            substeps,
            snapshot: Snapshot {
                state: State { t, step, v, d },
                shifted,
            },
        })
    }
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, ck.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let p = SimulationParams {
            mu: 0.3,
            h_vec: [0.1, -0.2, 1.0 / 3.0],
            potential_coeffs: vec![-1.0, 0.5, 0.25],
            potential_degree: 2,
            seed: u64::MAX,
            ..SimulationParams::default()
        };
        let q = parse_config(&format_config(&p)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(parse_config("bogus = 1"), Err(Error::Config(_))));
        assert!(parse_config("mu = 1\nmu = 2").is_err());
        assert!(parse_config("mu 1").is_err());
        assert!(parse_config("grid = 8, 8, 1").is_err());
        let p = parse_config("# comment\n\nmu = 2 # trailing\npotential_coeffs = -1, 0, 1\n").unwrap();
        assert_eq!(p.mu, 2.0);
        assert_eq!(p.potential_degree, 2);
        let bad = parse_config("potential_coeffs = 1, -1").unwrap();
        assert!(!bad.validate().passed());
    }
}
