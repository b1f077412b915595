use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nematic_core::attractor::{
    absorbing_radius_estimate, initial_datum, mode_label, pullback_run, PullbackConfig,
};
use nematic_core::integrator::{Integrator, Mode, RunOptions, Snapshot, StepScheme};
use nematic_core::io::{
    fmt_f64, format_config, load_checkpoint, load_config, save_checkpoint, write_csv, write_table,
    Checkpoint,
};
use nematic_core::diagnostics::snapshot_diff;
use nematic_core::noise::build_mode_basis;
use nematic_core::verify::run_checks;
use nematic_core::{Error, SimulationParams};

#[derive(Parser)]
#[command(name = "nematic", version, about = "Stochastic nematic liquid-crystal flow simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one trajectory and write per-step diagnostics.
    Simulate(SimulateArgs),
    /// Run the verification checks; exit 3 if any fails.
    Verify(VerifyArgs),
    /// Distances between solutions started at earlier and earlier times.
    Pullback(ExperimentArgs),
    /// g(T*) for data of several magnitudes and start times.
    Absorb(ExperimentArgs),
    /// Dump the noise mode basis and its spectrum.
    Basis(BasisArgs),
    /// Resume from a checkpoint mid-run and compare with an uninterrupted run.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct Common {
    /// Parameter file (`key = value` lines); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Direct,
    Transformed,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Direct => Mode::Direct,
            ModeArg::Transformed => Mode::Transformed,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// End time.
    #[arg(long, default_value_t = 1.0)]
    tend: f64,
    /// Keep every k-th step in the CSV (the last step is always kept).
    #[arg(long, default_value_t = 1)]
    stride: u64,
    #[arg(long, value_enum, default_value = "direct")]
    mode: ModeArg,
    /// Magnitude of the built-in initial datum.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Switch both noises off.
    #[arg(long)]
    no_noise: bool,
    /// Increment bins per step.
    #[arg(long, default_value_t = 1)]
    substeps: u32,
    /// Add residual columns (slower).
    #[arg(long)]
    residuals: bool,
    /// Start from this checkpoint instead of the built-in datum.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Write the final state as `final.ckpt`.
    #[arg(long)]
    checkpoint: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated check ids (all when omitted).
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    /// Target time.
    #[arg(long, default_value_t = 0.0)]
    tstar: f64,
    /// Start times, strictly decreasing.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,-2,-4,-8")]
    s_list: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
    radii: Vec<f64>,
    /// Path seeds; defaults to the config seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    no_noise: bool,
}

#[derive(Args)]
struct BasisArgs {
    #[command(flatten)]
    common: Common,
    /// Also write every mode sample (`modes.csv`).
    #[arg(long)]
    modes: bool,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    common: Common,
    /// Start from this checkpoint; otherwise from the built-in datum at t = 0.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    tend: f64,
    /// Interruption time (defaults to the midpoint).
    #[arg(long)]
    split: Option<f64>,
    #[arg(long, value_enum, default_value = "transformed")]
    mode: ModeArg,
}

enum Failure {
    Input(String),
    Numerical(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

type Res<T> = Result<T, Failure>;

fn params_of(c: &Common) -> Res<SimulationParams> {
    let mut p = match &c.config {
        Some(path) => load_config(path)?,
        None => SimulationParams::default(),
    };
    if let Some(s) = c.seed {
        p.seed = s;
    }
    let report = p.validate();
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(p.checked()?)
}

fn out_dir(c: &Common) -> Res<&Path> {
    fs::create_dir_all(&c.out).map_err(|e| Failure::Input(format!("{}: {e}", c.out.display())))?;
    Ok(&c.out)
}

fn scheme_for(mode: Mode) -> StepScheme {
    StepScheme {
        mode,
        ..StepScheme::default()
    }
}

fn simulate(a: SimulateArgs) -> Res<()> {
    let (params, mode, substeps, init): (SimulationParams, Mode, u32, Option<Snapshot>) =
        match &a.resume {
            Some(path) => {
                let ck = load_checkpoint(path)?;
                (ck.params, ck.mode, ck.substeps, Some(ck.snapshot))
            }
            None => (params_of(&a.common)?, a.mode.into(), a.substeps, None),
        };
    let mut integ = Integrator::new(params.clone(), scheme_for(mode))?.with_substeps(substeps)?;
    if a.no_noise {
        integ = integ.silenced();
    }
    let snap = match init {
        Some(s) => s,
        None => {
            let (v, d) = initial_datum(integ.basis(), a.radius);
            integ.prepare(integ.state_at(0.0, v, d)?)?
        }
    };
    let traj = integ.run_until(
        snap,
        a.tend,
        RunOptions {
            stride: a.stride.max(1),
            residuals: a.residuals,
        },
    )?;
    let stride = a.stride.max(1) as i64;
    let first = traj.records[0].step;
    let last = traj.records.last().map(|r| r.step).unwrap_or(first);
    let kept: Vec<_> = traj
        .records
        .iter()
        .filter(|r| (r.step - first) % stride == 0 || r.step == last)
        .cloned()
        .collect();
    let dir = out_dir(&a.common)?;
    write_csv(&kept, &dir.join("diagnostics.csv"))?;
    fs::write(dir.join("params.cfg"), format_config(&params))
        .map_err(|e| Failure::Input(e.to_string()))?;
    if a.checkpoint {
        save_checkpoint(
            &Checkpoint {
                params,
                mode,
                substeps,
                snapshot: traj.last().clone(),
            },
            &dir.join("final.ckpt"),
        )?;
    }
    println!("{} records written to {}", kept.len(), dir.join("diagnostics.csv").display());
    Ok(())
}

fn verify(a: VerifyArgs) -> Res<()> {
    let p = params_of(&a.common)?;
    let checks = run_checks(&a.only, &p)?;
    let failed: Vec<u8> = checks.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    for c in &checks {
        println!("{}", c.line());
    }
    if failed.is_empty() {
        println!("all {} checks passed", checks.len());
        Ok(())
    } else {
        Err(Failure::Verification(format!("checks failed: {failed:?}")))
    }
}

fn provenance(p: &SimulationParams, extra: &[(&str, String)]) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = extra.iter().map(|(k, x)| (k.to_string(), x.clone())).collect();
    v.push(("params".into(), format_config(p)));
    v
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

fn experiment_seeds(a: &ExperimentArgs, p: &SimulationParams) -> Vec<u64> {
    if a.seeds.is_empty() {
        vec![p.seed]
    } else {
        a.seeds.clone()
    }
}

fn pullback(a: ExperimentArgs) -> Res<()> {
    let p = params_of(&a.common)?;
    let cfg = PullbackConfig {
        t_star: a.tstar,
        s_list: a.s_list.clone(),
        radii: a.radii.clone(),
        seeds: experiment_seeds(&a, &p),
        noise: !a.no_noise,
    };
    let table = pullback_run(&cfg, &p)?;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.s),
                r.seed.to_string(),
                fmt_f64(r.radius_a),
                fmt_f64(r.radius_b),
                fmt_f64(r.distance),
                fmt_f64(r.norm_a),
                fmt_f64(r.norm_b),
                r.status.label(),
            ]
        })
        .collect();
    let dir = out_dir(&a.common)?;
    let path = dir.join("pullback.csv");
    write_table(
        &path,
        &provenance(
            &p,
            &[
                ("experiment", "pullback".into()),
                ("mode", mode_label(Mode::Transformed).into()),
                ("t_star", fmt_f64(a.tstar)),
                ("noise", cfg.noise.to_string()),
            ],
        ),
        &["s", "seed", "radius_a", "radius_b", "distance", "norm_a", "norm_b", "status"],
        &rows,
    )?;
    println!("{} rows written to {}", rows.len(), path.display());
    Ok(())
}

fn absorb(a: ExperimentArgs) -> Res<()> {
    let p = params_of(&a.common)?;
    let seeds = experiment_seeds(&a, &p);
    let table = absorbing_radius_estimate(&a.radii, &a.s_list, &seeds, &p, !a.no_noise, a.tstar)?;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.radius),
                fmt_f64(r.s),
                r.seed.to_string(),
                fmt_f64(r.g),
                r.status.label(),
            ]
        })
        .collect();
    let dir = out_dir(&a.common)?;
    let path = dir.join("absorb.csv");
    let mut prov = vec![
        ("experiment", "absorb".to_string()),
        ("t_star", fmt_f64(a.tstar)),
        ("noise", table.noise.to_string()),
        ("radii", list(&a.radii)),
    ];
    if table.noise {
        prov.push(("status", "informational (single noise path)".into()));
    }
    write_table(&path, &provenance(&p, &prov), &["radius", "s", "seed", "g", "status"], &rows)?;
    println!("{} rows written to {}", rows.len(), path.display());
    Ok(())
}

fn basis(a: BasisArgs) -> Res<()> {
    let p = params_of(&a.common)?;
    let b = build_mode_basis(p.grid, p.noise_mode_count)?
        .with_spectrum_exponent(p.noise_spectrum_exponent);
    let dir = out_dir(&a.common)?;
    let prov = provenance(&p, &[("trace_weighted", fmt_f64(b.trace_weighted()))]);
    let rows: Vec<Vec<String>> = (0..b.len())
        .map(|n| vec![(n + 1).to_string(), fmt_f64(b.alpha()[n]), fmt_f64(b.lambda(n))])
        .collect();
    write_table(&dir.join("spectrum.csv"), &prov, &["n", "alpha_hat", "lambda"], &rows)?;
    for r in &rows {
        println!("{}", r.join(","));
    }
    if a.modes {
        let g = p.grid;
        let mut rows = Vec::with_capacity(b.len() * g.len());
        for n in 0..b.len() {
            let e = b.mode(n);
            for k in 0..g.len() {
                let (i, j) = (k % g.nx, k / g.nx);
                let [ex, ey] = e.at(k);
                rows.push(vec![
                    (n + 1).to_string(),
                    i.to_string(),
                    j.to_string(),
                    fmt_f64(ex),
                    fmt_f64(ey),
                ]);
            }
        }
        write_table(&dir.join("modes.csv"), &prov, &["n", "i", "j", "e_x", "e_y"], &rows)?;
    }
    Ok(())
}

fn replay(a: ReplayArgs) -> Res<()> {
    let ck = match &a.checkpoint {
        Some(path) => load_checkpoint(path)?,
        None => {
            let p = params_of(&a.common)?;
            let integ = Integrator::new(p.clone(), scheme_for(a.mode.into()))?;
            let (v, d) = initial_datum(integ.basis(), 1.0);
            Checkpoint {
                snapshot: integ.prepare(integ.state_at(0.0, v, d)?)?,
                params: p,
                mode: a.mode.into(),
                substeps: 1,
            }
        }
    };
    let p = ck.params.clone();
    let integ = Integrator::new(p.clone(), scheme_for(ck.mode))?.with_substeps(ck.substeps)?;
    let k0 = ck.snapshot.state.step;
    let k1 = p.step_of(a.tend)?;
    if k1 < k0 {
        return Err(Failure::Input(format!("--tend {} precedes the start time", a.tend)));
    }
    let ks = match a.split {
        Some(t) => p.step_of(t)?,
        None => k0 + (k1 - k0) / 2,
    };
    if !(k0..=k1).contains(&ks) {
        return Err(Failure::Input("--split must lie between start and end".into()));
    }
    let whole = integ.advance(ck.snapshot.clone(), (k1 - k0) as u64)?;
    let mid = integ.advance(ck.snapshot.clone(), (ks - k0) as u64)?;
    let dir = out_dir(&a.common)?;
    let path = dir.join("replay_mid.ckpt");
    save_checkpoint(
        &Checkpoint {
            snapshot: mid,
            ..ck.clone()
        },
        &path,
    )?;
    let back = load_checkpoint(&path)?;
    let resumed = Integrator::new(back.params.clone(), scheme_for(back.mode))?
        .with_substeps(back.substeps)?;
    let split = resumed.advance(back.snapshot, (k1 - ks) as u64)?;
    let diff = snapshot_diff(&whole, &split);
    println!(
        "replay {} -> {} -> {} ({} mode): max diff {}",
        p.time_of(k0),
        p.time_of(ks),
        p.time_of(k1),
        mode_label(ck.mode),
        diff
    );
    if diff == 0.0 {
        Ok(())
    } else {
        Err(Failure::Verification(format!("resumed run differs by {diff:e}")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Simulate(a) => simulate(a),
        Cmd::Verify(a) => verify(a),
        Cmd::Pullback(a) => pullback(a),
        Cmd::Absorb(a) => absorb(a),
        Cmd::Basis(a) => basis(a),
        Cmd::Replay(a) => replay(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(3)
        }
    }
}
