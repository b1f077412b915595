use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nematic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nematic")).args(args).output().unwrap()
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(
        &path,
        format!(
            "# small grid\nmu = 1\npotential_coeffs = -1, 1\nh_vec = 0.1, 0, 0.1\n\
             noise_mode_count = 3\ngrid = 8, 8, 1, 1\ndt = 1e-3\nseed = 4\n{extra}"
        ),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned() + &String::from_utf8_lossy(&o.stderr)
}

#[test]
fn simulate_writes_strided_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().to_str().unwrap();
    let o = nematic(&["simulate", "--config", &cfg, "--out", out, "--tend", "0.02", "--stride", "5"]);
    assert!(o.status.success(), "{}", text(&o));
    let csv = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("t,step,"));
    let steps: Vec<i64> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(steps, vec![0, 5, 10, 15, 20]);
    assert!(dir.path().join("params.cfg").exists());
}

#[test]
fn identical_runs_write_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = small_config(d.path(), "");
        let o = nematic(&[
            "simulate", "--config", &cfg, "--out", d.path().to_str().unwrap(),
            "--tend", "0.01", "--mode", "transformed", "--checkpoint",
        ]);
        assert!(o.status.success(), "{}", text(&o));
    }
    for f in ["diagnostics.csv", "final.ckpt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn bad_config_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "bogus = 1\n");
    let o = nematic(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    let missing = nematic(&["simulate", "--config", "/nonexistent/x.cfg"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn blow_up_exits_with_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let o = nematic(&[
        "simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap(),
        "--tend", "0.1", "--radius", "1e9",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
}

#[test]
fn replay_reports_zero_difference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let o = nematic(&[
        "replay", "--config", &cfg, "--out", dir.path().to_str().unwrap(),
        "--tend", "0.02", "--mode", "transformed",
    ]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("max diff 0"), "{}", text(&o));
    assert!(dir.path().join("replay_mid.ckpt").exists());
}

#[test]
fn verify_subset_passes() {
    let o = nematic(&["verify", "--only", "1,10"]);
    assert!(o.status.success(), "{}", text(&o));
    let out = text(&o);
    assert!(out.contains("PASS  1 potential-gradient"));
    assert!(out.contains("PASS 10 operator-convergence"));
    assert!(!out.contains("FAIL"));
}

#[test]
fn basis_spectrum_is_decreasing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let o = nematic(&["basis", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "--modes"]);
    assert!(o.status.success(), "{}", text(&o));
    let spec = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let rows: Vec<Vec<f64>> = spec
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('n'))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    // degenerate pairs may differ at roundoff
    for w in rows.windows(2) {
        assert!(w[1][2] <= w[0][2] * (1.0 + 1e-12));
        assert!(w[1][1] >= w[0][1] * (1.0 - 1e-12));
    }
    let modes = fs::read_to_string(dir.path().join("modes.csv")).unwrap();
    assert_eq!(modes.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3 * 64);
}
