use nalgebra::{DMatrix, SymmetricEigen};
use nematic_core::noise::{build_mode_basis, PathStore};
use nematic_core::ops::{laplacian, leray_project, Bc};
use nematic_core::{GridSpec, VectorField2};

fn unit_field(g: GridSpec, k: usize) -> VectorField2 {
    let n = g.len();
    let mut v = VectorField2::zeros(g);
    v.comp_mut(k / n)[k % n] = 1.0;
    v
}

fn flatten(v: &VectorField2) -> Vec<f64> {
    v.comp(0).iter().chain(v.comp(1)).copied().collect()
}

/// Smallest nonzero eigenvalue of P(-lap)P from a dense eigensolve, with the
/// inner product weighted by the cell area.
fn dense_stokes_ground(g: GridSpec) -> f64 {
    let n2 = 2 * g.len();
    let mut p = DMatrix::zeros(n2, n2);
    let mut k = DMatrix::zeros(n2, n2);
    for c in 0..n2 {
        let e = unit_field(g, c);
        let (pe, _) = leray_project(&e).unwrap();
        let le = laplacian(&e, Bc::Dirichlet);
        for (r, x) in flatten(&pe).into_iter().enumerate() {
            p[(r, c)] = x;
        }
        for (r, x) in flatten(&le).into_iter().enumerate() {
            k[(r, c)] = -x;
        }
    }
    let a = &p * &k * &p;
    let a = (&a + a.transpose()) * 0.5;
    let se = SymmetricEigen::new(a);
    let mut ev: Vec<f64> = se.eigenvalues.iter().copied().filter(|x| *x > 1e-6).collect();
    ev.sort_by(f64::total_cmp);
    ev[0]
}

#[test]
fn ground_mode_matches_dense_eigensolve() {
    let g = GridSpec::unit_square(16).unwrap();
    let dense = dense_stokes_ground(g);
    let b = build_mode_basis(g, 4).unwrap();
    let rel = (b.alpha()[0] - dense) / dense;
    println!("alpha_1 = {}, dense = {dense}, rel = {rel:e}", b.alpha()[0]);
    assert!(rel >= -1e-9, "Ritz value must bound the eigenvalue from above");
    assert!(rel < 0.01);
}

#[test]
fn increment_moments() {
    let dt = 2e-3;
    let p = PathStore::new(2024, dt, 3).unwrap();
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|k| p.increment(1, k as i64 - 50_000).unwrap()).collect();
    let ys: Vec<f64> = (0..n).map(|k| p.increment(2, k as i64 - 50_000).unwrap()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 4.0 * (dt / n as f64).sqrt());
    assert!((var / dt - 1.0).abs() < 0.05);
    let my = ys.iter().sum::<f64>() / n as f64;
    let vy = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / (n - 1) as f64;
    let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mean) * (y - my)).sum::<f64>() / (n - 1) as f64;
    assert!((cov / (var * vy).sqrt()).abs() < 0.02);
}

#[test]
fn w2_unit_time_variance() {
    let dt = 0.01;
    let samples: Vec<f64> = (0..10_000u64)
        .map(|s| PathStore::new(s, dt, 1).unwrap().w2_value(1.0).unwrap())
        .collect();
    let n = samples.len() as f64;
    let m = samples.iter().sum::<f64>() / n;
    let v = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((v - 1.0).abs() < 0.05, "var = {v}");
}
