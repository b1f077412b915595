use nematic_core::PotentialCoeffs;
use proptest::prelude::*;

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-3.0f64..3.0, 1..4), 0.1f64..3.0).prop_map(|(mut c, lead)| {
        c.push(lead);
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn directional_derivative_of_bulk_density(
        c in coeffs(),
        d in prop::array::uniform3(-1.5f64..1.5),
        xi in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let pot = PotentialCoeffs::new(c).unwrap();
        let eps = 1e-5;
        let sq = |s: f64| (0..3).map(|k| (d[k] + s * xi[k]).powi(2)).sum::<f64>();
        let fd = (pot.tilde_big_f(sq(eps)).unwrap() - pot.tilde_big_f(sq(-eps)).unwrap()) / (2.0 * eps);
        let f = pot.f_of_d(d);
        let exact = 2.0 * (f[0] * xi[0] + f[1] * xi[1] + f[2] * xi[2]);
        // rounding floor of the difference quotient
        let floor = 1e-10 * (1.0 + pot.tilde_big_f(sq(0.0)).unwrap().abs());
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs() + floor, "{} vs {}", fd, exact);
    }

    #[test]
    fn antiderivative_vanishes_at_zero_and_differentiates_back(c in coeffs(), x in 0.0f64..4.0) {
        let pot = PotentialCoeffs::new(c).unwrap();
        prop_assert_eq!(pot.tilde_big_f(0.0).unwrap(), 0.0);
        let h = 1e-5;
        let fd = (pot.tilde_big_f(x + h).unwrap() - pot.tilde_big_f((x - h).max(0.0)).unwrap())
            / (x + h - (x - h).max(0.0));
        let scale = 1.0 + pot.tilde_f(x).unwrap().abs() + pot.tilde_big_f(x + h).unwrap().abs();
        prop_assert!((fd - pot.tilde_f(x).unwrap()).abs() < 1e-5 * scale);
    }

    #[test]
    fn implicit_radial_step_is_a_contraction_toward_the_zero_set(
        r in 0.0f64..20.0,
        tau in 1e-4f64..1e-2,
    ) {
        let pot = PotentialCoeffs::ginzburg_landau(1.0);
        let s = pot.implicit_radial(r, tau);
        // backward Euler of r' = -(r^2 - 1) r: s + tau (s^2 - 1) s = r
        prop_assert!((s + tau * (s * s - 1.0) * s - r).abs() < 1e-10 * (1.0 + r));
        if r >= 1.0 {
            prop_assert!(s <= r && s >= 1.0 - 1e-12);
        } else {
            prop_assert!(s >= r && s <= 1.0 + 1e-12);
        }
    }
}
