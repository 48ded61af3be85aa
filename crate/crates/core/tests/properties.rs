use divcol::mapped::{polar_sector_map, pullback_fields, pushforward_fields, Fields2D};
use divcol::spaces::{
    build_complex_2d, build_complex_3d, curl_coeffs_3d, divergence_coeffs_2d, divergence_coeffs_3d, gradient_coeffs_3d,
    rotor_coeffs_2d,
};
use divcol::splines::{stretched_breakpoints, KnotVector};
use proptest::prelude::*;

fn breakpoints(max_elements: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, 1..=max_elements).prop_map(|w| {
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for x in &w[..w.len() - 1] {
            acc += x / total;
            out.push(acc);
        }
        out.push(1.0);
        out
    })
}

fn coeffs(n: usize, seed: u64) -> Vec<f64> {
    (0..n).map(|i| ((i as f64 + 1.0) * 0.7548776662 + seed as f64 * 0.5698402910).fract() - 0.5).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn basis_is_a_nonnegative_partition_of_unity(degree in 0usize..5, bp in breakpoints(6), x in 0.0f64..=1.0) {
        let kv = KnotVector::open(degree, &bp).unwrap();
        let b = kv.eval_basis(x, 1.min(degree)).unwrap();
        prop_assert!((b.values.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        prop_assert!(b.values.iter().all(|v| *v >= -1e-15));
        if degree > 0 {
            prop_assert!(b.first_derivs.iter().sum::<f64>().abs() < 1e-10 * max_abs(&b.first_derivs).max(1.0));
        }
    }

    #[test]
    fn differentiated_coefficients_reproduce_the_derivative(degree in 1usize..5, bp in breakpoints(6), x in 0.0f64..=1.0, seed in 0u64..1000) {
        let kv = KnotVector::open(degree, &bp).unwrap();
        let c = coeffs(kv.num_basis(), seed);
        let b = kv.eval_basis(x, 1).unwrap();
        let direct: f64 = (0..b.len()).map(|l| b.deriv(1, l) * c[b.first_basis + l]).sum();
        let dc = kv.differentiate_coeffs(&c).unwrap();
        let via = kv.derivative_space().unwrap().eval_spline(&dc, x).unwrap();
        prop_assert!((direct - via).abs() < 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn divergence_of_rotor_vanishes_2d(kprime in 1usize..4, bx in breakpoints(5), by in breakpoints(5), seed in 0u64..1000) {
        let s = build_complex_2d(kprime, &bx, &by).unwrap();
        let psi = coeffs(s.psi.dim(), seed);
        let (ux, uy) = rotor_coeffs_2d(&s, &psi).unwrap();
        let div = divergence_coeffs_2d(&s, &ux, &uy).unwrap();
        let scale = max_abs(&ux).max(max_abs(&uy)).max(1.0);
        prop_assert!(max_abs(&div) < 1e-13 * scale);
    }

    #[test]
    fn discrete_de_rham_identities_hold_3d(kprime in 1usize..3, bx in breakpoints(3), by in breakpoints(3), bz in breakpoints(3), seed in 0u64..1000) {
        let s = build_complex_3d(kprime, [&bx, &by, &bz]).unwrap();
        let phi = coeffs(s.phi.dim(), seed);
        let g = gradient_coeffs_3d(&s, &phi).unwrap();
        let cg = curl_coeffs_3d(&s, [&g[0], &g[1], &g[2]]).unwrap();
        let scale = g.iter().map(|v| max_abs(v)).fold(1.0, f64::max);
        prop_assert!(cg.iter().all(|v| max_abs(v) < 1e-13 * scale));
        let w: Vec<Vec<f64>> = (0..3).map(|d| coeffs(s.omega[d].dim(), seed + d as u64)).collect();
        let u = curl_coeffs_3d(&s, [&w[0], &w[1], &w[2]]).unwrap();
        let div = divergence_coeffs_3d(&s, [&u[0], &u[1], &u[2]]).unwrap();
        let scale = u.iter().map(|v| max_abs(v)).fold(1.0, f64::max);
        prop_assert!(max_abs(&div) < 1e-13 * scale);
    }

    #[test]
    fn stretched_breakpoints_are_symmetric_and_increasing(n in 2usize..80) {
        let b: Vec<f64> = stretched_breakpoints(n).unwrap();
        prop_assert_eq!(b.len(), n + 1);
        prop_assert!(b[0] == 0.0 && b[n] == 1.0);
        prop_assert!(b.windows(2).all(|w| w[1] > w[0]));
        prop_assert!((0..=n).all(|i| b[i] + b[n - i] == 1.0));
    }

    #[test]
    fn piola_round_trip_on_annular_sectors(
        r_in in 0.1f64..2.0, width in 0.1f64..3.0, angle in 0.2f64..6.2,
        xi in (0.0f64..=1.0, 0.0f64..=1.0), u in (-5.0f64..5.0, -5.0f64..5.0), p in -5.0f64..5.0,
    ) {
        let map = polar_sector_map(r_in, r_in + width, angle).unwrap();
        let m = map.metric([xi.0, xi.1]).unwrap();
        prop_assert!(m.jacobian > 0.0);
        let f = Fields2D { u: [u.0, u.1], p, omega: 0.3 };
        let back = pushforward_fields(&m, pullback_fields(&m, f));
        prop_assert!((back.u[0] - f.u[0]).abs() < 1e-11 && (back.u[1] - f.u[1]).abs() < 1e-11);
        prop_assert!((back.p - f.p).abs() < 1e-12 && back.omega == f.omega);
    }
}
