use divcol::spaces::{build_complex_2d, build_complex_3d, eval_field, TensorSpace};
use divcol::splines::{stretched_breakpoints, uniform_breakpoints};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Recovering random coefficients from their Greville values shows that the
// continuity collocation matrix is invertible on this grid.
fn assert_greville_collocation_invertible(space: &TensorSpace<f64>, rng: &mut ChaCha8Rng, tol: f64) {
    let c: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let dims = space.dims();
    let recovered = space.interpolate(|x| eval_field(space, &c, &x[..dims], 0).unwrap().value).unwrap();
    let err = c.iter().zip(&recovered).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < tol, "dim {} error {err}", space.dim());
}

#[test]
fn continuity_collocation_is_invertible_2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for kprime in 1..=3 {
        for n in [4, 8, 16, 32, 64] {
            for bp in [uniform_breakpoints::<f64>(n).unwrap(), stretched_breakpoints(n).unwrap()] {
                let s = build_complex_2d(kprime, &bp, &bp).unwrap();
                assert_greville_collocation_invertible(&s.pres, &mut rng, 1e-10);
            }
        }
    }
    // degree-20 Greville interpolation is ill-conditioned but nonsingular
    let s = build_complex_2d(20, &uniform_breakpoints::<f64>(8).unwrap(), &uniform_breakpoints::<f64>(8).unwrap()).unwrap();
    assert_greville_collocation_invertible(&s.pres, &mut rng, 1e-3);
}

#[test]
fn continuity_collocation_is_invertible_3d() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for kprime in 1..=3 {
        for n in [4, 8, 16] {
            let bp = uniform_breakpoints::<f64>(n).unwrap();
            let s = build_complex_3d(kprime, [&bp, &bp, &bp]).unwrap();
            assert_greville_collocation_invertible(&s.pres, &mut rng, 1e-10);
        }
    }
}
