use std::f64::consts::PI;

use divcol::colloc2d::{assemble_vvp, build_dof_map, CaseDefinition2D, DiscreteSolution2D, Formulation};
use divcol::mapped::{
    assemble_mapped_vvp_stokes, build_dof_map_mapped, couette_case, polar_map, pullback_fields, pushforward_fields,
    solve_mapped, wavy_cavity_case, wavy_map, CouetteExact, Fields2D, GeometryMap2D, MappedSolution, MappedStokesCase,
    WAVY_PRESETS,
};
use divcol::spaces::{build_complex_2d, ComplexSpaces2D, Face};
use divcol::splines::uniform_breakpoints;
use divcol::verify::{error_norms, SolutionView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spaces(k: usize, n: usize) -> ComplexSpaces2D<f64> {
    let b = uniform_breakpoints(n).unwrap();
    build_complex_2d(k, &b, &b).unwrap()
}

fn forcing(p: [f64; 2]) -> [f64; 2] {
    [(3.0 * p[1]).sin() + p[0], p[0] * p[1] - 0.25]
}

fn data(p: [f64; 2], f: Face) -> [f64; 2] {
    match f {
        Face::YMax => [1.0 - p[0] * p[0], 0.0],
        Face::XMin => [0.3 * p[1], 0.0],
        _ => [0.0, 0.1 * p[0]],
    }
}

#[test]
fn identity_map_reproduces_cartesian_rows() {
    let s = spaces(2, 4);
    let plain = CaseDefinition2D::new(Formulation::VVP, s.clone(), 0.7)
        .stokes(true)
        .with_forcing(forcing)
        .with_dirichlet(data);
    let mapped = MappedStokesCase::new(GeometryMap2D::Identity, s.clone(), 0.7)
        .with_forcing(forcing)
        .with_dirichlet(data);
    let d0 = build_dof_map(&plain).unwrap();
    let d1 = build_dof_map_mapped(&mapped).unwrap();
    assert_eq!(d0.num_unknowns(), d1.num_unknowns());
    assert_eq!(d0.zero_state(), d1.zero_state());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let x: Vec<f64> = (0..d0.num_unknowns()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = DiscreteSolution2D::from_unknowns(&plain, &d0, &x).unwrap();
        let b = MappedSolution::from_unknowns(&mapped, &d1, &x).unwrap();
        let (r0, j0) = assemble_vvp(&plain, &d0, &a, true).unwrap();
        let (r1, j1) = assemble_mapped_vvp_stokes(&mapped, &d1, &b, true).unwrap();
        for (u, v) in r0.iter().zip(&r1) {
            assert!((u - v).abs() <= 1e-13 * u.abs().max(1.0), "{u} vs {v}");
        }
        let (j0, j1) = (j0.unwrap(), j1.unwrap());
        for i in 0..j0.nrows() {
            for (c, v) in j0.row(i).0.iter().zip(j0.row(i).1) {
                assert!((v - j1.get(i, *c)).abs() <= 1e-13 * v.abs().max(1.0));
            }
        }
    }
}

#[test]
fn metric_derivatives_match_finite_differences() {
    let maps = [polar_map(1.0, 2.0).unwrap(), wavy_map(1.0, 0.75, 1.0).unwrap(), GeometryMap2D::Polar { r_in: 0.5, r_out: 3.0, angle: 1.1 }];
    let h = 1e-6;
    for map in maps {
        for xi in [[0.3, 0.6], [0.81, 0.17], [0.05, 0.95]] {
            let m = map.metric(xi).unwrap();
            let e = map.eval(xi);
            for k in 0..2 {
                let mut xp = xi;
                let mut xm = xi;
                xp[k] += h;
                xm[k] -= h;
                let (p, q) = (map.metric(xp).unwrap(), map.metric(xm).unwrap());
                for i in 0..2 {
                    let dx = (p.x[i] - q.x[i]) / (2.0 * h);
                    assert!((dx - e.df[i][k]).abs() < 1e-7);
                    for j in 0..2 {
                        let d = (p.df[i][j] - q.df[i][j]) / (2.0 * h);
                        assert!((d - m.ddf[k][i][j]).abs() < 1e-6);
                        let dc = (p.c[i][j] - q.c[i][j]) / (2.0 * h);
                        assert!((dc - m.dc[k][i][j]).abs() < 1e-6 * m.c[i][j].abs().max(1.0));
                    }
                }
                let dj = (1.0 / p.jacobian - 1.0 / q.jacobian) / (2.0 * h);
                assert!((dj - m.d_inv_jacobian[k]).abs() < 1e-7);
            }
        }
    }
}

#[test]
fn polar_map_values() {
    let map = polar_map(1.0, 2.0).unwrap();
    let m = map.metric([0.0, 0.0]).unwrap();
    assert!((m.x[0]).abs() < 1e-15 && (m.x[1] - 1.0).abs() < 1e-15);
    assert!((m.jacobian - 2.0 * PI).abs() < 1e-13);
    let top = map.eval([0.25, 1.0]).x;
    assert!((top[0] - 2.0).abs() < 1e-14 && top[1].abs() < 1e-14);
    assert!(polar_map(2.0, 1.0).is_err());
    assert_eq!("polar(1,2)".parse::<GeometryMap2D>().unwrap(), map);
    assert_eq!("wavy(1, 0.75, 1)".parse::<GeometryMap2D>().unwrap(), wavy_map(1.0, 0.75, 1.0).unwrap());
    assert!("wavy(1, 2, 1)".parse::<GeometryMap2D>().is_err());
    assert!("torus(1)".parse::<GeometryMap2D>().is_err());
}

#[test]
fn wavy_presets_are_valid() {
    for (a, b, c) in WAVY_PRESETS {
        let m = wavy_map(a, b, c).unwrap();
        m.check_orientation(200).unwrap();
        let bottom = m.eval([0.5, 0.0]).x[1];
        assert!((bottom - a * b * (c * PI * 0.5).sin()).abs() < 1e-14);
    }
}

#[test]
fn piola_round_trip() {
    let map = wavy_map(1.0, 0.75, 1.0).unwrap();
    let m = map.metric([0.37, 0.61]).unwrap();
    let f = Fields2D { u: [0.4, -1.3], p: 2.5, omega: -0.7 };
    let back = pushforward_fields(&m, pullback_fields(&m, f));
    for c in 0..2 {
        assert!((back.u[c] - f.u[c]).abs() < 1e-14);
    }
    assert!((back.p - f.p).abs() < 1e-14 && back.omega == f.omega);
}

#[test]
fn piola_transform_preserves_divergence() {
    // a parametric field with zero parametric divergence maps to a solenoidal field
    let s = spaces(2, 3);
    let map = polar_map(1.0, 2.0).unwrap();
    let mut sol = MappedSolution::zeros(map, &s);
    sol.ux = s.vel_x.interpolate(|p| p[1] * p[1]).unwrap();
    sol.uy = s.vel_y.interpolate(|p| p[0] * p[0]).unwrap();
    for xi in [[0.2, 0.3], [0.7, 0.9], [0.5, 0.5]] {
        let (_, ps) = sol.sample([xi[0], xi[1], 0.0]).unwrap();
        let div = ps.grad_u[0][0] + ps.grad_u[1][1];
        assert!(div.abs() < 1e-12, "{div}");
    }
}

#[test]
fn couette_constants() {
    let e = CouetteExact::new(1.0, 2.0, 1.0).unwrap();
    assert!((e.a + 1.0 / 3.0).abs() < 1e-15 && (e.b - 4.0 / 3.0).abs() < 1e-15);
    assert!((e.azimuthal(1.0) - 1.0).abs() < 1e-15 && e.azimuthal(2.0).abs() < 1e-15);
    let u = e.velocity([0.0, 1.0]);
    assert!((u[0] + 1.0).abs() < 1e-15 && u[1].abs() < 1e-15);
    let s = e.sample([0.6, 1.1, 0.0]);
    let w = s.grad_u[1][0] - s.grad_u[0][1];
    assert!((w - e.vorticity()).abs() < 1e-14);
    assert!((s.grad_u[0][0] + s.grad_u[1][1]).abs() < 1e-15);
}

#[test]
fn couette_solution_converges_with_zero_pressure() {
    let mut errs = Vec::new();
    for n in [4, 8, 16] {
        let (case, exact) = couette_case(1.0, 2.0, 1.0, spaces(2, n)).unwrap();
        let (sol, rep) = solve_mapped(&case, &Default::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        let r = error_norms(&sol, &|x: [f64; 3]| exact.sample(x)).unwrap();
        assert!(r.pressure.l2 < 1e-12, "{:e}", r.pressure.l2);
        errs.push(r.velocity.l2);
    }
    assert!(errs[1] < errs[0] / 2.5 && errs[2] < errs[1] / 2.5, "{errs:?}");
}

#[test]
fn wavy_cavity_is_symmetric_for_one_bump() {
    let case = wavy_cavity_case(1.0, 0.75, 1.0, spaces(2, 8), 1.0).unwrap();
    let (sol, _) = solve_mapped(&case, &Default::default()).unwrap();
    let mut umax = 0.0f64;
    let mut uy_mid = 0.0f64;
    for i in 0..=40 {
        for j in 0..=40 {
            let xi = [i as f64 / 40.0, j as f64 / 40.0, 0.0];
            let u = sol.sample(xi).unwrap().1.u;
            umax = umax.max(u[0].hypot(u[1]));
        }
        let (_, s) = sol.sample([0.5, i as f64 / 40.0, 0.0]).unwrap();
        uy_mid = uy_mid.max(s.u[1].abs());
    }
    assert!(umax > 0.9);
    assert!(uy_mid <= 1e-3 * umax, "{uy_mid:e} vs {umax}");
}

#[test]
fn metric_is_symmetric_with_det_j_squared() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for map in [polar_map(1.0, 2.0).unwrap(), wavy_map(0.25, 0.3, 5.0).unwrap()] {
        for _ in 0..50 {
            let m = map.metric([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).unwrap();
            assert_eq!(m.c[0][1], m.c[1][0]);
            let det = m.c[0][0] * m.c[1][1] - m.c[0][1] * m.c[1][0];
            assert!((det - m.jacobian * m.jacobian).abs() < 1e-10 * det);
        }
    }
}

#[test]
fn wavy_map_values() {
    let map = wavy_map(1.0, 0.75, 1.0).unwrap();
    let x = map.eval([0.5, 0.0]).x;
    assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 0.75).abs() < 1e-15);
    for t in [0.0, 0.3, 0.77, 1.0] {
        assert!((map.eval([t, 1.0]).x[1] - 1.0).abs() < 1e-15);
    }
}

#[test]
fn tangential_field_pulls_back_along_xi1() {
    // the unit azimuthal field (cos θ, −sin θ) is tangent to every circle r = const
    let map = polar_map(1.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let m = map.metric([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).unwrap();
        let th = m.x[0].atan2(m.x[1]);
        let f = pullback_fields(&m, Fields2D { u: [th.cos(), -th.sin()], p: 0.0, omega: 0.0 });
        assert!(f.u[1].abs() < 1e-12 && f.u[0].abs() > 0.1);
    }
}

#[test]
fn round_trip_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let maps = [GeometryMap2D::Identity, polar_map(1.0, 2.0).unwrap()];
    let presets = WAVY_PRESETS.map(|(a, b, c)| wavy_map(a, b, c).unwrap());
    for map in maps.iter().chain(&presets) {
        for _ in 0..50 {
            let m = map.metric([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).unwrap();
            let f = Fields2D { u: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], p: rng.gen_range(-1.0..1.0), omega: 0.5 };
            let back = pushforward_fields(&m, pullback_fields(&m, f));
            assert!((back.u[0] - f.u[0]).abs() < 1e-12 && (back.u[1] - f.u[1]).abs() < 1e-12 && (back.p - f.p).abs() < 1e-12);
        }
    }
}

#[test]
fn normal_traces_are_preserved() {
    let map = wavy_map(0.25, 0.3, 3.0).unwrap();
    for face in [Face::XMin, Face::XMax, Face::YMin, Face::YMax] {
        for i in 0..50 {
            let t = (i as f64 + 0.5) / 50.0;
            let mut xi = [t, t];
            xi[face.axis()] = if face.is_max() { 1.0 } else { 0.0 };
            let m = map.metric(xi).unwrap();
            let n_hat = face.normal();
            // parametric field tangent to the edge pushes forward to a field tangent to the mapped edge
            let tangential = if face.axis() == 0 { [0.0, 1.0] } else { [1.0, 0.0] };
            let u = pushforward_fields(&m, Fields2D { u: tangential, p: 0.0, omega: 0.0 }).u;
            let s = face.ccw_tangent_2d();
            let e = [m.df[0][0] * s[0] + m.df[0][1] * s[1], m.df[1][0] * s[0] + m.df[1][1] * s[1]];
            let n = [e[1], -e[0]];
            assert!((u[0] * n[0] + u[1] * n[1]).abs() < 1e-12);
            // a normal parametric field has a non-zero physical normal trace
            let normal = [n_hat[0], n_hat[1]];
            let u = pushforward_fields(&m, Fields2D { u: normal, p: 0.0, omega: 0.0 }).u;
            assert!((u[0] * n[0] + u[1] * n[1]).abs() > 1e-3);
        }
    }
}

#[test]
fn zero_state_leaves_only_penalty_terms() {
    let s = spaces(2, 3);
    // purely tangential wall data: zero strong normal values, non-zero tangential penalty
    let tangential = |x: [f64; 2], f: Face| {
        let r = x[0].hypot(x[1]);
        if f.axis() == 1 { [x[1] / r, -x[0] / r] } else { [x[0] / r, x[1] / r] }
    };
    let case = MappedStokesCase::new(polar_map(1.0, 2.0).unwrap(), s.clone(), 1.0).with_dirichlet(tangential);
    let dofs = build_dof_map_mapped(&case).unwrap();
    let sol = MappedSolution::from_unknowns(&case, &dofs, &dofs.zero_state()).unwrap();
    let (r, _) = assemble_mapped_vvp_stokes(&case, &dofs, &sol, false).unwrap();
    let (mut penalty_rows, mut nonzero) = (0, 0);
    for (eq, ri) in dofs.equations().iter().zip(&r) {
        if matches!(eq.kind, divcol::dofs::EquationKind::Constitutive(_)) && eq.is_boundary() {
            penalty_rows += 1;
            nonzero += usize::from(*ri != 0.0);
        } else {
            assert!(ri.abs() < 1e-13, "{:?} {ri}", eq.kind);
        }
    }
    assert!(penalty_rows > 0 && nonzero > 0);
}

#[test]
fn couette_field_matches_finite_differences() {
    let e = CouetteExact::new(1.0, 2.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = 1e-6;
    for _ in 0..100 {
        let r = rng.gen_range(1.0..2.0);
        let th = rng.gen_range(0.0..2.0 * PI);
        let x = [r * th.sin(), r * th.cos()];
        let s = e.sample([x[0], x[1], 0.0]);
        for d in 0..2 {
            let (mut a, mut b) = (x, x);
            a[d] += h;
            b[d] -= h;
            let (ua, ub) = (e.velocity(a), e.velocity(b));
            for c in 0..2 {
                let fd = (ua[c] - ub[c]) / (2.0 * h);
                assert!((fd - s.grad_u[c][d]).abs() < 1e-6 * s.grad_u[c][d].abs().max(1.0));
            }
        }
        // the Laplacian vanishes, so the Stokes momentum holds with zero pressure
        let lap: f64 = (0..2)
            .map(|d| {
                let (mut a, mut b) = (x, x);
                a[d] += 1e-4;
                b[d] -= 1e-4;
                (e.velocity(a)[0] - 2.0 * e.velocity(x)[0] + e.velocity(b)[0]) / 1e-8
            })
            .sum();
        assert!(lap.abs() < 1e-5, "{lap}");
    }
}
