use divcol::colloc2d::{
    assemble_vp, assemble_vvp, build_dof_map, divergence_max, CaseDefinition2D, DiscreteSolution2D, Formulation,
};
use divcol::dofs::{DofMap, EquationKind};
use divcol::spaces::{build_complex_2d, rotor_coeffs_2d, ComplexSpaces2D, Face};
use divcol::splines::uniform_breakpoints;
use divcol::sparse::CsrMatrix;
use divcol::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spaces(k: usize, n: usize) -> ComplexSpaces2D<f64> {
    let b = uniform_breakpoints(n).unwrap();
    build_complex_2d(k, &b, &b).unwrap()
}

fn assemble(case: &CaseDefinition2D, dofs: &DofMap, x: &[f64], jac: bool) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
    let sol = DiscreteSolution2D::from_unknowns(case, dofs, x)?;
    match case.formulation {
        Formulation::VP => assemble_vp(case, dofs, &sol, jac),
        Formulation::VVP => assemble_vvp(case, dofs, &sol, jac),
    }
}

fn check_jacobian_fd(case: &CaseDefinition2D, seed: u64) {
    let dofs = build_dof_map(case).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..dofs.num_unknowns()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (r0, jac) = assemble(case, &dofs, &x, true).unwrap();
    let jac = jac.unwrap().to_dense();
    let step = 1e-7;
    // rounding in forward differences scales with the largest entry of each row
    let row_scale: Vec<f64> = jac.iter().map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
    let mut worst = 0.0f64;
    for j in 0..x.len() {
        let mut xp = x.clone();
        xp[j] += step;
        let (r1, _) = assemble(case, &dofs, &xp, false).unwrap();
        let col_scale = (0..r0.len()).map(|i| jac[i][j].abs()).fold(0.0, f64::max).max(1.0);
        for i in 0..r0.len() {
            let fd = (r1[i] - r0[i]) / step;
            let scale = col_scale.max(row_scale[i]);
            worst = worst.max((fd - jac[i][j]).abs() / scale);
        }
    }
    assert!(worst < 1e-5, "worst relative column mismatch {worst:e}");
}

fn forcing(p: [f64; 2]) -> [f64; 2] {
    [(3.0 * p[0]).sin() + p[1], p[0] * p[1] - 0.5]
}

fn lid(p: [f64; 2], f: Face) -> [f64; 2] {
    if f == Face::YMax {
        [1.0 + 0.1 * p[0], 0.0]
    } else {
        [0.0, 0.0]
    }
}

#[test]
fn vp_jacobian_matches_finite_differences() {
    let case = CaseDefinition2D::new(Formulation::VP, spaces(2, 8), 0.05).with_forcing(forcing).with_dirichlet(lid);
    check_jacobian_fd(&case, 1);
}

#[test]
fn vvp_jacobian_matches_finite_differences() {
    let case = CaseDefinition2D::new(Formulation::VVP, spaces(2, 8), 0.05).with_forcing(forcing).with_dirichlet(lid);
    check_jacobian_fd(&case, 2);
    let case = CaseDefinition2D::new(Formulation::VVP, spaces(1, 5), 0.3).with_dirichlet(lid);
    check_jacobian_fd(&case, 3);
}

#[test]
fn zero_state_vp_residual_is_minus_forcing() {
    let case = CaseDefinition2D::new(Formulation::VP, spaces(2, 4), 0.1).with_forcing(forcing);
    let dofs = build_dof_map(&case).unwrap();
    let (r, _) = assemble(&case, &dofs, &dofs.zero_state(), false).unwrap();
    for (eq, ri) in dofs.equations().iter().zip(&r) {
        match eq.kind {
            EquationKind::Momentum(c) => assert!((ri + forcing([eq.coords[0], eq.coords[1]])[c]).abs() < 1e-14),
            _ => assert_eq!(*ri, 0.0),
        }
    }
}

#[test]
fn zero_state_vvp_residual_carries_tangential_data() {
    let case = CaseDefinition2D::new(Formulation::VVP, spaces(2, 4), 0.1).with_forcing(forcing).with_dirichlet(lid);
    let dofs = build_dof_map(&case).unwrap();
    // the lid fixes no normal component, so the zero state has zero fixed values
    let (r, _) = assemble(&case, &dofs, &dofs.zero_state(), false).unwrap();
    let cpen = case.penalty_constant;
    for (eq, ri) in dofs.equations().iter().zip(&r) {
        let pt = [eq.coords[0], eq.coords[1]];
        match eq.kind {
            EquationKind::Momentum(c) => assert!((ri + forcing(pt)[c]).abs() < 1e-14),
            EquationKind::Constitutive(_) => {
                let mut expected = 0.0;
                for f in eq.faces.iter() {
                    let t = f.ccw_tangent_2d();
                    let g = lid(pt, f);
                    expected -= cpen / eq.h[f.axis()] * (g[0] * t[0] + g[1] * t[1]);
                }
                assert!((ri - expected).abs() < 1e-12, "{ri} vs {expected}");
                if !eq.is_boundary() {
                    assert_eq!(*ri, 0.0);
                }
            }
            _ => assert_eq!(*ri, 0.0),
        }
    }
}

#[test]
fn constant_vorticity_state() {
    let s = spaces(2, 4);
    let case = CaseDefinition2D::new(Formulation::VVP, s.clone(), 0.1);
    let dofs = build_dof_map(&case).unwrap();
    let mut sol = DiscreteSolution2D::zeros(&s, Formulation::VVP);
    sol.omega = Some(vec![0.7; s.psi.dim()]);
    let (r, _) = assemble_vvp(&case, &dofs, &sol, false).unwrap();
    for (eq, ri) in dofs.equations().iter().zip(&r) {
        match eq.kind {
            EquationKind::Momentum(_) => assert!(ri.abs() < 1e-13),
            EquationKind::Constitutive(_) if !eq.is_boundary() => assert!((ri - 0.7).abs() < 1e-14),
            _ => {}
        }
    }
}

#[test]
fn rotor_velocity_satisfies_continuity_up_to_lambda() {
    let s = spaces(2, 6);
    let case = CaseDefinition2D::new(Formulation::VP, s.clone(), 1.0);
    let dofs = build_dof_map(&case).unwrap();
    // psi = -x y gives u = (-x, y)
    let psi = s.psi.interpolate(|p| -p[0] * p[1]).unwrap();
    let (ux, uy) = rotor_coeffs_2d(&s, &psi).unwrap();
    let mut sol = DiscreteSolution2D::zeros(&s, Formulation::VP);
    sol.ux = ux;
    sol.uy = uy;
    sol.lambda = 0.25;
    let (r, _) = assemble_vp(&case, &dofs, &sol, false).unwrap();
    for (eq, ri) in dofs.equations().iter().zip(&r) {
        if eq.kind == EquationKind::Continuity {
            assert!((ri - 0.25).abs() < 1e-13);
        }
    }
    assert!(divergence_max(&sol, 500).unwrap() < 1e-13);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    sol.ux.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    assert!(divergence_max(&sol, 500).unwrap() > 1e-3);
}

/// Plane Poiseuille-Couette flow `u = (y + y(1-y), 0)`, exactly representable for k' >= 2.
fn shear_case(formulation: Formulation, nu: f64) -> (CaseDefinition2D, DiscreteSolution2D) {
    let s = spaces(2, 3);
    let u = |y: f64| y + y * (1.0 - y);
    let force = move |p: [f64; 2]| match formulation {
        // -nu u'' = 2 nu; convection vanishes
        Formulation::VP => [2.0 * nu, 0.0],
        // omega = -u'(y) = -(2 - 2y); nu d(omega)/dy = 2 nu; omega x u = (0, omega u); P = 0
        Formulation::VVP => [2.0 * nu, -(2.0 - 2.0 * p[1]) * u(p[1])],
    };
    let case = CaseDefinition2D::new(formulation, s.clone(), nu)
        .with_forcing(force)
        .with_dirichlet(move |p, _| [u(p[1]), 0.0]);
    let mut sol = DiscreteSolution2D::zeros(&s, formulation);
    sol.ux = s.vel_x.interpolate(|p| u(p[1])).unwrap();
    if formulation == Formulation::VVP {
        sol.omega = Some(s.psi.interpolate(|p| -(2.0 - 2.0 * p[1])).unwrap());
    }
    (case, sol)
}

#[test]
fn exact_representable_flow_has_zero_residual() {
    for f in [Formulation::VP, Formulation::VVP] {
        let (case, sol) = shear_case(f, 0.3);
        let dofs = build_dof_map(&case).unwrap();
        let (r, _) = divcol::colloc2d::assemble(&case, &dofs, &sol, false).unwrap();
        let m = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(m <= 1e-10, "{f}: residual {m:e}");
        let (solved, rep) = divcol::colloc2d::solve(&case, &Default::default()).unwrap();
        assert!(rep.converged);
        let d = solved.ux.iter().zip(&sol.ux).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-9, "{f}: solved field differs by {d:e}");
    }
}

#[test]
fn invalid_cases_are_rejected() {
    let s = spaces(1, 4);
    let vp = CaseDefinition2D::new(Formulation::VP, s.clone(), 1.0);
    assert!(matches!(build_dof_map(&vp), Err(Error::UnsupportedDegree { .. })));
    let bad_nu = CaseDefinition2D::new(Formulation::VVP, s.clone(), 0.0);
    assert!(build_dof_map(&bad_nu).is_err());
    let bad_pen = CaseDefinition2D::new(Formulation::VVP, s, 1.0).with_penalty(-1.0);
    assert!(build_dof_map(&bad_pen).is_err());
}

#[test]
fn stokes_problem_converges_in_one_newton_step() {
    let case = CaseDefinition2D::new(Formulation::VVP, spaces(2, 6), 1.0).with_dirichlet(lid).stokes(true);
    let (_, rep) = divcol::colloc2d::solve(&case, &Default::default()).unwrap();
    assert_eq!(rep.iterations, 1);
}
