//! Collocated residuals and exact Jacobians of the 3D velocity-pressure and
//! vorticity-velocity-pressure formulations on the unit cube.

use std::fmt;
use std::sync::Arc;

use crate::analytic::PointSample;
use crate::colloc2d::{default_penalty, Formulation};
use crate::dofs::{DofLayout, DofMap, Equation, EquationKind, Field, GaugeMode, RowEntries};
use crate::error::{check_len, Error, Result};
use crate::kernels::{assemble_rows, continuity, divergence_and_speed, sample, vp_momentum, Sampled};
use crate::solver::{newton_solve, NewtonSettings, SolveReport};
use crate::spaces::{ComplexSpaces3D, Derivs, Face, FaceSet};
use crate::sparse::CsrMatrix;
use crate::verify::{MappedPoint, SolutionView};

/// Body force `f(x, y, z)`.
pub type Forcing3D = Arc<dyn Fn([f64; 3]) -> [f64; 3] + Send + Sync>;
/// Prescribed boundary velocity at a point of a face.
pub type Boundary3D = Arc<dyn Fn([f64; 3], Face) -> [f64; 3] + Send + Sync>;

/// One 3D problem on the unit cube.
#[derive(Clone)]
pub struct CaseDefinition3D {
    pub formulation: Formulation,
    pub nu: f64,
    /// Right-hand side in the convention of `formulation`.
    pub forcing: Forcing3D,
    pub dirichlet: Boundary3D,
    pub penalty_constant: f64,
    pub spaces: ComplexSpaces3D<f64>,
    /// Drops the convective terms.
    pub stokes_only: bool,
    pub gauge: GaugeMode,
}

impl fmt::Debug for CaseDefinition3D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CaseDefinition3D")
            .field("formulation", &self.formulation)
            .field("nu", &self.nu)
            .field("penalty_constant", &self.penalty_constant)
            .field("kprime", &self.spaces.kprime)
            .field("stokes_only", &self.stokes_only)
            .field("gauge", &self.gauge)
            .finish_non_exhaustive()
    }
}

impl CaseDefinition3D {
    /// Homogeneous Dirichlet problem with zero forcing and the default penalty.
    pub fn new(formulation: Formulation, spaces: ComplexSpaces3D<f64>, nu: f64) -> Self {
        Self {
            formulation,
            nu,
            forcing: Arc::new(|_| [0.0; 3]),
            dirichlet: Arc::new(|_, _| [0.0; 3]),
            penalty_constant: default_penalty(spaces.kprime),
            spaces,
            stokes_only: false,
            gauge: GaugeMode::MeanZero,
        }
    }

    pub fn with_forcing(mut self, f: impl Fn([f64; 3]) -> [f64; 3] + Send + Sync + 'static) -> Self {
        self.forcing = Arc::new(f);
        self
    }

    pub fn with_dirichlet(mut self, g: impl Fn([f64; 3], Face) -> [f64; 3] + Send + Sync + 'static) -> Self {
        self.dirichlet = Arc::new(g);
        self
    }

    pub fn with_penalty(mut self, c: f64) -> Self {
        self.penalty_constant = c;
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn stokes(mut self, on: bool) -> Self {
        self.stokes_only = on;
        self
    }

    pub fn with_gauge(mut self, gauge: GaugeMode) -> Self {
        self.gauge = gauge;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::InvalidInput(format!("viscosity must be positive, got {}", self.nu)));
        }
        if !(self.penalty_constant > 0.0) || !self.penalty_constant.is_finite() {
            return Err(Error::InvalidInput(format!("penalty constant must be positive, got {}", self.penalty_constant)));
        }
        let min = self.formulation.min_kprime();
        if self.spaces.kprime < min {
            return Err(Error::UnsupportedDegree {
                degree: self.spaces.kprime,
                reason: format!("the {} formulation needs k' >= {min}", self.formulation),
            });
        }
        Ok(())
    }
}

/// Builds the unknown numbering and the collocation equations of a 3D case.
pub fn build_dof_map_3d(case: &CaseDefinition3D) -> Result<DofMap> {
    case.validate()?;
    let s = &case.spaces;
    let g = case.dirichlet.clone();
    let data = move |c: usize, x: [f64; 3], f: Face| g(x, f)[c];
    DofMap::build(&DofLayout {
        velocity: s.vel.iter().collect(),
        pressure: &s.pres,
        vorticity: if case.formulation == Formulation::VVP { s.omega.iter().collect() } else { vec![] },
        strong_normal: &|_| true,
        normal_data: &data,
        gauge: case.gauge,
    })
}

/// Discrete fields of a 3D solution.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution3D {
    pub spaces: ComplexSpaces3D<f64>,
    pub formulation: Formulation,
    pub u: [Vec<f64>; 3],
    /// Kinematic pressure (VP) or total pressure (VVP).
    pub p: Vec<f64>,
    /// Vorticity components (VVP only).
    pub omega: Option<[Vec<f64>; 3]>,
    pub lambda: f64,
}

impl DiscreteSolution3D {
    /// Zero fields.
    pub fn zeros(spaces: &ComplexSpaces3D<f64>, formulation: Formulation) -> Self {
        Self {
            spaces: spaces.clone(),
            formulation,
            u: std::array::from_fn(|c| vec![0.0; spaces.vel[c].dim()]),
            p: vec![0.0; spaces.pres.dim()],
            omega: (formulation == Formulation::VVP).then(|| std::array::from_fn(|c| vec![0.0; spaces.omega[c].dim()])),
            lambda: 0.0,
        }
    }

    /// Expands an unknown vector using the fixed boundary values of `dofs`.
    pub fn from_unknowns(case: &CaseDefinition3D, dofs: &DofMap, x: &[f64]) -> Result<Self> {
        check_len(dofs.num_unknowns(), x.len())?;
        Ok(Self {
            spaces: case.spaces.clone(),
            formulation: case.formulation,
            u: std::array::from_fn(|c| dofs.velocity_coeffs(x, c)),
            p: dofs.pressure_coeffs(x).to_vec(),
            omega: (dofs.num_vorticity_components() == 3)
                .then(|| std::array::from_fn(|c| dofs.vorticity_coeffs(x, c).to_vec())),
            lambda: x[dofs.lambda_index()],
        })
    }

    /// Unknown vector of this solution; prescribed velocity coefficients are dropped.
    pub fn to_unknowns(&self, dofs: &DofMap) -> Result<Vec<f64>> {
        let u: Vec<&[f64]> = self.u.iter().map(|v| v.as_slice()).collect();
        let w: Vec<&[f64]> = self.omega.iter().flat_map(|w| w.iter().map(|v| v.as_slice())).collect();
        dofs.pack(&u, &self.p, &w, self.lambda)
    }

    pub fn check(&self) -> Result<()> {
        for c in 0..3 {
            check_len(self.spaces.vel[c].dim(), self.u[c].len())?;
        }
        check_len(self.spaces.pres.dim(), self.p.len())?;
        match (&self.omega, self.formulation) {
            (Some(w), _) => (0..3).try_for_each(|c| check_len(self.spaces.omega[c].dim(), w[c].len())),
            (None, Formulation::VVP) => Err(Error::InvalidInput("VVP solution without vorticity".into())),
            (None, Formulation::VP) => Ok(()),
        }
    }

    /// Velocity components with derivatives up to `order`.
    pub fn velocity(&self, point: [f64; 3], order: usize) -> Result<[Derivs<f64>; 3]> {
        let mut out = [Derivs::zero(); 3];
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.spaces.vel[c].eval_basis(&point, order)?.field(&self.u[c]);
        }
        Ok(out)
    }

    /// Pressure variable as solved for (kinematic for VP, total for VVP).
    pub fn pressure_variable(&self, point: [f64; 3], order: usize) -> Result<Derivs<f64>> {
        Ok(self.spaces.pres.eval_basis(&point, order)?.field(&self.p))
    }

    /// Kinematic pressure (for VVP, `P − ½|u|²`) and its gradient.
    pub fn kinematic_pressure(&self, point: [f64; 3]) -> Result<(f64, [f64; 3])> {
        let p = self.pressure_variable(point, 1)?;
        if self.formulation == Formulation::VP {
            return Ok((p.value, p.grad));
        }
        let u = self.velocity(point, 1)?;
        let mut val = p.value;
        let mut grad = p.grad;
        for uc in &u {
            val -= 0.5 * uc.value * uc.value;
            for (d, g) in grad.iter_mut().enumerate() {
                *g -= uc.value * uc.grad[d];
            }
        }
        Ok((val, grad))
    }

    /// Vorticity and its gradient: the discrete field for VVP, `∇×u` for VP.
    pub fn vorticity(&self, point: [f64; 3]) -> Result<([f64; 3], [[f64; 3]; 3])> {
        let mut w = [0.0; 3];
        let mut gw = [[0.0; 3]; 3];
        match &self.omega {
            Some(om) => {
                for c in 0..3 {
                    let d = self.spaces.omega[c].eval_basis(&point, 1)?.field(&om[c]);
                    w[c] = d.value;
                    gw[c] = d.grad;
                }
            }
            None => {
                let u = self.velocity(point, 2)?;
                for c in 0..3 {
                    let (a, b) = ((c + 1) % 3, (c + 2) % 3);
                    w[c] = u[b].grad[a] - u[a].grad[b];
                    for d in 0..3 {
                        gw[c][d] = u[b].hess[a][d] - u[a].hess[b][d];
                    }
                }
            }
        }
        Ok((w, gw))
    }
}

impl SolutionView for DiscreteSolution3D {
    fn dims(&self) -> usize {
        3
    }

    fn kprime(&self) -> usize {
        self.spaces.kprime
    }

    fn formulation(&self) -> Formulation {
        self.formulation
    }

    fn breakpoints(&self) -> Vec<Vec<f64>> {
        (0..3).map(|a| self.spaces.pres.direction(a).breakpoints()).collect()
    }

    fn sample(&self, xi: [f64; 3]) -> Result<(MappedPoint, PointSample)> {
        let u = self.velocity(xi, 1)?;
        let (p, grad_p) = self.kinematic_pressure(xi)?;
        let (w, grad_w) = self.vorticity(xi)?;
        let s = PointSample {
            u: std::array::from_fn(|c| u[c].value),
            grad_u: std::array::from_fn(|c| u[c].grad),
            p,
            grad_p,
            w,
            grad_w,
        };
        Ok((MappedPoint { x: xi, jacobian: 1.0 }, s))
    }

    fn parametric_velocity(&self, xi: [f64; 3]) -> Result<[f64; 3]> {
        let u = self.velocity(xi, 0)?;
        Ok(std::array::from_fn(|c| u[c].value))
    }
}

/// Maximum `|∇·u^h|` and `|u^h|` over `n_samples` quasi-random points.
pub fn divergence_and_speed_max_3d(solution: &DiscreteSolution3D, n_samples: usize) -> Result<(f64, f64)> {
    let pairs: Vec<_> = (0..3).map(|c| (&solution.spaces.vel[c], solution.u[c].as_slice())).collect();
    divergence_and_speed(&pairs, n_samples)
}

fn tangential_penalty(case: &CaseDefinition3D, c: usize, point: [f64; 3], faces: FaceSet, h: [f64; 3]) -> (f64, f64) {
    let mut pen = 0.0;
    let mut target = 0.0;
    for f in faces.iter().filter(|f| f.axis() != c) {
        let w = (case.penalty_constant / h[f.axis()]).powi(2);
        pen += w;
        target += w * (case.dirichlet)(point, f)[c];
    }
    (pen, target)
}

fn check_case(case: &CaseDefinition3D, dofs: &DofMap, sol: &DiscreteSolution3D, formulation: Formulation) -> Result<()> {
    case.validate()?;
    sol.check()?;
    if case.formulation != formulation || sol.formulation != formulation {
        return Err(Error::InvalidInput(format!("expected a {formulation} case and solution")));
    }
    if dofs.dims() != 3 {
        return Err(Error::InvalidInput("DOF map is not three-dimensional".into()));
    }
    Ok(())
}

fn sample_velocity(s: &ComplexSpaces3D<f64>, u: &[Vec<f64>; 3], pt: &[f64; 3], order: usize) -> Result<Vec<Sampled>> {
    (0..3).map(|c| sample(&s.vel[c], &u[c], pt, order)).collect()
}

/// Velocity-pressure residual (and Jacobian), rows ordered
/// `[x-, y-, z-momentum, continuity, gauge]`.
pub fn assemble_vp_3d(
    case: &CaseDefinition3D,
    dofs: &DofMap,
    sol: &DiscreteSolution3D,
    want_jacobian: bool,
) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
    check_case(case, dofs, sol, Formulation::VP)?;
    let s = &case.spaces;
    let lambda_col = dofs.lambda_index();
    let row_fn = |eq: &Equation, row: Option<&mut RowEntries<'_>>| -> Result<f64> {
        let pt = eq.coords;
        match eq.kind {
            EquationKind::Momentum(c) => {
                let vel = sample_velocity(s, &sol.u, &pt, 2)?;
                let p = sample(&s.pres, &sol.p, &pt, 1)?;
                let f = (case.forcing)(pt)[c];
                let (pen, target) = tangential_penalty(case, c, pt, eq.faces, eq.h);
                Ok(vp_momentum(c, &vel, &p, case.nu, !case.stokes_only, f, pen, target, row))
            }
            EquationKind::Continuity => Ok(continuity(&sample_velocity(s, &sol.u, &pt, 1)?, sol.lambda, lambda_col, row)),
            _ => Err(Error::Assembly(format!("unexpected equation {:?} in a VP system", eq.kind))),
        }
    };
    assemble_rows(dofs, &sol.p, want_jacobian, &row_fn)
}

/// Momentum row `ν(∇×ω)_c + (ω×u)_c + ∂_c P − f_c`.
#[allow(clippy::too_many_arguments)]
fn vvp_momentum_3d(
    c: usize,
    omega: &[Sampled],
    vel: &[Sampled],
    p: &Sampled,
    nu: f64,
    convective: bool,
    forcing: f64,
    row: Option<&mut RowEntries<'_>>,
) -> f64 {
    let (a, b) = ((c + 1) % 3, (c + 2) % 3);
    let conv = if convective { 1.0 } else { 0.0 };
    let (wa, wb) = (omega[a].val.value, omega[b].val.value);
    let (ua, ub) = (vel[a].val.value, vel[b].val.value);
    let curl = omega[b].val.grad[a] - omega[a].val.grad[b];
    let res = nu * curl + conv * (wa * ub - wb * ua) + p.val.grad[c] - forcing;
    if let Some(row) = row {
        omega[a].basis.for_each(|i, phi| row.add(Field::Vorticity(a), i, -nu * phi.grad[b] + conv * phi.value * ub));
        omega[b].basis.for_each(|i, phi| row.add(Field::Vorticity(b), i, nu * phi.grad[a] - conv * phi.value * ua));
        if convective {
            vel[b].basis.for_each(|i, phi| row.add(Field::Velocity(b), i, wa * phi.value));
            vel[a].basis.for_each(|i, phi| row.add(Field::Velocity(a), i, -wb * phi.value));
        }
        p.basis.for_each(|i, phi| row.add(Field::Pressure, i, phi.grad[c]));
    }
    res
}

/// Constitutive row `ω_c − (∇×u)_c + Σ_f (C/h_f) ((u − g) × n_f)_c`.
fn vvp_constitutive_3d(
    case: &CaseDefinition3D,
    eq: &Equation,
    c: usize,
    omega: &Sampled,
    vel: &[Sampled],
    row: Option<&mut RowEntries<'_>>,
) -> f64 {
    let (a, b) = ((c + 1) % 3, (c + 2) % 3);
    let mut res = omega.val.value - (vel[b].val.grad[a] - vel[a].val.grad[b]);
    // penalty weights on u_a and u_b
    let (mut ka, mut kb) = (0.0, 0.0);
    for f in eq.faces.iter() {
        let n = f.normal();
        let k = case.penalty_constant / eq.h[f.axis()];
        let g = (case.dirichlet)(eq.coords, f);
        res += k * ((vel[a].val.value - g[a]) * n[b] - (vel[b].val.value - g[b]) * n[a]);
        ka += k * n[b];
        kb -= k * n[a];
    }
    if let Some(row) = row {
        omega.basis.for_each(|i, phi| row.add(Field::Vorticity(c), i, phi.value));
        vel[a].basis.for_each(|i, phi| row.add(Field::Velocity(a), i, phi.grad[b] + ka * phi.value));
        vel[b].basis.for_each(|i, phi| row.add(Field::Velocity(b), i, -phi.grad[a] + kb * phi.value));
    }
    res
}

/// Vorticity-velocity-pressure residual (and Jacobian), rows ordered
/// `[x-, y-, z-momentum, continuity, x-, y-, z-constitutive, gauge]`.
pub fn assemble_vvp_3d(
    case: &CaseDefinition3D,
    dofs: &DofMap,
    sol: &DiscreteSolution3D,
    want_jacobian: bool,
) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
    check_case(case, dofs, sol, Formulation::VVP)?;
    let s = &case.spaces;
    let om = sol.omega.as_ref().ok_or_else(|| Error::InvalidInput("VVP solution without vorticity".into()))?;
    let lambda_col = dofs.lambda_index();
    let row_fn = |eq: &Equation, row: Option<&mut RowEntries<'_>>| -> Result<f64> {
        let pt = eq.coords;
        match eq.kind {
            EquationKind::Momentum(c) => {
                let w: Vec<Sampled> = (0..3).map(|d| sample(&s.omega[d], &om[d], &pt, 1)).collect::<Result<_>>()?;
                let vel = sample_velocity(s, &sol.u, &pt, 0)?;
                let p = sample(&s.pres, &sol.p, &pt, 1)?;
                let f = (case.forcing)(pt)[c];
                Ok(vvp_momentum_3d(c, &w, &vel, &p, case.nu, !case.stokes_only, f, row))
            }
            EquationKind::Continuity => Ok(continuity(&sample_velocity(s, &sol.u, &pt, 1)?, sol.lambda, lambda_col, row)),
            EquationKind::Constitutive(c) => {
                let w = sample(&s.omega[c], &om[c], &pt, 0)?;
                let vel = sample_velocity(s, &sol.u, &pt, 1)?;
                Ok(vvp_constitutive_3d(case, eq, c, &w, &vel, row))
            }
            EquationKind::Gauge => unreachable!(),
        }
    };
    assemble_rows(dofs, &sol.p, want_jacobian, &row_fn)
}

/// Residual and Jacobian of either formulation.
pub fn assemble_3d(
    case: &CaseDefinition3D,
    dofs: &DofMap,
    sol: &DiscreteSolution3D,
    want_jacobian: bool,
) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
    match case.formulation {
        Formulation::VP => assemble_vp_3d(case, dofs, sol, want_jacobian),
        Formulation::VVP => assemble_vvp_3d(case, dofs, sol, want_jacobian),
    }
}

/// Newton callback over the unknown vector of `dofs`.
pub fn system_3d<'a>(
    case: &'a CaseDefinition3D,
    dofs: &'a DofMap,
) -> impl FnMut(&[f64], bool) -> Result<(Vec<f64>, Option<CsrMatrix>)> + 'a {
    move |x: &[f64], want: bool| {
        let sol = DiscreteSolution3D::from_unknowns(case, dofs, x)?;
        assemble_3d(case, dofs, &sol, want)
    }
}

/// Solves a 3D case by Newton's method from the zero state (boundary values applied).
pub fn solve_3d(case: &CaseDefinition3D, settings: &NewtonSettings) -> Result<(DiscreteSolution3D, SolveReport)> {
    let dofs = build_dof_map_3d(case)?;
    let (x, report) = newton_solve(system_3d(case, &dofs), dofs.zero_state(), settings)?;
    Ok((DiscreteSolution3D::from_unknowns(case, &dofs, &x)?, report))
}
