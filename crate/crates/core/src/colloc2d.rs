//! Collocated residuals and exact Jacobians of the 2D velocity-pressure and
//! vorticity-velocity-pressure formulations on the unit square.

use std::fmt;
use std::sync::Arc;

use crate::dofs::{DofLayout, DofMap, EquationKind, Field, GaugeMode, RowEntries};
use crate::error::{check_len, Error, Result};
use crate::kernels::{assemble_rows, continuity, divergence_and_speed, sample, vp_momentum, Sampled};
use crate::solver::{newton_solve, NewtonSettings, SolveReport};
use crate::spaces::{ComplexSpaces2D, Derivs, Face};
use crate::sparse::CsrMatrix;

/// Body force `f(x, y)`.
pub type Forcing2D = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
/// Dirichlet velocity `g(x, y)` on a given face. The face argument lets
/// corners carry different data for each incident wall.
pub type Boundary2D = Arc<dyn Fn([f64; 2], Face) -> [f64; 2] + Send + Sync>;

/// Discrete formulation of the momentum balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// Velocity and kinematic pressure.
    VP,
    /// Vorticity, velocity and total pressure.
    VVP,
}

impl Formulation {
    /// Smallest supported `k'`.
    pub fn min_kprime(self) -> usize {
        match self {
            Formulation::VP => 2,
            Formulation::VVP => 1,
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::VP => "vp",
            Formulation::VVP => "vvp",
        })
    }
}

impl std::str::FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vp" => Ok(Formulation::VP),
            "vvp" => Ok(Formulation::VVP),
            _ => Err(Error::InvalidInput(format!("unknown formulation '{s}' (expected vp or vvp)"))),
        }
    }
}

/// Default penalty constant `5 (k' + 1)`.
pub fn default_penalty(kprime: usize) -> f64 {
    5.0 * (kprime as f64 + 1.0)
}

/// One 2D problem on the unit square.
#[derive(Clone)]
pub struct CaseDefinition2D {
    pub formulation: Formulation,
    pub nu: f64,
    /// Right-hand side in the convention of `formulation`.
    pub forcing: Forcing2D,
    pub dirichlet: Boundary2D,
    pub penalty_constant: f64,
    pub spaces: ComplexSpaces2D<f64>,
    /// Drops the convective terms.
    pub stokes_only: bool,
    pub gauge: GaugeMode,
}

impl fmt::Debug for CaseDefinition2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CaseDefinition2D")
            .field("formulation", &self.formulation)
            .field("nu", &self.nu)
            .field("penalty_constant", &self.penalty_constant)
            .field("kprime", &self.spaces.kprime)
            .field("stokes_only", &self.stokes_only)
            .field("gauge", &self.gauge)
            .finish_non_exhaustive()
    }
}

impl CaseDefinition2D {
    /// Homogeneous Dirichlet problem with zero forcing and the default penalty.
    pub fn new(formulation: Formulation, spaces: ComplexSpaces2D<f64>, nu: f64) -> Self {
        Self {
            formulation,
            nu,
            forcing: Arc::new(|_| [0.0; 2]),
            dirichlet: Arc::new(|_, _| [0.0; 2]),
            penalty_constant: default_penalty(spaces.kprime),
            spaces,
            stokes_only: false,
            gauge: GaugeMode::MeanZero,
        }
    }

    pub fn with_forcing(mut self, f: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.forcing = Arc::new(f);
        self
    }

    pub fn with_dirichlet(mut self, g: impl Fn([f64; 2], Face) -> [f64; 2] + Send + Sync + 'static) -> Self {
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

/// Builds the unknown numbering and the collocation equations of a case.
pub fn build_dof_map(case: &CaseDefinition2D) -> Result<DofMap> {
    case.validate()?;
    let s = &case.spaces;
    let g = case.dirichlet.clone();
    let data = move |c: usize, x: [f64; 3], f: Face| g([x[0], x[1]], f)[c];
    DofMap::build(&DofLayout {
        velocity: vec![&s.vel_x, &s.vel_y],
        pressure: &s.pres,
        vorticity: if case.formulation == Formulation::VVP { vec![&s.psi] } else { vec![] },
        strong_normal: &|_| true,
        normal_data: &data,
        gauge: case.gauge,
    })
}

/// Discrete fields of a 2D solution.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution2D {
    pub spaces: ComplexSpaces2D<f64>,
    pub formulation: Formulation,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    /// Kinematic pressure (VP) or total pressure (VVP).
    pub p: Vec<f64>,
    /// Vorticity (VVP only).
    pub omega: Option<Vec<f64>>,
    pub lambda: f64,
}

impl DiscreteSolution2D {
    /// Zero fields.
    pub fn zeros(spaces: &ComplexSpaces2D<f64>, formulation: Formulation) -> Self {
        Self {
            spaces: spaces.clone(),
            formulation,
            ux: vec![0.0; spaces.vel_x.dim()],
            uy: vec![0.0; spaces.vel_y.dim()],
            p: vec![0.0; spaces.pres.dim()],
            omega: (formulation == Formulation::VVP).then(|| vec![0.0; spaces.psi.dim()]),
            lambda: 0.0,
        }
    }

    /// Expands an unknown vector (free values) using the fixed boundary values of `dofs`.
    pub fn from_unknowns(case: &CaseDefinition2D, dofs: &DofMap, x: &[f64]) -> Result<Self> {
        check_len(dofs.num_unknowns(), x.len())?;
        Ok(Self {
            spaces: case.spaces.clone(),
            formulation: case.formulation,
            ux: dofs.velocity_coeffs(x, 0),
            uy: dofs.velocity_coeffs(x, 1),
            p: dofs.pressure_coeffs(x).to_vec(),
            omega: (dofs.num_vorticity_components() == 1).then(|| dofs.vorticity_coeffs(x, 0).to_vec()),
            lambda: x[dofs.lambda_index()],
        })
    }

    /// Unknown vector of this solution; prescribed velocity coefficients are dropped.
    pub fn to_unknowns(&self, dofs: &DofMap) -> Result<Vec<f64>> {
        let omega: Vec<&[f64]> = self.omega.iter().map(|w| w.as_slice()).collect();
        dofs.pack(&[&self.ux, &self.uy], &self.p, &omega, self.lambda)
    }

    pub fn check(&self) -> Result<()> {
        check_len(self.spaces.vel_x.dim(), self.ux.len())?;
        check_len(self.spaces.vel_y.dim(), self.uy.len())?;
        check_len(self.spaces.pres.dim(), self.p.len())?;
        match (&self.omega, self.formulation) {
            (Some(w), _) => check_len(self.spaces.psi.dim(), w.len()),
            (None, Formulation::VVP) => Err(Error::InvalidInput("VVP solution without vorticity".into())),
            (None, Formulation::VP) => Ok(()),
        }
    }

    /// Velocity components with derivatives up to `order`.
    pub fn velocity(&self, point: [f64; 2], order: usize) -> Result<[Derivs<f64>; 2]> {
        let a = self.spaces.vel_x.eval_basis(&point, order)?.field(&self.ux);
        let b = self.spaces.vel_y.eval_basis(&point, order)?.field(&self.uy);
        Ok([a, b])
    }

    /// Pressure variable as solved for (kinematic for VP, total for VVP).
    pub fn pressure_variable(&self, point: [f64; 2], order: usize) -> Result<Derivs<f64>> {
        Ok(self.spaces.pres.eval_basis(&point, order)?.field(&self.p))
    }

    /// Kinematic pressure `p` (for VVP, `P − ½|u|²`) and its gradient.
    pub fn kinematic_pressure(&self, point: [f64; 2]) -> Result<(f64, [f64; 2])> {
        let p = self.pressure_variable(point, 1)?;
        match self.formulation {
            Formulation::VP => Ok((p.value, [p.grad[0], p.grad[1]])),
            Formulation::VVP => {
                let u = self.velocity(point, 1)?;
                let k = 0.5 * (u[0].value * u[0].value + u[1].value * u[1].value);
                let dk = |d: usize| u[0].value * u[0].grad[d] + u[1].value * u[1].grad[d];
                Ok((p.value - k, [p.grad[0] - dk(0), p.grad[1] - dk(1)]))
            }
        }
    }

    /// Vorticity: the discrete field for VVP, `∂u_y/∂x − ∂u_x/∂y` for VP.
    pub fn vorticity(&self, point: [f64; 2]) -> Result<(f64, [f64; 2])> {
        match &self.omega {
            Some(w) => {
                let d = self.spaces.psi.eval_basis(&point, 1)?.field(w);
                Ok((d.value, [d.grad[0], d.grad[1]]))
            }
            None => {
                let u = self.velocity(point, 2)?;
                Ok((
                    u[1].grad[0] - u[0].grad[1],
                    [u[1].hess[0][0] - u[0].hess[0][1], u[1].hess[0][1] - u[0].hess[1][1]],
                ))
            }
        }
    }
}

/// Maximum `|∇·u^h|` over `n_samples` quasi-random points.
pub fn divergence_max(solution: &DiscreteSolution2D, n_samples: usize) -> Result<f64> {
    Ok(divergence_and_speed(&velocity_pairs(solution), n_samples)?.0)
}

/// Maximum `|∇·u^h|` and `|u^h|` over `n_samples` quasi-random points.
pub fn divergence_and_speed_max(solution: &DiscreteSolution2D, n_samples: usize) -> Result<(f64, f64)> {
    divergence_and_speed(&velocity_pairs(solution), n_samples)
}

fn velocity_pairs(s: &DiscreteSolution2D) -> Vec<(&crate::spaces::TensorSpace<f64>, &[f64])> {
    vec![(&s.spaces.vel_x, s.ux.as_slice()), (&s.spaces.vel_y, s.uy.as_slice())]
}

fn tangential_penalty(case: &CaseDefinition2D, c: usize, point: [f64; 3], faces: crate::spaces::FaceSet, h: [f64; 3]) -> (f64, f64) {
    let mut pen = 0.0;
    let mut target = 0.0;
    for f in faces.iter().filter(|f| f.axis() != c) {
        let w = (case.penalty_constant / h[f.axis()]).powi(2);
        pen += w;
        target += w * (case.dirichlet)([point[0], point[1]], f)[c];
    }
    (pen, target)
}

fn check_case(case: &CaseDefinition2D, dofs: &DofMap, sol: &DiscreteSolution2D, formulation: Formulation) -> Result<()> {
    case.validate()?;
    sol.check()?;
    if case.formulation != formulation || sol.formulation != formulation {
        return Err(Error::InvalidInput(format!("expected a {formulation} case and solution")));
    }
    if dofs.dims() != 2 {
        return Err(Error::InvalidInput("DOF map is not two-dimensional".into()));
    }
    Ok(())
}

/// Velocity-pressure residual (and Jacobian), rows ordered
/// `[x-momentum, y-momentum, continuity, gauge]`.
pub fn assemble_vp(
    case: &CaseDefinition2D,
    dofs: &DofMap,
    sol: &DiscreteSolution2D,
    want_jacobian: bool,
) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
    check_case(case, dofs, sol, Formulation::VP)?;
    let s = &case.spaces;
    let lambda_col = dofs.lambda_index();
    let row_fn = |eq: &crate::dofs::Equation, row: Option<&mut RowEntries<'_>>| -> Result<f64> {
        let pt = eq.coords;
        match eq.kind {
            EquationKind::Momentum(c) => {
                let vel = [sample(&s.vel_x, &sol.ux, &pt, 2)?, sample(&s.vel_y, &sol.uy, &pt, 2)?];
                let p = sample(&s.pres, &sol.p, &pt, 1)?;
                let f = (case.forcing)([pt[0], pt[1]])[c];
                let (pen, target) = tangential_penalty(case, c, pt, eq.faces, eq.h);
                Ok(vp_momentum(c, &vel, &p, case.nu, !case.stokes_only, f, pen, target, row))
            }
            EquationKind::Continuity => {
                let vel = [sample(&s.vel_x, &sol.ux, &pt, 1)?, sample(&s.vel_y, &sol.uy, &pt, 1)?];
                Ok(continuity(&vel, sol.lambda, lambda_col, row))
            }
            _ => Err(Error::Assembly(format!("unexpected equation {:?} in a VP system", eq.kind))),
        }
    };
    assemble_rows(dofs, &sol.p, want_jacobian, &row_fn)
}

/// 2D vorticity-velocity-pressure momentum row for component `c`:
/// `±ν ∂ω + ω×u + ∂_c P − f_c`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn vvp_momentum_2d(
    c: usize,
    omega: &Sampled,
    vel_other: &Sampled,
    p: &Sampled,
    nu: f64,
    convective: bool,
    forcing: f64,
    row: Option<&mut RowEntries<'_>>,
) -> f64 {
    let o = 1 - c;
    let sgn = if c == 0 { 1.0 } else { -1.0 };
    let w = omega.val.value;
    let uo = vel_other.val.value;
    let conv = if convective { -sgn * w * uo } else { 0.0 };
    let res = sgn * nu * omega.val.grad[o] + conv + p.val.grad[c] - forcing;
    if let Some(row) = row {
        omega.basis.for_each(|i, phi| {
            let mut v = sgn * nu * phi.grad[o];
            if convective {
                v -= sgn * phi.value * uo;
            }
            row.add(Field::Vorticity(0), i, v);
        });
        if convective {
            vel_other.basis.for_each(|i, phi| row.add(Field::Velocity(o), i, -sgn * w * phi.value));
        }
        p.basis.for_each(|i, phi| row.add(Field::Pressure, i, phi.grad[c]));
    }
    res
}

/// Vorticity-velocity-pressure residual (and Jacobian), rows ordered
/// `[x-momentum, y-momentum, continuity, constitutive, gauge]`.
pub fn assemble_vvp(
    case: &CaseDefinition2D,
    dofs: &DofMap,
    sol: &DiscreteSolution2D,
    want_jacobian: bool,
) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
    check_case(case, dofs, sol, Formulation::VVP)?;
    let s = &case.spaces;
    let omega = sol.omega.as_deref().unwrap_or_default();
    let lambda_col = dofs.lambda_index();
    let row_fn = |eq: &crate::dofs::Equation, row: Option<&mut RowEntries<'_>>| -> Result<f64> {
        let pt = eq.coords;
        match eq.kind {
            EquationKind::Momentum(c) => {
                let w = sample(&s.psi, omega, &pt, 1)?;
                let other = if c == 0 { sample(&s.vel_y, &sol.uy, &pt, 0)? } else { sample(&s.vel_x, &sol.ux, &pt, 0)? };
                let p = sample(&s.pres, &sol.p, &pt, 1)?;
                let f = (case.forcing)([pt[0], pt[1]])[c];
                Ok(vvp_momentum_2d(c, &w, &other, &p, case.nu, !case.stokes_only, f, row))
            }
            EquationKind::Continuity => {
                let vel = [sample(&s.vel_x, &sol.ux, &pt, 1)?, sample(&s.vel_y, &sol.uy, &pt, 1)?];
                Ok(continuity(&vel, sol.lambda, lambda_col, row))
            }
            EquationKind::Constitutive(_) => {
                let w = sample(&s.psi, omega, &pt, 0)?;
                let vel = [sample(&s.vel_x, &sol.ux, &pt, 1)?, sample(&s.vel_y, &sol.uy, &pt, 1)?];
                let mut res = w.val.value - (vel[1].val.grad[0] - vel[0].val.grad[1]);
                // weights on u_x and u_y from the tangential penalty
                let mut pen = [0.0; 2];
                for f in eq.faces.iter() {
                    let t = f.ccw_tangent_2d();
                    let k = case.penalty_constant / eq.h[f.axis()];
                    let g = (case.dirichlet)([pt[0], pt[1]], f);
                    res += k * (vel[0].val.value * t[0] + vel[1].val.value * t[1] - g[0] * t[0] - g[1] * t[1]);
                    pen[0] += k * t[0];
                    pen[1] += k * t[1];
                }
                if let Some(row) = row {
                    w.basis.for_each(|i, phi| row.add(Field::Vorticity(0), i, phi.value));
                    vel[0].basis.for_each(|i, phi| row.add(Field::Velocity(0), i, phi.grad[1] + pen[0] * phi.value));
                    vel[1].basis.for_each(|i, phi| row.add(Field::Velocity(1), i, -phi.grad[0] + pen[1] * phi.value));
                }
                Ok(res)
            }
            EquationKind::Gauge => unreachable!(),
        }
    };
    assemble_rows(dofs, &sol.p, want_jacobian, &row_fn)
}

/// Residual and Jacobian of either formulation.
pub fn assemble(
    case: &CaseDefinition2D,
    dofs: &DofMap,
    sol: &DiscreteSolution2D,
    want_jacobian: bool,
) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
    match case.formulation {
        Formulation::VP => assemble_vp(case, dofs, sol, want_jacobian),
        Formulation::VVP => assemble_vvp(case, dofs, sol, want_jacobian),
    }
}

/// Newton callback over the unknown vector of `dofs`.
pub fn system<'a>(
    case: &'a CaseDefinition2D,
    dofs: &'a DofMap,
) -> impl FnMut(&[f64], bool) -> Result<(Vec<f64>, Option<CsrMatrix>)> + 'a {
    move |x: &[f64], want: bool| {
        let sol = DiscreteSolution2D::from_unknowns(case, dofs, x)?;
        assemble(case, dofs, &sol, want)
    }
}

/// Solves a case by Newton's method from the zero state (boundary values applied).
pub fn solve(case: &CaseDefinition2D, settings: &NewtonSettings) -> Result<(DiscreteSolution2D, SolveReport)> {
    let dofs = build_dof_map(case)?;
    solve_from(case, &dofs, dofs.zero_state(), settings)
}

/// Solves a case by Newton's method from a given unknown vector.
pub fn solve_from(
    case: &CaseDefinition2D,
    dofs: &DofMap,
    initial: Vec<f64>,
    settings: &NewtonSettings,
) -> Result<(DiscreteSolution2D, SolveReport)> {
    let (x, report) = newton_solve(system(case, dofs), initial, settings)?;
    Ok((DiscreteSolution2D::from_unknowns(case, dofs, &x)?, report))
}
