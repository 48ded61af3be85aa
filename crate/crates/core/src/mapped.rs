//! Geometry maps, Piola pull-backs and push-forwards, and the collocated
//! vorticity-velocity-pressure Stokes system on mapped 2D domains.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analytic::PointSample;
use crate::colloc2d::{default_penalty, Formulation};
use crate::dofs::{DofLayout, DofMap, Equation, EquationKind, Field, GaugeMode, RowEntries};
use crate::error::{check_len, Error, Result};
use crate::kernels::{assemble_rows, continuity, sample, Sampled};
use crate::solver::{newton_solve, NewtonSettings, SolveReport};
use crate::spaces::{ComplexSpaces2D, Derivs, Face};
use crate::sparse::CsrMatrix;
use crate::verify::{MappedPoint, SolutionView};

type Mat2 = [[f64; 2]; 2];

/// Smooth map from the unit square onto a physical domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeometryMap2D {
    Identity,
    /// `F = R (sin θ, cos θ)` with `R = (r_out − r_in) ξ₂ + r_in` and `θ = angle · ξ₁`.
    Polar { r_in: f64, r_out: f64, angle: f64 },
    /// `F = (ξ₁, A (B (1 − ξ₂) sin(Cπ ξ₁) + ξ₂))`.
    Wavy { a: f64, b: f64, c: f64 },
}

/// Full annulus map, `θ = 2π ξ₁`.
pub fn polar_map(r_in: f64, r_out: f64) -> Result<GeometryMap2D> {
    polar_sector_map(r_in, r_out, 2.0 * PI)
}

/// Annular sector map, `θ = angle · ξ₁`.
pub fn polar_sector_map(r_in: f64, r_out: f64, angle: f64) -> Result<GeometryMap2D> {
    if !(r_in > 0.0 && r_out > r_in && r_out.is_finite()) {
        return Err(Error::InvalidGeometry(format!("need 0 < r_in < r_out, got r_in = {r_in}, r_out = {r_out}")));
    }
    if !(angle > 0.0 && angle <= 2.0 * PI) {
        return Err(Error::InvalidGeometry(format!("sector angle must lie in (0, 2π], got {angle}")));
    }
    Ok(GeometryMap2D::Polar { r_in, r_out, angle })
}

/// Cavity with a wavy bottom wall; rejects parameters giving a folded map.
pub fn wavy_map(a: f64, b: f64, c: f64) -> Result<GeometryMap2D> {
    let map = GeometryMap2D::Wavy { a, b, c };
    map.check_orientation(64)?;
    Ok(map)
}

/// The three wavy-wall presets (one, two and three bumps).
pub const WAVY_PRESETS: [(f64, f64, f64); 3] = [(1.0, 0.75, 1.0), (0.25, 0.3, 3.0), (0.25, 0.3, 5.0)];

/// Map value with first and second derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub x: [f64; 2],
    /// `df[i][j] = ∂F_i/∂ξ_j`.
    pub df: Mat2,
    /// `d2f[i][j][k] = ∂²F_i/∂ξ_j∂ξ_k`.
    pub d2f: [Mat2; 2],
}

/// Metric quantities derived from a [`MapPoint`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub x: [f64; 2],
    pub df: Mat2,
    pub df_inv: Mat2,
    pub jacobian: f64,
    /// `C = DFᵀ DF`.
    pub c: Mat2,
    pub c_inv: Mat2,
    /// `∂(J⁻¹)/∂ξ_k`.
    pub d_inv_jacobian: [f64; 2],
    /// `dc[k][i][j] = ∂C_ij/∂ξ_k`.
    pub dc: [Mat2; 2],
    /// `ddf[k] = ∂DF/∂ξ_k`.
    pub ddf: [Mat2; 2],
}

fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn inverse(m: &Mat2) -> Option<Mat2> {
    let d = det(m);
    (d != 0.0 && d.is_finite()).then(|| [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

fn matvec(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

impl GeometryMap2D {
    /// Map value and exact derivatives.
    pub fn eval(&self, xi: [f64; 2]) -> MapPoint {
        let zero = [[0.0; 2]; 2];
        match *self {
            GeometryMap2D::Identity => MapPoint { x: xi, df: [[1.0, 0.0], [0.0, 1.0]], d2f: [zero; 2] },
            GeometryMap2D::Polar { r_in, r_out, angle } => {
                let d = r_out - r_in;
                let r = d * xi[1] + r_in;
                let (s, c) = (angle * xi[0]).sin_cos();
                let a = angle;
                MapPoint {
                    x: [r * s, r * c],
                    df: [[a * r * c, d * s], [-a * r * s, d * c]],
                    d2f: [[[-a * a * r * s, a * d * c], [a * d * c, 0.0]], [[-a * a * r * c, -a * d * s], [-a * d * s, 0.0]]],
                }
            }
            GeometryMap2D::Wavy { a, b, c } => {
                let k = c * PI;
                let (s, co) = (k * xi[0]).sin_cos();
                let one = 1.0 - xi[1];
                MapPoint {
                    x: [xi[0], a * (b * one * s + xi[1])],
                    df: [[1.0, 0.0], [a * b * one * k * co, a * (1.0 - b * s)]],
                    d2f: [zero, [[-a * b * one * k * k * s, -a * b * k * co], [-a * b * k * co, 0.0]]],
                }
            }
        }
    }

    /// Jacobian, metric tensor and their derivatives at a point.
    pub fn metric(&self, xi: [f64; 2]) -> Result<Metric> {
        let m = self.eval(xi);
        let j = det(&m.df);
        let df_inv = inverse(&m.df)
            .filter(|_| j > 0.0)
            .ok_or_else(|| Error::InvalidGeometry(format!("non-positive Jacobian {j} at {xi:?}")))?;
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for jj in 0..2 {
                c[i][jj] = m.df[0][i] * m.df[0][jj] + m.df[1][i] * m.df[1][jj];
            }
        }
        let c_inv = inverse(&c).ok_or_else(|| Error::InvalidGeometry(format!("singular metric at {xi:?}")))?;
        let ddf: [Mat2; 2] = std::array::from_fn(|k| std::array::from_fn(|i| std::array::from_fn(|jj| m.d2f[i][jj][k])));
        let mut dc = [[[0.0; 2]; 2]; 2];
        let mut dj_inv = [0.0; 2];
        for k in 0..2 {
            let dd = &ddf[k];
            let dj = dd[0][0] * m.df[1][1] + m.df[0][0] * dd[1][1] - dd[0][1] * m.df[1][0] - m.df[0][1] * dd[1][0];
            dj_inv[k] = -dj / (j * j);
            for i in 0..2 {
                for jj in 0..2 {
                    dc[k][i][jj] = (0..2).map(|r| dd[r][i] * m.df[r][jj] + m.df[r][i] * dd[r][jj]).sum();
                }
            }
        }
        Ok(Metric { x: m.x, df: m.df, df_inv, jacobian: j, c, c_inv, d_inv_jacobian: dj_inv, dc, ddf })
    }

    /// Checks `J > 0` on an `n × n` grid including the boundary.
    pub fn check_orientation(&self, n: usize) -> Result<()> {
        for i in 0..=n {
            for k in 0..=n {
                self.metric([i as f64 / n as f64, k as f64 / n as f64])?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for GeometryMap2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryMap2D::Identity => write!(f, "identity"),
            GeometryMap2D::Polar { r_in, r_out, angle } => write!(f, "polar({r_in},{r_out},{angle})"),
            GeometryMap2D::Wavy { a, b, c } => write!(f, "wavy({a},{b},{c})"),
        }
    }
}

impl std::str::FromStr for GeometryMap2D {
    type Err = Error;

    /// Parses `identity`, `polar(r_in,r_out)`, `polar(r_in,r_out,angle)` or `wavy(A,B,C)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "identity" {
            return Ok(GeometryMap2D::Identity);
        }
        let bad = || Error::InvalidInput(format!("cannot parse geometry map '{s}'"));
        let open = s.find('(').ok_or_else(bad)?;
        let name = &s[..open];
        let args: Vec<f64> = s[open + 1..]
            .strip_suffix(')')
            .ok_or_else(bad)?
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (name, args.as_slice()) {
            ("polar", [a, b]) => polar_map(*a, *b),
            ("polar", [a, b, c]) => polar_sector_map(*a, *b, *c),
            ("wavy", [a, b, c]) => wavy_map(*a, *b, *c),
            _ => Err(bad()),
        }
    }
}

/// Physical fields at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fields2D {
    pub u: [f64; 2],
    pub p: f64,
    pub omega: f64,
}

/// Parametric fields `û = J DF⁻¹ u`, `p̂ = J p`, `ω̂ = ω`.
pub fn pullback_fields(metric: &Metric, physical: Fields2D) -> Fields2D {
    let j = metric.jacobian;
    let v = matvec(&metric.df_inv, physical.u);
    Fields2D { u: [j * v[0], j * v[1]], p: j * physical.p, omega: physical.omega }
}

/// Inverse of [`pullback_fields`].
pub fn pushforward_fields(metric: &Metric, parametric: Fields2D) -> Fields2D {
    let j = metric.jacobian;
    let v = matvec(&metric.df, parametric.u);
    Fields2D { u: [v[0] / j, v[1] / j], p: parametric.p / j, omega: parametric.omega }
}

/// Boundary treatment of one edge of the parametric square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeCondition {
    /// Full velocity prescribed: normal part strongly, tangential part by penalty.
    Dirichlet,
    /// Velocity left free and `∂p/∂n = 0` by penalty on the normal momentum row.
    PressureNeumann,
}

/// Physical body force `f(x, y)`.
pub type PhysicalForcing = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
/// Physical boundary velocity at a physical point of a parametric edge.
pub type PhysicalBoundary = Arc<dyn Fn([f64; 2], Face) -> [f64; 2] + Send + Sync>;

/// Stokes problem on a mapped domain, solved for the pulled-back fields.
#[derive(Clone)]
pub struct MappedStokesCase {
    pub map: GeometryMap2D,
    pub nu: f64,
    pub forcing: PhysicalForcing,
    pub dirichlet: PhysicalBoundary,
    /// Edge conditions indexed like [`Face::ALL`] (`XMin, XMax, YMin, YMax`).
    pub edges: [EdgeCondition; 4],
    pub penalty_constant: f64,
    pub spaces: ComplexSpaces2D<f64>,
    pub gauge: GaugeMode,
}

impl fmt::Debug for MappedStokesCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MappedStokesCase")
            .field("map", &self.map)
            .field("nu", &self.nu)
            .field("edges", &self.edges)
            .field("penalty_constant", &self.penalty_constant)
            .field("kprime", &self.spaces.kprime)
            .finish_non_exhaustive()
    }
}

fn face_slot(f: Face) -> usize {
    Face::ALL.iter().position(|g| *g == f).unwrap_or(0)
}

impl MappedStokesCase {
    /// Homogeneous Dirichlet problem with zero forcing and the default penalty.
    pub fn new(map: GeometryMap2D, spaces: ComplexSpaces2D<f64>, nu: f64) -> Self {
        Self {
            map,
            nu,
            forcing: Arc::new(|_| [0.0; 2]),
            dirichlet: Arc::new(|_, _| [0.0; 2]),
            edges: [EdgeCondition::Dirichlet; 4],
            penalty_constant: default_penalty(spaces.kprime),
            spaces,
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

    pub fn with_edge(mut self, face: Face, condition: EdgeCondition) -> Self {
        self.edges[face_slot(face)] = condition;
        self
    }

    pub fn with_penalty(mut self, c: f64) -> Self {
        self.penalty_constant = c;
        self
    }

    pub fn edge(&self, face: Face) -> EdgeCondition {
        self.edges[face_slot(face)]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::InvalidInput(format!("viscosity must be positive, got {}", self.nu)));
        }
        if !(self.penalty_constant > 0.0) || !self.penalty_constant.is_finite() {
            return Err(Error::InvalidInput(format!("penalty constant must be positive, got {}", self.penalty_constant)));
        }
        if self.spaces.kprime < 1 {
            return Err(Error::UnsupportedDegree { degree: self.spaces.kprime, reason: "k' must be at least 1".into() });
        }
        Ok(())
    }

    /// Pulled-back boundary velocity `ĝ = J DF⁻¹ g(F(ξ))`.
    fn parametric_boundary(&self, xi: [f64; 2], face: Face) -> Result<[f64; 2]> {
        let m = self.map.metric(xi)?;
        let g = (self.dirichlet)(m.x, face);
        Ok(pullback_fields(&m, Fields2D { u: g, p: 0.0, omega: 0.0 }).u)
    }
}

/// Builds the unknown numbering and equations of a mapped case.
pub fn build_dof_map_mapped(case: &MappedStokesCase) -> Result<DofMap> {
    case.validate()?;
    // the map must be valid at every collocation point before data is pulled back
    case.map.check_orientation(4 * case.spaces.pres.shape()[0].max(case.spaces.pres.shape()[1]))?;
    let s = &case.spaces;
    let data = |c: usize, x: [f64; 3], f: Face| case.parametric_boundary([x[0], x[1]], f).map(|g| g[c]).unwrap_or(f64::NAN);
    DofMap::build(&DofLayout {
        velocity: vec![&s.vel_x, &s.vel_y],
        pressure: &s.pres,
        vorticity: vec![&s.psi],
        strong_normal: &|f| case.edge(f) != EdgeCondition::PressureNeumann,
        normal_data: &data,
        gauge: case.gauge,
    })
}

/// Discrete parametric fields of a mapped solution.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedSolution {
    pub map: GeometryMap2D,
    pub spaces: ComplexSpaces2D<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    /// Pulled-back kinematic pressure `p̂ = J p`.
    pub p: Vec<f64>,
    pub omega: Vec<f64>,
    pub lambda: f64,
}

impl MappedSolution {
    pub fn zeros(map: GeometryMap2D, spaces: &ComplexSpaces2D<f64>) -> Self {
        Self {
            map,
            spaces: spaces.clone(),
            ux: vec![0.0; spaces.vel_x.dim()],
            uy: vec![0.0; spaces.vel_y.dim()],
            p: vec![0.0; spaces.pres.dim()],
            omega: vec![0.0; spaces.psi.dim()],
            lambda: 0.0,
        }
    }

    pub fn from_unknowns(case: &MappedStokesCase, dofs: &DofMap, x: &[f64]) -> Result<Self> {
        check_len(dofs.num_unknowns(), x.len())?;
        Ok(Self {
            map: case.map,
            spaces: case.spaces.clone(),
            ux: dofs.velocity_coeffs(x, 0),
            uy: dofs.velocity_coeffs(x, 1),
            p: dofs.pressure_coeffs(x).to_vec(),
            omega: dofs.vorticity_coeffs(x, 0).to_vec(),
            lambda: x[dofs.lambda_index()],
        })
    }

    pub fn to_unknowns(&self, dofs: &DofMap) -> Result<Vec<f64>> {
        dofs.pack(&[&self.ux, &self.uy], &self.p, &[&self.omega], self.lambda)
    }

    pub fn check(&self) -> Result<()> {
        check_len(self.spaces.vel_x.dim(), self.ux.len())?;
        check_len(self.spaces.vel_y.dim(), self.uy.len())?;
        check_len(self.spaces.pres.dim(), self.p.len())?;
        check_len(self.spaces.psi.dim(), self.omega.len())
    }

    /// Parametric fields with first derivatives.
    pub fn parametric(&self, xi: [f64; 2]) -> Result<([Derivs<f64>; 2], Derivs<f64>, Derivs<f64>)> {
        let ux = self.spaces.vel_x.eval_basis(&xi, 1)?.field(&self.ux);
        let uy = self.spaces.vel_y.eval_basis(&xi, 1)?.field(&self.uy);
        let p = self.spaces.pres.eval_basis(&xi, 1)?.field(&self.p);
        let w = self.spaces.psi.eval_basis(&xi, 1)?.field(&self.omega);
        Ok(([ux, uy], p, w))
    }

    /// Physical fields and their physical gradients at a parametric point.
    pub fn physical(&self, xi: [f64; 2]) -> Result<(Metric, PointSample)> {
        let m = self.map.metric(xi)?;
        let (u, p, w) = self.parametric(xi)?;
        let ji = 1.0 / m.jacobian;
        let uh = [u[0].value, u[1].value];
        let mut s = PointSample::default();
        let phys_u = matvec(&m.df, uh);
        // parametric derivatives of the physical fields
        let mut du = [[0.0; 2]; 2];
        let mut dp = [0.0; 2];
        let mut dw = [0.0; 2];
        for k in 0..2 {
            let duh = [u[0].grad[k], u[1].grad[k]];
            let a = matvec(&m.ddf[k], uh);
            let b = matvec(&m.df, duh);
            for c in 0..2 {
                du[c][k] = m.d_inv_jacobian[k] * phys_u[c] + ji * (a[c] + b[c]);
            }
            dp[k] = m.d_inv_jacobian[k] * p.value + ji * p.grad[k];
            dw[k] = w.grad[k];
        }
        let to_phys = |g: [f64; 2]| -> [f64; 3] {
            let mut out = [0.0; 3];
            for (d, o) in out.iter_mut().take(2).enumerate() {
                *o = g[0] * m.df_inv[0][d] + g[1] * m.df_inv[1][d];
            }
            out
        };
        for c in 0..2 {
            s.u[c] = ji * phys_u[c];
            s.grad_u[c] = to_phys(du[c]);
        }
        s.p = ji * p.value;
        s.grad_p = to_phys(dp);
        s.w[0] = w.value;
        s.grad_w[0] = to_phys(dw);
        Ok((m, s))
    }
}

impl SolutionView for MappedSolution {
    fn dims(&self) -> usize {
        2
    }

    fn kprime(&self) -> usize {
        self.spaces.kprime
    }

    fn formulation(&self) -> Formulation {
        Formulation::VVP
    }

    fn breakpoints(&self) -> Vec<Vec<f64>> {
        (0..2).map(|a| self.spaces.pres.direction(a).breakpoints()).collect()
    }

    fn sample(&self, xi: [f64; 3]) -> Result<(MappedPoint, PointSample)> {
        let (m, s) = self.physical([xi[0], xi[1]])?;
        Ok((MappedPoint { x: [m.x[0], m.x[1], 0.0], jacobian: m.jacobian }, s))
    }

    fn parametric_velocity(&self, xi: [f64; 3]) -> Result<[f64; 3]> {
        let p = [xi[0], xi[1]];
        let a = self.spaces.vel_x.eval_basis(&p, 0)?.field(&self.ux).value;
        let b = self.spaces.vel_y.eval_basis(&p, 0)?.field(&self.uy).value;
        Ok([a, b, 0.0])
    }
}

/// Unit counter-clockwise tangent and outward normal of a mapped edge.
fn physical_frame(m: &Metric, face: Face) -> ([f64; 2], [f64; 2]) {
    let t = matvec(&m.df, face.ccw_tangent_2d());
    let len = t[0].hypot(t[1]);
    let s = [t[0] / len, t[1] / len];
    (s, [s[1], -s[0]])
}

/// Mapped Stokes residual (and Jacobian), rows ordered
/// `[x-momentum, y-momentum, continuity, constitutive, gauge]`.
pub fn assemble_mapped_vvp_stokes(
    case: &MappedStokesCase,
    dofs: &DofMap,
    sol: &MappedSolution,
    want_jacobian: bool,
) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
    case.validate()?;
    sol.check()?;
    let s = &case.spaces;
    let lambda_col = dofs.lambda_index();
    let row_fn = |eq: &Equation, row: Option<&mut RowEntries<'_>>| -> Result<f64> {
        let pt = eq.coords;
        let xi = [pt[0], pt[1]];
        let m = case.map.metric(xi)?;
        match eq.kind {
            EquationKind::Momentum(c) => {
                let w = sample(&s.psi, &sol.omega, &pt, 1)?;
                let p = sample(&s.pres, &sol.p, &pt, 1)?;
                let f = pullback_fields(&m, Fields2D { u: (case.forcing)(m.x), p: 0.0, omega: 0.0 }).u[c];
                let neumann: Vec<(f64, [f64; 2])> = eq
                    .faces
                    .iter()
                    .filter(|f| f.axis() == c && case.edge(*f) == EdgeCondition::PressureNeumann)
                    .map(|f| (case.penalty_constant / eq.h[f.axis()], physical_frame(&m, f).1))
                    .collect();
                Ok(mapped_momentum(c, &m, &w, &p, case.nu, f, &neumann, row))
            }
            EquationKind::Continuity => {
                let vel = [sample(&s.vel_x, &sol.ux, &pt, 1)?, sample(&s.vel_y, &sol.uy, &pt, 1)?];
                Ok(continuity(&vel, sol.lambda, lambda_col, row))
            }
            EquationKind::Constitutive(_) => {
                let w = sample(&s.psi, &sol.omega, &pt, 0)?;
                let vel = [sample(&s.vel_x, &sol.ux, &pt, 1)?, sample(&s.vel_y, &sol.uy, &pt, 1)?];
                let mut pens = Vec::new();
                for f in eq.faces.iter().filter(|f| case.edge(*f) == EdgeCondition::Dirichlet) {
                    let (t, _) = physical_frame(&m, f);
                    let g = (case.dirichlet)(m.x, f);
                    pens.push((case.penalty_constant / eq.h[f.axis()], t, g[0] * t[0] + g[1] * t[1]));
                }
                Ok(mapped_constitutive(&m, &w, &vel, &pens, row))
            }
            EquationKind::Gauge => unreachable!(),
        }
    };
    assemble_rows(dofs, &sol.p, want_jacobian, &row_fn)
}

/// `±ν ∂ω̂ + J Σ_d C⁻¹_cd ∂_d(J⁻¹p̂) + Σ_f k_f ∂p/∂n_f − f̂_c`.
#[allow(clippy::too_many_arguments)]
fn mapped_momentum(
    c: usize,
    m: &Metric,
    w: &Sampled,
    p: &Sampled,
    nu: f64,
    forcing: f64,
    neumann: &[(f64, [f64; 2])],
    row: Option<&mut RowEntries<'_>>,
) -> f64 {
    let o = 1 - c;
    let sgn = if c == 0 { 1.0 } else { -1.0 };
    let ji = 1.0 / m.jacobian;
    // weights of p̂ and ∂_k p̂ in the row
    let mut wv = 0.0;
    let mut wg = [0.0; 2];
    for d in 0..2 {
        let a = m.jacobian * m.c_inv[c][d];
        wv += a * m.d_inv_jacobian[d];
        wg[d] += a * ji;
    }
    for (k, n) in neumann {
        // ∂p/∂n = Σ_d n_d Σ_e DF⁻¹[e][d] ∂_e(J⁻¹ p̂)
        for e in 0..2 {
            let q = k * (n[0] * m.df_inv[e][0] + n[1] * m.df_inv[e][1]);
            wv += q * m.d_inv_jacobian[e];
            wg[e] += q * ji;
        }
    }
    let res = sgn * nu * w.val.grad[o] + wv * p.val.value + wg[0] * p.val.grad[0] + wg[1] * p.val.grad[1] - forcing;
    if let Some(row) = row {
        w.basis.for_each(|i, phi| row.add(Field::Vorticity(0), i, sgn * nu * phi.grad[o]));
        p.basis.for_each(|i, phi| row.add(Field::Pressure, i, wv * phi.value + wg[0] * phi.grad[0] + wg[1] * phi.grad[1]));
    }
    res
}

/// `ω̂ − J⁻¹(∂_x̂ v₂ − ∂_ŷ v₁) + Σ_f k_f (u·s_f − g·s_f)` with `v = J⁻¹ C û`.
fn mapped_constitutive(
    m: &Metric,
    w: &Sampled,
    vel: &[Sampled; 2],
    pens: &[(f64, [f64; 2], f64)],
    row: Option<&mut RowEntries<'_>>,
) -> f64 {
    let ji = 1.0 / m.jacobian;
    // a_ij = J⁻¹ C_ij and its parametric derivatives
    let a = |i: usize, j: usize| ji * m.c[i][j];
    let da = |k: usize, i: usize, j: usize| m.d_inv_jacobian[k] * m.c[i][j] + ji * m.dc[k][i][j];
    // the curl term is Σ_j (cv[j] û_j + cg[j]·∇û_j)
    let mut cv = [0.0; 2];
    let mut cg = [[0.0; 2]; 2];
    for j in 0..2 {
        cv[j] = ji * (da(0, 1, j) - da(1, 0, j));
        cg[j][0] = ji * a(1, j);
        cg[j][1] = -ji * a(0, j);
    }
    // penalty on the physical tangential velocity u·s = J⁻¹ (DF û)·s
    let mut pv = [0.0; 2];
    let mut target = 0.0;
    for (k, t, gs) in pens {
        for j in 0..2 {
            pv[j] += k * ji * (m.df[0][j] * t[0] + m.df[1][j] * t[1]);
        }
        target += k * gs;
    }
    let mut res = w.val.value - target;
    for j in 0..2 {
        let u = &vel[j].val;
        res += -(cv[j] * u.value + cg[j][0] * u.grad[0] + cg[j][1] * u.grad[1]) + pv[j] * u.value;
    }
    if let Some(row) = row {
        w.basis.for_each(|i, phi| row.add(Field::Vorticity(0), i, phi.value));
        for j in 0..2 {
            vel[j].basis.for_each(|i, phi| {
                let v = -(cv[j] * phi.value + cg[j][0] * phi.grad[0] + cg[j][1] * phi.grad[1]) + pv[j] * phi.value;
                row.add(Field::Velocity(j), i, v);
            });
        }
    }
    res
}

/// Newton callback over the unknown vector of `dofs`.
pub fn system_mapped<'a>(
    case: &'a MappedStokesCase,
    dofs: &'a DofMap,
) -> impl FnMut(&[f64], bool) -> Result<(Vec<f64>, Option<CsrMatrix>)> + 'a {
    move |x: &[f64], want: bool| {
        let sol = MappedSolution::from_unknowns(case, dofs, x)?;
        assemble_mapped_vvp_stokes(case, dofs, &sol, want)
    }
}

/// Solves a mapped Stokes case (one Newton step for the linear system).
pub fn solve_mapped(case: &MappedStokesCase, settings: &NewtonSettings) -> Result<(MappedSolution, SolveReport)> {
    let dofs = build_dof_map_mapped(case)?;
    let (x, report) = newton_solve(system_mapped(case, &dofs), dofs.zero_state(), settings)?;
    Ok((MappedSolution::from_unknowns(case, &dofs, &x)?, report))
}

/// Exact circular Couette flow between cylinders of radii `r_in < r_out`,
/// inner wall moving counter-clockwise with speed `speed`, outer wall fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouetteExact {
    pub r_in: f64,
    pub r_out: f64,
    pub speed: f64,
    pub a: f64,
    pub b: f64,
}

impl CouetteExact {
    pub fn new(r_in: f64, r_out: f64, speed: f64) -> Result<Self> {
        polar_map(r_in, r_out)?;
        let delta = r_in / r_out;
        let omega_in = speed / r_in;
        let a = -omega_in * delta * delta / (1.0 - delta * delta);
        let b = omega_in * r_in * r_in / (1.0 - delta * delta);
        Ok(Self { r_in, r_out, speed, a, b })
    }

    /// Azimuthal speed `A r + B / r`.
    pub fn azimuthal(&self, r: f64) -> f64 {
        self.a * r + self.b / r
    }

    /// Constant vorticity `2A`.
    pub fn vorticity(&self) -> f64 {
        2.0 * self.a
    }

    pub fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        let q = self.a + self.b / (x[0] * x[0] + x[1] * x[1]);
        [-q * x[1], q * x[0]]
    }

    /// Exact fields with derivatives; zero pressure.
    pub fn sample(&self, x: [f64; 3]) -> PointSample {
        let (px, py) = (x[0], x[1]);
        let r2 = px * px + py * py;
        let q = self.a + self.b / r2;
        let t = 2.0 * self.b / (r2 * r2);
        let mut s = PointSample::default();
        s.u[0] = -q * py;
        s.u[1] = q * px;
        s.grad_u[0] = [t * px * py, -q + t * py * py, 0.0];
        s.grad_u[1] = [q - t * px * px, -t * px * py, 0.0];
        s.w[0] = self.vorticity();
        s
    }
}

/// Couette flow on the quarter annulus: Dirichlet walls on the cylinders and
/// zero normal pressure gradient on the straight edges.
pub fn couette_case(r_in: f64, r_out: f64, speed: f64, spaces: ComplexSpaces2D<f64>) -> Result<(MappedStokesCase, CouetteExact)> {
    couette_case_on(polar_sector_map(r_in, r_out, 0.5 * PI)?, speed, spaces)
}

/// Couette flow on any polar map (sector or full annulus).
pub fn couette_case_on(map: GeometryMap2D, speed: f64, spaces: ComplexSpaces2D<f64>) -> Result<(MappedStokesCase, CouetteExact)> {
    let GeometryMap2D::Polar { r_in, r_out, .. } = map else {
        return Err(Error::InvalidGeometry(format!("Couette flow needs a polar map, got {map}")));
    };
    let exact = CouetteExact::new(r_in, r_out, speed)?;
    let case = MappedStokesCase::new(map, spaces, 1.0)
        .with_dirichlet(move |x, face| if face == Face::YMax { [0.0; 2] } else { exact.velocity(x) })
        .with_edge(Face::XMin, EdgeCondition::PressureNeumann)
        .with_edge(Face::XMax, EdgeCondition::PressureNeumann);
    Ok((case, exact))
}

/// Unit lid `(1, 0)` on the top edge of a mapped cavity.
pub fn lid_velocity_mapped(_: [f64; 2], face: Face) -> [f64; 2] {
    if face == Face::YMax {
        [1.0, 0.0]
    } else {
        [0.0, 0.0]
    }
}

/// Stokes lid-driven cavity over a wavy bottom wall.
pub fn wavy_cavity_case(a: f64, b: f64, c: f64, spaces: ComplexSpaces2D<f64>, nu: f64) -> Result<MappedStokesCase> {
    let case = MappedStokesCase::new(wavy_map(a, b, c)?, spaces, nu).with_dirichlet(lid_velocity_mapped);
    case.validate()?;
    Ok(case)
}
