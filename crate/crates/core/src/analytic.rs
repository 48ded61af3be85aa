//! Closed-form fields with exact derivatives, and the manufactured solutions
//! built from them.
//!
//! Fields are sums of products of univariate factors, so differentiation is
//! carried out term by term without approximation.

use std::sync::Arc;

use crate::colloc2d::{CaseDefinition2D, Formulation};
use crate::colloc3d::CaseDefinition3D;
use crate::spaces::{ComplexSpaces2D, ComplexSpaces3D, Derivs};

/// Univariate factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// Polynomial with ascending coefficients.
    Poly(Vec<f64>),
    /// `e^x` times a polynomial with ascending coefficients.
    ExpPoly(Vec<f64>),
    /// `sin(a x + b)`.
    Sin { a: f64, b: f64 },
    /// `cos(a x + b)`.
    Cos { a: f64, b: f64 },
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

fn poly_deriv(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a).collect()
}

/// Ascending coefficients of a product of polynomials.
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

impl Factor {
    pub fn one() -> Self {
        Factor::Poly(vec![1.0])
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Factor::Poly(c) => poly_eval(c, x),
            Factor::ExpPoly(c) => x.exp() * poly_eval(c, x),
            Factor::Sin { a, b } => (a * x + b).sin(),
            Factor::Cos { a, b } => (a * x + b).cos(),
        }
    }

    /// Derivative as `scale · factor`.
    pub fn derivative(&self) -> (f64, Factor) {
        match self {
            Factor::Poly(c) => (1.0, Factor::Poly(poly_deriv(c))),
            Factor::ExpPoly(c) => {
                let d = poly_deriv(c);
                let sum = (0..c.len()).map(|k| c[k] + d.get(k).copied().unwrap_or(0.0)).collect();
                (1.0, Factor::ExpPoly(sum))
            }
            Factor::Sin { a, b } => (*a, Factor::Cos { a: *a, b: *b }),
            Factor::Cos { a, b } => (-*a, Factor::Sin { a: *a, b: *b }),
        }
    }

    /// Value and derivatives up to second order.
    fn eval3(&self, x: f64) -> [f64; 3] {
        let (s1, d1) = self.derivative();
        let (s2, d2) = d1.derivative();
        [self.eval(x), s1 * d1.eval(x), s1 * s2 * d2.eval(x)]
    }
}

/// `Σ_t c_t Π_d f_{t,d}(x_d)` on up to three coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SepField {
    terms: Vec<(f64, [Factor; 3])>,
}

impl SepField {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn term(coef: f64, fx: Factor, fy: Factor, fz: Factor) -> Self {
        Self { terms: vec![(coef, [fx, fy, fz])] }
    }

    pub fn constant(c: f64) -> Self {
        Self::term(c, Factor::one(), Factor::one(), Factor::one())
    }

    pub fn add(mut self, other: &SepField) -> Self {
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    pub fn scale(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.0 *= s;
        }
        self
    }

    pub fn sub(self, other: &SepField) -> Self {
        self.add(&other.clone().scale(-1.0))
    }

    /// Exact partial derivative along `axis`.
    pub fn diff(&self, axis: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(c, f)| {
                let (s, d) = f[axis].derivative();
                let mut g = f.clone();
                g[axis] = d;
                (c * s, g)
            })
            .filter(|(c, f)| *c != 0.0 && !f.iter().any(|x| matches!(x, Factor::Poly(p) if p.is_empty())))
            .collect();
        Self { terms }
    }

    pub fn value(&self, p: [f64; 3]) -> f64 {
        self.terms.iter().map(|(c, f)| c * f[0].eval(p[0]) * f[1].eval(p[1]) * f[2].eval(p[2])).sum()
    }

    /// Value, gradient and Hessian.
    pub fn derivs(&self, p: [f64; 3]) -> Derivs<f64> {
        let mut out = Derivs::zero();
        for (c, f) in &self.terms {
            let e = [f[0].eval3(p[0]), f[1].eval3(p[1]), f[2].eval3(p[2])];
            let prod = |o: [usize; 3]| c * e[0][o[0]] * e[1][o[1]] * e[2][o[2]];
            out.value += prod([0, 0, 0]);
            for i in 0..3 {
                let mut o = [0; 3];
                o[i] = 1;
                out.grad[i] += prod(o);
                for j in 0..3 {
                    let mut o = [0; 3];
                    o[i] += 1;
                    o[j] += 1;
                    out.hess[i][j] += prod(o);
                }
            }
        }
        out
    }
}

/// Point values of an exact (or discrete) solution in physical coordinates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointSample {
    pub u: [f64; 3],
    /// `grad_u[c][d] = ∂u_c/∂x_d`.
    pub grad_u: [[f64; 3]; 3],
    /// Kinematic pressure.
    pub p: f64,
    pub grad_p: [f64; 3],
    /// Vorticity; the scalar 2D vorticity is stored in component 0.
    pub w: [f64; 3],
    pub grad_w: [[f64; 3]; 3],
}

/// Exact solution of a manufactured problem: velocity, kinematic pressure
/// and vorticity with exact derivatives, and both forcing conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedCase {
    pub dims: usize,
    pub nu: f64,
    pub sigma: f64,
    pub velocity: Vec<SepField>,
    pub pressure: SepField,
    pub vorticity: Vec<SepField>,
}

fn curl_2d(u: &[SepField]) -> SepField {
    u[1].diff(0).sub(&u[0].diff(1))
}

fn curl_3d(u: &[SepField]) -> Vec<SepField> {
    vec![u[2].diff(1).sub(&u[1].diff(2)), u[0].diff(2).sub(&u[2].diff(0)), u[1].diff(0).sub(&u[0].diff(1))]
}

/// `x^2 (x-1)^2`.
fn quartic_bump() -> Vec<f64> {
    vec![0.0, 0.0, 1.0, -2.0, 1.0]
}

/// 2D vortex on the unit square with streamfunction `e^x x²(x−1)² y²(y−1)²`
/// and a polynomial-exponential pressure scaled by `sigma`.
pub fn vortex_2d(nu: f64, sigma: f64) -> ManufacturedCase {
    let psi = SepField::term(1.0, Factor::ExpPoly(quartic_bump()), Factor::Poly(quartic_bump()), Factor::one());
    let velocity = vec![psi.diff(1), psi.diff(0).scale(-1.0)];
    // s = y^2 - y
    let s = vec![0.0, -1.0, 1.0];
    let s2 = poly_mul(&s, &s);
    let p1 = vec![456.0, -456.0, 228.0, -72.0, 12.0];
    let p2 = vec![0.0, 2.0, -5.0, 2.0, 1.0];
    let e = std::f64::consts::E;
    let pressure = SepField::constant(-424.0 + 156.0 * e)
        .add(&SepField::term(-456.0, Factor::one(), Factor::Poly(s.clone()), Factor::one()))
        .add(&SepField::term(1.0, Factor::ExpPoly(p1), Factor::Poly(s), Factor::one()))
        .add(&SepField::term(1.0, Factor::ExpPoly(p2), Factor::Poly(s2), Factor::one()))
        .scale(sigma);
    let vorticity = vec![curl_2d(&velocity)];
    ManufacturedCase { dims: 2, nu, sigma, velocity, pressure, vorticity }
}

/// 3D vortex filament in the unit cube: velocity is the curl of a polynomial
/// potential; pressure `sin(πx) sin(πy) − 4/π²`.
pub fn filament_3d(nu: f64) -> ManufacturedCase {
    let pi = std::f64::consts::PI;
    let xx1 = vec![0.0, -1.0, 1.0];
    let phi = [
        SepField::term(1.0, Factor::Poly(xx1.clone()), Factor::Poly(quartic_bump()), Factor::Poly(quartic_bump())),
        SepField::zero(),
        SepField::term(1.0, Factor::Poly(quartic_bump()), Factor::Poly(quartic_bump()), Factor::Poly(xx1)),
    ];
    let velocity = curl_3d(&phi);
    let vorticity = curl_3d(&velocity);
    let pressure = SepField::term(1.0, Factor::Sin { a: pi, b: 0.0 }, Factor::Sin { a: pi, b: 0.0 }, Factor::one())
        .add(&SepField::constant(-4.0 / (pi * pi)));
    ManufacturedCase { dims: 3, nu, sigma: 1.0, velocity, pressure, vorticity }
}

impl ManufacturedCase {
    pub fn velocity_derivs(&self, x: [f64; 3]) -> Vec<Derivs<f64>> {
        self.velocity.iter().map(|f| f.derivs(x)).collect()
    }

    /// Exact fields at a point.
    pub fn sample(&self, x: [f64; 3]) -> PointSample {
        let mut s = PointSample::default();
        for (c, f) in self.velocity.iter().enumerate() {
            let d = f.derivs(x);
            s.u[c] = d.value;
            s.grad_u[c] = d.grad;
        }
        let p = self.pressure.derivs(x);
        s.p = p.value;
        s.grad_p = p.grad;
        for (c, f) in self.vorticity.iter().enumerate() {
            let d = f.derivs(x);
            s.w[c] = d.value;
            s.grad_w[c] = d.grad;
        }
        s
    }

    /// Total pressure `P = p + ½|u|²` and its gradient.
    pub fn total_pressure(&self, x: [f64; 3]) -> (f64, [f64; 3]) {
        let u = self.velocity_derivs(x);
        let p = self.pressure.derivs(x);
        let mut grad = p.grad;
        let mut k = 0.0;
        for uc in &u {
            k += 0.5 * uc.value * uc.value;
            for (d, g) in grad.iter_mut().enumerate() {
                *g += uc.value * uc.grad[d];
            }
        }
        (p.value + k, grad)
    }

    /// Right-hand side `−νΔu + (u·∇)u + ∇p` (convection dropped when `stokes`).
    pub fn forcing_vp(&self, x: [f64; 3], stokes: bool) -> [f64; 3] {
        let u = self.velocity_derivs(x);
        let p = self.pressure.derivs(x);
        let mut f = [0.0; 3];
        for c in 0..self.dims {
            f[c] = -self.nu * u[c].laplacian() + p.grad[c];
            if !stokes {
                f[c] += (0..self.dims).map(|d| u[d].value * u[c].grad[d]).sum::<f64>();
            }
        }
        f
    }

    /// Right-hand side `ν∇×ω + ω×u + ∇P` (in 2D `ν∇⊥ω + ω×u + ∇P`). For
    /// `stokes` the convective part is dropped and `P` reduces to `p`.
    pub fn forcing_vvp(&self, x: [f64; 3], stokes: bool) -> [f64; 3] {
        let u: Vec<f64> = self.velocity.iter().map(|f| f.value(x)).collect();
        let w: Vec<Derivs<f64>> = self.vorticity.iter().map(|f| f.derivs(x)).collect();
        let grad_p = if stokes { self.pressure.derivs(x).grad } else { self.total_pressure(x).1 };
        let conv = if stokes { 0.0 } else { 1.0 };
        let mut f = [0.0; 3];
        if self.dims == 2 {
            let (wv, wg) = (w[0].value, w[0].grad);
            f[0] = self.nu * wg[1] - conv * wv * u[1] + grad_p[0];
            f[1] = -self.nu * wg[0] + conv * wv * u[0] + grad_p[1];
        } else {
            let g = |c: usize, d: usize| w[c].grad[d];
            let curl = [g(2, 1) - g(1, 2), g(0, 2) - g(2, 0), g(1, 0) - g(0, 1)];
            let wv = [w[0].value, w[1].value, w[2].value];
            let cross = [wv[1] * u[2] - wv[2] * u[1], wv[2] * u[0] - wv[0] * u[2], wv[0] * u[1] - wv[1] * u[0]];
            for c in 0..3 {
                f[c] = self.nu * curl[c] + conv * cross[c] + grad_p[c];
            }
        }
        f
    }

    /// Forcing in the convention of `formulation`.
    pub fn forcing(&self, formulation: Formulation, x: [f64; 3], stokes: bool) -> [f64; 3] {
        match formulation {
            Formulation::VP => self.forcing_vp(x, stokes),
            Formulation::VVP => self.forcing_vvp(x, stokes),
        }
    }

    /// Homogeneous Dirichlet problem on the unit square driven by this solution.
    pub fn case_2d(&self, formulation: Formulation, spaces: ComplexSpaces2D<f64>) -> CaseDefinition2D {
        self.case_2d_with(formulation, spaces, false)
    }

    /// As [`Self::case_2d`]; `stokes` drops the convective term from both
    /// the forcing and the discrete equations.
    pub fn case_2d_with(&self, formulation: Formulation, spaces: ComplexSpaces2D<f64>, stokes: bool) -> CaseDefinition2D {
        assert_eq!(self.dims, 2, "case_2d needs a 2D manufactured solution");
        let me = Arc::new(self.clone());
        CaseDefinition2D::new(formulation, spaces, self.nu)
            .stokes(stokes)
            .with_forcing(move |p| {
                let f = me.forcing(formulation, [p[0], p[1], 0.0], stokes);
                [f[0], f[1]]
            })
    }

    /// Homogeneous Dirichlet problem on the unit cube driven by this solution.
    pub fn case_3d(&self, formulation: Formulation, spaces: ComplexSpaces3D<f64>) -> CaseDefinition3D {
        self.case_3d_with(formulation, spaces, false)
    }

    /// As [`Self::case_3d`] with an optional Stokes switch.
    pub fn case_3d_with(&self, formulation: Formulation, spaces: ComplexSpaces3D<f64>, stokes: bool) -> CaseDefinition3D {
        assert_eq!(self.dims, 3, "case_3d needs a 3D manufactured solution");
        let me = Arc::new(self.clone());
        CaseDefinition3D::new(formulation, spaces, self.nu)
            .stokes(stokes)
            .with_forcing(move |p| me.forcing(formulation, p, stokes))
    }
}
