//! Tensor-product spline spaces and the compatible (de Rham conforming)
//! space families used for vorticity, velocity and pressure.
//!
//! Coefficients are stored lexicographically with x fastest, then y, then z.
//! The complex maps (rotor, gradient, curl, divergence) act directly on
//! coefficients through per-direction differencing and are exact.

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;
use crate::splines::{BasisEval, KnotVector};

/// A face of the parametric unit square/cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::XMin, Face::XMax, Face::YMin, Face::YMax, Face::ZMin, Face::ZMax];

    pub fn new(axis: usize, is_max: bool) -> Self {
        match (axis, is_max) {
            (0, false) => Face::XMin,
            (0, true) => Face::XMax,
            (1, false) => Face::YMin,
            (1, true) => Face::YMax,
            (2, false) => Face::ZMin,
            (2, true) => Face::ZMax,
            _ => panic!("axis {axis} out of range"),
        }
    }

    pub fn axis(self) -> usize {
        match self {
            Face::XMin | Face::XMax => 0,
            Face::YMin | Face::YMax => 1,
            Face::ZMin | Face::ZMax => 2,
        }
    }

    pub fn is_max(self) -> bool {
        matches!(self, Face::XMax | Face::YMax | Face::ZMax)
    }

    /// Outward unit normal of the parametric face.
    pub fn normal(self) -> [f64; 3] {
        let mut n = [0.0; 3];
        n[self.axis()] = if self.is_max() { 1.0 } else { -1.0 };
        n
    }

    /// Counter-clockwise unit tangent of a face of the unit square.
    pub fn ccw_tangent_2d(self) -> [f64; 2] {
        match self {
            Face::YMin => [1.0, 0.0],
            Face::XMax => [0.0, 1.0],
            Face::YMax => [-1.0, 0.0],
            Face::XMin => [0.0, -1.0],
            _ => panic!("{self:?} is not a face of the unit square"),
        }
    }

    fn bit(self) -> u8 {
        1 << (self.axis() * 2 + self.is_max() as usize)
    }
}

/// Set of faces a grid point lies on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FaceSet(u8);

impl FaceSet {
    pub fn insert(&mut self, f: Face) {
        self.0 |= f.bit();
    }

    pub fn contains(self, f: Face) -> bool {
        self.0 & f.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Face> {
        Face::ALL.into_iter().filter(move |f| self.contains(*f))
    }

    /// True when the point lies on a face perpendicular to `axis`.
    pub fn on_axis(self, axis: usize) -> bool {
        self.iter().any(|f| f.axis() == axis)
    }
}

/// Value, gradient and Hessian of a scalar field (or basis function) at a
/// point. Unused dimensions stay zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Derivs<T> {
    pub value: T,
    pub grad: [T; 3],
    pub hess: [[T; 3]; 3],
}

impl<T: Real> Derivs<T> {
    pub fn zero() -> Self {
        Self { value: T::zero(), grad: [T::zero(); 3], hess: [[T::zero(); 3]; 3] }
    }

    pub fn laplacian(&self) -> T {
        self.hess[0][0] + self.hess[1][1] + self.hess[2][2]
    }

    fn axpy(&mut self, a: T, other: &Derivs<T>) {
        self.value = self.value + a * other.value;
        for i in 0..3 {
            self.grad[i] = self.grad[i] + a * other.grad[i];
            for j in 0..3 {
                self.hess[i][j] = self.hess[i][j] + a * other.hess[i][j];
            }
        }
    }
}

/// Sample of a scalar spline field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample<T> {
    pub dim: usize,
    pub value: T,
    pub gradient: [T; 3],
    /// Present only when second derivatives were requested.
    pub hessian: Option<[[T; 3]; 3]>,
}

/// Tensor product of univariate spline spaces (one per spatial direction).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpace<T> {
    dirs: Vec<KnotVector<T>>,
}

/// Greville collocation point of a tensor space.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint<T> {
    /// Linear index (x fastest), equal to the index of the matching basis function.
    pub index: usize,
    pub multi: [usize; 3],
    pub coords: [T; 3],
    pub faces: FaceSet,
}

/// Active tensor basis functions at a point.
#[derive(Debug, Clone)]
pub struct TensorBasis<T> {
    dims: usize,
    shape: [usize; 3],
    per_dir: Vec<BasisEval<T>>,
}

impl<T: Real> TensorSpace<T> {
    pub fn new(dirs: Vec<KnotVector<T>>) -> Result<Self> {
        if dirs.is_empty() || dirs.len() > 3 {
            return Err(Error::InvalidInput(format!("tensor spaces have 1 to 3 directions, got {}", dirs.len())));
        }
        Ok(Self { dirs })
    }

    pub fn dims(&self) -> usize {
        self.dirs.len()
    }

    pub fn direction(&self, axis: usize) -> &KnotVector<T> {
        &self.dirs[axis]
    }

    pub fn directions(&self) -> &[KnotVector<T>] {
        &self.dirs
    }

    /// Per-direction basis counts, padded with 1.
    pub fn shape(&self) -> [usize; 3] {
        let mut s = [1; 3];
        for (d, kv) in self.dirs.iter().enumerate() {
            s[d] = kv.num_basis();
        }
        s
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.dirs.iter().map(|d| d.degree()).collect()
    }

    pub fn dim(&self) -> usize {
        self.dirs.iter().map(|d| d.num_basis()).product()
    }

    pub fn index(&self, multi: [usize; 3]) -> usize {
        let s = self.shape();
        multi[0] + s[0] * (multi[1] + s[1] * multi[2])
    }

    pub fn multi_index(&self, index: usize) -> [usize; 3] {
        let s = self.shape();
        [index % s[0], (index / s[0]) % s[1], index / (s[0] * s[1])]
    }

    /// Basis functions active at `point` with up to `max_deriv` derivatives.
    pub fn eval_basis(&self, point: &[T], max_deriv: usize) -> Result<TensorBasis<T>> {
        if point.len() < self.dims() {
            return Err(Error::LengthMismatch { expected: self.dims(), got: point.len() });
        }
        let per_dir = self
            .dirs
            .iter()
            .zip(point)
            .map(|(kv, &x)| kv.eval_basis(x, max_deriv))
            .collect::<Result<Vec<_>>>()?;
        Ok(TensorBasis { dims: self.dims(), shape: self.shape(), per_dir })
    }

    /// Greville points in lexicographic order with face classification by
    /// multi-index.
    pub fn greville_grid(&self) -> Result<Vec<GridPoint<T>>> {
        let g = self.dirs.iter().map(|d| d.greville()).collect::<Result<Vec<_>>>()?;
        let s = self.shape();
        let mut out = Vec::with_capacity(self.dim());
        for k in 0..s[2] {
            for j in 0..s[1] {
                for i in 0..s[0] {
                    let multi = [i, j, k];
                    let mut coords = [T::zero(); 3];
                    let mut faces = FaceSet::default();
                    for d in 0..self.dims() {
                        coords[d] = g[d][multi[d]];
                        if multi[d] == 0 {
                            faces.insert(Face::new(d, false));
                        }
                        if multi[d] + 1 == s[d] {
                            faces.insert(Face::new(d, true));
                        }
                    }
                    out.push(GridPoint { index: self.index(multi), multi, coords, faces });
                }
            }
        }
        Ok(out)
    }

    /// Exact integral of every tensor basis function over the domain.
    pub fn basis_integrals(&self) -> Vec<T> {
        let w: Vec<Vec<T>> = self.dirs.iter().map(|d| d.basis_integrals()).collect();
        (0..self.dim())
            .map(|idx| {
                let m = self.multi_index(idx);
                w.iter().enumerate().fold(T::one(), |acc, (d, wd)| acc * wd[m[d]])
            })
            .collect()
    }

    /// Differentiates a field along `axis`; returns the coefficients in the
    /// space with that direction replaced by its derivative space.
    pub fn differentiate(&self, coeffs: &[T], axis: usize) -> Result<(TensorSpace<T>, Vec<T>)> {
        check_len(self.dim(), coeffs.len())?;
        if axis >= self.dims() {
            return Err(Error::InvalidInput(format!("axis {axis} out of range")));
        }
        let mut dirs = self.dirs.clone();
        dirs[axis] = self.dirs[axis].derivative_space()?;
        let out_space = TensorSpace { dirs };
        let w = self.dirs[axis].derivative_weights();
        let s = self.shape();
        let mut stride = 1;
        for d in 0..axis {
            stride *= s[d];
        }
        let out: Vec<T> = (0..out_space.dim())
            .map(|idx| {
                let m = out_space.multi_index(idx);
                let src = self.index(m);
                w[m[axis]] * (coeffs[src + stride] - coeffs[src])
            })
            .collect();
        Ok((out_space, out))
    }

    /// Coefficients interpolating `f` at the Greville grid.
    pub fn interpolate(&self, f: impl Fn(&[T; 3]) -> T) -> Result<Vec<T>> {
        let grid = self.greville_grid()?;
        let mut c: Vec<T> = grid.iter().map(|p| f(&p.coords)).collect();
        for d in 0..self.dims() {
            let kv = &self.dirs[d];
            let g = kv.greville()?;
            let n = kv.num_basis();
            let mut a = vec![T::zero(); n * n];
            for (r, &x) in g.iter().enumerate() {
                let e = kv.eval_basis(x, 0)?;
                for (l, v) in e.values.iter().enumerate() {
                    a[r * n + e.first_basis + l] = *v;
                }
            }
            let lu = DenseLu::factor(a, n)?;
            let s = self.shape();
            let stride: usize = s[..d].iter().product();
            let mut line = vec![T::zero(); n];
            for idx in 0..self.dim() {
                let m = self.multi_index(idx);
                if m[d] != 0 {
                    continue;
                }
                for j in 0..n {
                    line[j] = c[idx + j * stride];
                }
                lu.solve_in_place(&mut line);
                for j in 0..n {
                    c[idx + j * stride] = line[j];
                }
            }
        }
        Ok(c)
    }
}

impl<T: Real> TensorBasis<T> {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn direction(&self, axis: usize) -> &BasisEval<T> {
        &self.per_dir[axis]
    }

    /// Number of active basis functions.
    pub fn len(&self) -> usize {
        self.per_dir.iter().map(|b| b.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Calls `f(global_index, derivs)` for every active tensor basis function.
    pub fn for_each(&self, mut f: impl FnMut(usize, &Derivs<T>)) {
        let one = [T::one(), T::zero(), T::zero()];
        let lens: Vec<usize> = (0..3).map(|d| if d < self.dims { self.per_dir[d].len() } else { 1 }).collect();
        let mut d = Derivs::zero();
        for lk in 0..lens[2] {
            let c = if self.dims > 2 { self.factors(2, lk) } else { one };
            for lj in 0..lens[1] {
                let b = if self.dims > 1 { self.factors(1, lj) } else { one };
                let bc = [b[0] * c[0], b[1] * c[0], b[0] * c[1]];
                for li in 0..lens[0] {
                    let a = self.factors(0, li);
                    d.value = a[0] * bc[0];
                    d.grad = [a[1] * bc[0], a[0] * bc[1], a[0] * bc[2]];
                    d.hess[0][0] = a[2] * bc[0];
                    d.hess[1][1] = a[0] * b[2] * c[0];
                    d.hess[2][2] = a[0] * b[0] * c[2];
                    d.hess[0][1] = a[1] * bc[1];
                    d.hess[0][2] = a[1] * bc[2];
                    d.hess[1][2] = a[0] * b[1] * c[1];
                    d.hess[1][0] = d.hess[0][1];
                    d.hess[2][0] = d.hess[0][2];
                    d.hess[2][1] = d.hess[1][2];
                    let mut idx = self.per_dir[0].first_basis + li;
                    if self.dims > 1 {
                        idx += self.shape[0] * (self.per_dir[1].first_basis + lj);
                    }
                    if self.dims > 2 {
                        idx += self.shape[0] * self.shape[1] * (self.per_dir[2].first_basis + lk);
                    }
                    f(idx, &d);
                }
            }
        }
    }

    #[inline]
    fn factors(&self, dir: usize, local: usize) -> [T; 3] {
        let b = &self.per_dir[dir];
        [b.deriv(0, local), b.deriv(1, local), b.deriv(2, local)]
    }

    /// Field derivatives for coefficient vector `coeffs`.
    pub fn field(&self, coeffs: &[T]) -> Derivs<T> {
        let mut out = Derivs::zero();
        self.for_each(|i, d| out.axpy(coeffs[i], d));
        out
    }
}

/// Evaluates a scalar spline field and its derivatives at `point`.
pub fn eval_field<T: Real>(space: &TensorSpace<T>, coeffs: &[T], point: &[T], max_deriv: usize) -> Result<FieldSample<T>> {
    check_len(space.dim(), coeffs.len())?;
    let basis = space.eval_basis(point, max_deriv)?;
    let d = basis.field(coeffs);
    Ok(FieldSample {
        dim: space.dims(),
        value: d.value,
        gradient: d.grad,
        hessian: if max_deriv >= 2 { Some(d.hess) } else { None },
    })
}

/// Greville grid of a space; see [`TensorSpace::greville_grid`].
pub fn greville_grid<T: Real>(space: &TensorSpace<T>) -> Result<Vec<GridPoint<T>>> {
    space.greville_grid()
}

/// Compatible 2D spaces: `psi` (vorticity / streamfunction), velocity
/// components and pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpaces2D<T> {
    pub kprime: usize,
    pub psi: TensorSpace<T>,
    pub vel_x: TensorSpace<T>,
    pub vel_y: TensorSpace<T>,
    pub pres: TensorSpace<T>,
}

/// Compatible 3D spaces: scalar potential, vorticity components, velocity
/// components and pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpaces3D<T> {
    pub kprime: usize,
    pub phi: TensorSpace<T>,
    pub omega: [TensorSpace<T>; 3],
    pub vel: [TensorSpace<T>; 3],
    pub pres: TensorSpace<T>,
}

fn primal_and_reduced<T: Real>(kprime: usize, breakpoints: &[T]) -> Result<(KnotVector<T>, KnotVector<T>)> {
    let primal = KnotVector::open(kprime + 1, breakpoints)?;
    let reduced = primal.derivative_space()?;
    Ok((primal, reduced))
}

fn check_kprime(kprime: usize) -> Result<()> {
    if kprime < 1 {
        return Err(Error::UnsupportedDegree { degree: kprime, reason: "k' must be at least 1".into() });
    }
    Ok(())
}

/// Builds the 2D complex with pressure degree `kprime` in both directions.
pub fn build_complex_2d<T: Real>(kprime: usize, breakpoints_x: &[T], breakpoints_y: &[T]) -> Result<ComplexSpaces2D<T>> {
    check_kprime(kprime)?;
    let (px, rx) = primal_and_reduced(kprime, breakpoints_x)?;
    let (py, ry) = primal_and_reduced(kprime, breakpoints_y)?;
    Ok(ComplexSpaces2D {
        kprime,
        psi: TensorSpace::new(vec![px.clone(), py.clone()])?,
        vel_x: TensorSpace::new(vec![px, ry.clone()])?,
        vel_y: TensorSpace::new(vec![rx.clone(), py])?,
        pres: TensorSpace::new(vec![rx, ry])?,
    })
}

/// Builds the 3D complex with pressure degree `kprime` in all directions.
pub fn build_complex_3d<T: Real>(kprime: usize, breakpoints: [&[T]; 3]) -> Result<ComplexSpaces3D<T>> {
    check_kprime(kprime)?;
    let mut p = Vec::new();
    let mut r = Vec::new();
    for b in breakpoints {
        let (pp, rr) = primal_and_reduced(kprime, b)?;
        p.push(pp);
        r.push(rr);
    }
    let pick = |reduced: [bool; 3]| -> Result<TensorSpace<T>> {
        TensorSpace::new((0..3).map(|d| if reduced[d] { r[d].clone() } else { p[d].clone() }).collect())
    };
    Ok(ComplexSpaces3D {
        kprime,
        phi: pick([false, false, false])?,
        omega: [pick([true, false, false])?, pick([false, true, false])?, pick([false, false, true])?],
        vel: [pick([false, true, true])?, pick([true, false, true])?, pick([true, true, false])?],
        pres: pick([true, true, true])?,
    })
}

impl<T: Real> ComplexSpaces2D<T> {
    /// Total number of velocity coefficients.
    pub fn velocity_dim(&self) -> usize {
        self.vel_x.dim() + self.vel_y.dim()
    }
}

/// Coefficients of `∇⊥ψ = (∂ψ/∂y, −∂ψ/∂x)` in the velocity spaces.
pub fn rotor_coeffs_2d<T: Real>(spaces: &ComplexSpaces2D<T>, psi: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    check_len(spaces.psi.dim(), psi.len())?;
    let (_, ux) = spaces.psi.differentiate(psi, 1)?;
    let (_, dx) = spaces.psi.differentiate(psi, 0)?;
    Ok((ux, dx.into_iter().map(|v| -v).collect()))
}

/// Coefficients of `∂u_x/∂x + ∂u_y/∂y` in the pressure space.
pub fn divergence_coeffs_2d<T: Real>(spaces: &ComplexSpaces2D<T>, ux: &[T], uy: &[T]) -> Result<Vec<T>> {
    check_len(spaces.vel_x.dim(), ux.len())?;
    check_len(spaces.vel_y.dim(), uy.len())?;
    let (_, a) = spaces.vel_x.differentiate(ux, 0)?;
    let (_, b) = spaces.vel_y.differentiate(uy, 1)?;
    Ok(a.into_iter().zip(b).map(|(a, b)| a + b).collect())
}

/// Coefficients of `∇φ` in the vorticity spaces.
pub fn gradient_coeffs_3d<T: Real>(spaces: &ComplexSpaces3D<T>, phi: &[T]) -> Result<[Vec<T>; 3]> {
    check_len(spaces.phi.dim(), phi.len())?;
    Ok([
        spaces.phi.differentiate(phi, 0)?.1,
        spaces.phi.differentiate(phi, 1)?.1,
        spaces.phi.differentiate(phi, 2)?.1,
    ])
}

/// Coefficients of `∇×ω` in the velocity spaces.
pub fn curl_coeffs_3d<T: Real>(spaces: &ComplexSpaces3D<T>, omega: [&[T]; 3]) -> Result<[Vec<T>; 3]> {
    for c in 0..3 {
        check_len(spaces.omega[c].dim(), omega[c].len())?;
    }
    let d = |c: usize, axis: usize| spaces.omega[c].differentiate(omega[c], axis).map(|r| r.1);
    let sub = |a: Vec<T>, b: Vec<T>| a.into_iter().zip(b).map(|(a, b)| a - b).collect::<Vec<T>>();
    Ok([sub(d(2, 1)?, d(1, 2)?), sub(d(0, 2)?, d(2, 0)?), sub(d(1, 0)?, d(0, 1)?)])
}

/// Coefficients of `∇·u` in the pressure space.
pub fn divergence_coeffs_3d<T: Real>(spaces: &ComplexSpaces3D<T>, vel: [&[T]; 3]) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); spaces.pres.dim()];
    for c in 0..3 {
        check_len(spaces.vel[c].dim(), vel[c].len())?;
        let (_, dc) = spaces.vel[c].differentiate(vel[c], c)?;
        for (o, v) in out.iter_mut().zip(dc) {
            *o = *o + v;
        }
    }
    Ok(out)
}

/// Small dense LU with partial pivoting for interpolation systems.
pub(crate) struct DenseLu<T> {
    n: usize,
    lu: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Real> DenseLu<T> {
    pub(crate) fn factor(mut a: Vec<T>, n: usize) -> Result<Self> {
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        for k in 0..n {
            let (p, pmax) = (k..n).map(|i| (i, a[i * n + k].abs())).fold((k, T::zero()), |b, c| if c.1 > b.1 { c } else { b });
            if !(pmax > T::lit(1e-14) * scale) {
                return Err(Error::Assembly("singular interpolation system".into()));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let d = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / d;
                a[i * n + k] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        a[i * n + j] = a[i * n + j] - f * a[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu: a, piv })
    }

    pub(crate) fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        let mut x: Vec<T> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] = x[i] - self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] = x[i] - self.lu[i * n + j] * x[j];
            }
            x[i] = x[i] / self.lu[i * n + i];
        }
        b.copy_from_slice(&x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splines::uniform_breakpoints;

    fn uniform(n: usize) -> Vec<f64> {
        uniform_breakpoints(n).unwrap()
    }

    #[test]
    fn complex_2d_dimensions() {
        let b = uniform(4);
        let s = build_complex_2d(1, &b, &b).unwrap();
        assert_eq!((s.psi.dim(), s.vel_x.dim(), s.vel_y.dim(), s.pres.dim()), (36, 30, 30, 25));
        assert_eq!(s.velocity_dim(), 60);
        let b1 = uniform(1);
        let s = build_complex_2d(2, &b1, &b1).unwrap();
        assert_eq!(s.pres.dim(), 9);
        assert_eq!(s.pres.degrees(), vec![2, 2]);
        assert!(matches!(build_complex_2d(0, &b1, &b1), Err(Error::UnsupportedDegree { .. })));
    }

    #[test]
    fn complex_3d_dimensions() {
        let b = uniform(2);
        let s = build_complex_3d(1, [&b, &b, &b]).unwrap();
        assert_eq!(s.pres.dim(), 27);
        assert_eq!(s.vel[0].dim(), 36);
        for c in 0..3 {
            let vd = s.vel[c].degrees();
            let od = s.omega[c].degrees();
            for d in 0..3 {
                // velocity is primal only along its own direction, vorticity everywhere else
                assert_eq!(vd[d] == 2, d == c);
                assert_eq!(od[d] == 2, d != c);
            }
        }
    }

    #[test]
    fn greville_grid_classification() {
        let b = uniform(1);
        let px = KnotVector::open(2, &b).unwrap();
        let py = KnotVector::open(1, &b).unwrap();
        let sp = TensorSpace::new(vec![px, py]).unwrap();
        let g = sp.greville_grid().unwrap();
        assert_eq!(g.len(), 6);
        let xs: Vec<f64> = g.iter().map(|p| p.coords[0]).collect();
        let ys: Vec<f64> = g.iter().map(|p| p.coords[1]).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0, 0.0, 0.5, 1.0]);
        assert_eq!(ys, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(g[0].faces.len(), 2);
        assert!(g[0].faces.contains(Face::XMin) && g[0].faces.contains(Face::YMin));
        assert_eq!(g[1].faces.len(), 1);
        assert!(g.iter().enumerate().all(|(i, p)| p.index == i));
    }

    #[test]
    fn eval_field_partition_and_linear_reproduction() {
        let b = vec![0.0, 0.3, 0.45, 1.0];
        let s = build_complex_2d(2, &b, &uniform(3)).unwrap();
        let sp = &s.vel_x;
        let ones = vec![1.0; sp.dim()];
        let f = eval_field(sp, &ones, &[0.37, 0.81], 2).unwrap();
        assert!((f.value - 1.0).abs() < 1e-14);
        assert!(f.gradient.iter().all(|g| g.abs() < 1e-12));
        let zeros = vec![0.0; sp.dim()];
        assert_eq!(eval_field(sp, &zeros, &[0.2, 0.2], 0).unwrap().value, 0.0);
        let grid = sp.greville_grid().unwrap();
        let gx: Vec<f64> = grid.iter().map(|p| p.coords[0]).collect();
        for &(x, y) in &[(0.1, 0.9), (0.5, 0.5), (0.999, 0.001), (1.0, 1.0)] {
            let v = eval_field(sp, &gx, &[x, y], 1).unwrap();
            assert!((v.value - x).abs() < 1e-12);
            assert!((v.gradient[0] - 1.0).abs() < 1e-12);
        }
        assert!(eval_field(sp, &gx[1..], &[0.5, 0.5], 0).is_err());
        assert!(eval_field(sp, &gx, &[1.5, 0.5], 0).is_err());
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let b = vec![0.0, 0.2, 0.7, 1.0];
        let s = build_complex_2d(2, &b, &b).unwrap();
        // degree (3, 2) space contains x^3 y^2
        let c = s.vel_x.interpolate(|p: &[f64; 3]| p[0].powi(3) * p[1] * p[1] - p[1]).unwrap();
        let v = eval_field(&s.vel_x, &c, &[0.33, 0.61], 0).unwrap().value;
        let exact = 0.33f64.powi(3) * 0.61 * 0.61 - 0.61;
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn rotor_then_divergence_vanishes() {
        let b = uniform(3);
        let s = build_complex_2d(2, &b, &b).unwrap();
        let psi: Vec<f64> = (0..s.psi.dim()).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let (ux, uy) = rotor_coeffs_2d(&s, &psi).unwrap();
        let div = divergence_coeffs_2d(&s, &ux, &uy).unwrap();
        assert!(div.iter().all(|d| d.abs() <= 1e-13));
        let constant = vec![2.5; s.psi.dim()];
        let (ux, uy) = rotor_coeffs_2d(&s, &constant).unwrap();
        assert!(ux.iter().chain(&uy).all(|v| *v == 0.0));
        assert!(rotor_coeffs_2d(&s, &psi[1..]).is_err());
    }

    #[test]
    fn dense_lu_solves() {
        let a: Vec<f64> = vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let lu = DenseLu::factor(a, 3).unwrap();
        let mut b = vec![3.0, 5.0, 5.0];
        lu.solve_in_place(&mut b);
        for v in b {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!(DenseLu::<f64>::factor(vec![1.0, 2.0, 2.0, 4.0], 2).is_err());
    }
}
