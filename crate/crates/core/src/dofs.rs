//! Degree-of-freedom bookkeeping shared by the 2D, 3D and mapped assemblies:
//! strong normal-velocity constraints, unknown numbering and the list of
//! collocation equations.

use crate::error::{check_len, Error, Result};
use crate::spaces::{Face, FaceSet, TensorSpace};

/// Which discrete field a coefficient belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Velocity(usize),
    Pressure,
    Vorticity(usize),
}

/// Status of one velocity coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dof {
    /// Unknown with the given global column.
    Free(usize),
    /// Prescribed by the normal boundary condition.
    Fixed(f64),
}

/// How the pressure constant is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaugeMode {
    /// Exact spline integral of the pressure vanishes.
    #[default]
    MeanZero,
    /// First pressure coefficient vanishes.
    PinFirst,
}

/// Type of a collocation equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquationKind {
    Momentum(usize),
    Continuity,
    Constitutive(usize),
    Gauge,
}

/// One collocation equation and the geometric data its row needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub kind: EquationKind,
    /// Index of the Greville point in the grid of the equation's own space.
    pub grid_index: usize,
    pub coords: [f64; 3],
    /// Faces of the parametric domain the point lies on.
    pub faces: FaceSet,
    /// Greville spacing perpendicular to each face the point lies on, by axis.
    pub h: [f64; 3],
}

impl Equation {
    pub fn is_boundary(&self) -> bool {
        !self.faces.is_empty()
    }
}

/// Unknown numbering and equation list.
///
/// Unknowns are ordered `[free u_0, free u_1, (free u_2), p, (ω components), λ]`;
/// equations are ordered `[momentum per component, continuity,
/// (constitutive per component), gauge]`.
#[derive(Debug, Clone)]
pub struct DofMap {
    velocity: Vec<Vec<Dof>>,
    pressure_start: usize,
    pressure_len: usize,
    vorticity_start: Vec<usize>,
    vorticity_len: Vec<usize>,
    lambda: usize,
    equations: Vec<Equation>,
    gauge: GaugeMode,
    gauge_weights: Vec<f64>,
    removed: Vec<usize>,
}

/// Inputs for [`DofMap::build`].
pub struct DofLayout<'a> {
    pub velocity: Vec<&'a TensorSpace<f64>>,
    pub pressure: &'a TensorSpace<f64>,
    pub vorticity: Vec<&'a TensorSpace<f64>>,
    /// Faces on which the normal velocity is imposed strongly.
    pub strong_normal: &'a dyn Fn(Face) -> bool,
    /// Value of velocity component `c` at a point of face `face`.
    pub normal_data: &'a dyn Fn(usize, [f64; 3], Face) -> f64,
    pub gauge: GaugeMode,
}

fn perpendicular_spacing(space: &TensorSpace<f64>) -> Result<Vec<(f64, f64)>> {
    space
        .directions()
        .iter()
        .map(|kv| {
            let g = kv.greville()?;
            let n = g.len();
            Ok((g[1] - g[0], g[n - 1] - g[n - 2]))
        })
        .collect()
}

fn equations_on(space: &TensorSpace<f64>, kind: EquationKind, keep: impl Fn(usize) -> bool) -> Result<Vec<Equation>> {
    let spacing = perpendicular_spacing(space)?;
    Ok(space
        .greville_grid()?
        .into_iter()
        .filter(|p| keep(p.index))
        .map(|p| {
            let mut h = [0.0; 3];
            for f in p.faces.iter() {
                let (lo, hi) = spacing[f.axis()];
                h[f.axis()] = if f.is_max() { hi } else { lo };
            }
            Equation { kind, grid_index: p.index, coords: p.coords, faces: p.faces, h }
        })
        .collect())
}

/// Coefficients of component `c` whose multi-index lies on a strong normal face,
/// with values from trace interpolation of the boundary data.
fn normal_constraints(space: &TensorSpace<f64>, c: usize, layout: &DofLayout<'_>) -> Result<Vec<Option<f64>>> {
    let mut fixed = vec![None; space.dim()];
    let shape = space.shape();
    let dims = space.dims();
    let others: Vec<usize> = (0..dims).filter(|&d| d != c).collect();
    let trace = TensorSpace::new(others.iter().map(|&d| space.direction(d).clone()).collect())?;
    for is_max in [false, true] {
        let face = Face::new(c, is_max);
        if !(layout.strong_normal)(face) {
            continue;
        }
        let (lo, hi) = space.direction(c).domain();
        let at = if is_max { hi } else { lo };
        let vals = trace
            .interpolate(|q| {
                let mut x = [0.0; 3];
                x[c] = at;
                for (k, &d) in others.iter().enumerate() {
                    x[d] = q[k];
                }
                (layout.normal_data)(c, x, face)
            })
            .map_err(|e| Error::Assembly(format!("trace interpolation on {face:?}: {e}")))?;
        let layer = if is_max { shape[c] - 1 } else { 0 };
        for (t, v) in vals.into_iter().enumerate() {
            let tm = trace.multi_index(t);
            let mut m = [0usize; 3];
            m[c] = layer;
            for (k, &d) in others.iter().enumerate() {
                m[d] = tm[k];
            }
            fixed[space.index(m)] = Some(v);
        }
    }
    Ok(fixed)
}

impl DofMap {
    pub fn build(layout: &DofLayout<'_>) -> Result<Self> {
        let dims = layout.velocity.len();
        if layout.velocity.iter().any(|s| s.dims() != dims) || layout.pressure.dims() != dims {
            return Err(Error::InvalidInput("velocity and pressure spaces disagree on dimension".into()));
        }
        let mut next = 0;
        let mut velocity = Vec::with_capacity(dims);
        let mut removed = Vec::with_capacity(dims);
        let mut equations = Vec::new();
        for (c, space) in layout.velocity.iter().enumerate() {
            let fixed = normal_constraints(space, c, layout)?;
            removed.push(fixed.iter().filter(|f| f.is_some()).count());
            let dofs: Vec<Dof> = fixed
                .iter()
                .map(|f| match f {
                    Some(v) => Dof::Fixed(*v),
                    None => {
                        next += 1;
                        Dof::Free(next - 1)
                    }
                })
                .collect();
            equations.extend(equations_on(space, EquationKind::Momentum(c), |i| fixed[i].is_none())?);
            velocity.push(dofs);
        }
        let pressure_start = next;
        let pressure_len = layout.pressure.dim();
        next += pressure_len;
        equations.extend(equations_on(layout.pressure, EquationKind::Continuity, |_| true)?);
        let mut vorticity_start = Vec::new();
        let mut vorticity_len = Vec::new();
        for (c, space) in layout.vorticity.iter().enumerate() {
            vorticity_start.push(next);
            vorticity_len.push(space.dim());
            next += space.dim();
            equations.extend(equations_on(space, EquationKind::Constitutive(c), |_| true)?);
        }
        let lambda = next;
        equations.push(Equation {
            kind: EquationKind::Gauge,
            grid_index: 0,
            coords: [0.0; 3],
            faces: FaceSet::default(),
            h: [0.0; 3],
        });
        let gauge_weights = match layout.gauge {
            GaugeMode::MeanZero => layout.pressure.basis_integrals(),
            GaugeMode::PinFirst => {
                let mut w = vec![0.0; pressure_len];
                w[0] = 1.0;
                w
            }
        };
        let map = Self {
            velocity,
            pressure_start,
            pressure_len,
            vorticity_start,
            vorticity_len,
            lambda,
            equations,
            gauge: layout.gauge,
            gauge_weights,
            removed,
        };
        if !map.is_square() {
            return Err(Error::Assembly(format!(
                "collocation system is not square: {} equations, {} unknowns",
                map.num_equations(),
                map.num_unknowns()
            )));
        }
        Ok(map)
    }

    pub fn dims(&self) -> usize {
        self.velocity.len()
    }

    pub fn num_unknowns(&self) -> usize {
        self.lambda + 1
    }

    pub fn num_equations(&self) -> usize {
        self.equations.len()
    }

    pub fn is_square(&self) -> bool {
        self.num_unknowns() == self.num_equations()
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn gauge(&self) -> GaugeMode {
        self.gauge
    }

    /// Pressure weights of the gauge row.
    pub fn gauge_weights(&self) -> &[f64] {
        &self.gauge_weights
    }

    pub fn velocity_dofs(&self, c: usize) -> &[Dof] {
        &self.velocity[c]
    }

    /// Number of free coefficients (equivalently, momentum equations) of component `c`.
    pub fn num_free_velocity(&self, c: usize) -> usize {
        self.velocity[c].len() - self.removed[c]
    }

    /// Number of coefficients (equivalently, momentum points) removed by the normal condition.
    pub fn num_fixed_velocity(&self, c: usize) -> usize {
        self.removed[c]
    }

    pub fn lambda_index(&self) -> usize {
        self.lambda
    }

    pub fn pressure_range(&self) -> std::ops::Range<usize> {
        self.pressure_start..self.pressure_start + self.pressure_len
    }

    pub fn vorticity_range(&self, c: usize) -> std::ops::Range<usize> {
        self.vorticity_start[c]..self.vorticity_start[c] + self.vorticity_len[c]
    }

    pub fn num_vorticity_components(&self) -> usize {
        self.vorticity_start.len()
    }

    /// Global column of a coefficient, or `None` when it is prescribed.
    #[inline]
    pub fn column(&self, field: Field, index: usize) -> Option<usize> {
        match field {
            Field::Velocity(c) => match self.velocity[c][index] {
                Dof::Free(k) => Some(k),
                Dof::Fixed(_) => None,
            },
            Field::Pressure => Some(self.pressure_start + index),
            Field::Vorticity(c) => Some(self.vorticity_start[c] + index),
        }
    }

    /// Full coefficient vector of velocity component `c` (free values from `x`, fixed from the map).
    pub fn velocity_coeffs(&self, x: &[f64], c: usize) -> Vec<f64> {
        self.velocity[c]
            .iter()
            .map(|d| match *d {
                Dof::Free(k) => x[k],
                Dof::Fixed(v) => v,
            })
            .collect()
    }

    pub fn pressure_coeffs<'x>(&self, x: &'x [f64]) -> &'x [f64] {
        &x[self.pressure_range()]
    }

    pub fn vorticity_coeffs<'x>(&self, x: &'x [f64], c: usize) -> &'x [f64] {
        &x[self.vorticity_range(c)]
    }

    /// Packs full field coefficients into an unknown vector; fixed velocity
    /// coefficients are dropped.
    pub fn pack(&self, velocity: &[&[f64]], pressure: &[f64], vorticity: &[&[f64]], lambda: f64) -> Result<Vec<f64>> {
        check_len(self.dims(), velocity.len())?;
        check_len(self.num_vorticity_components(), vorticity.len())?;
        check_len(self.pressure_len, pressure.len())?;
        let mut x = vec![0.0; self.num_unknowns()];
        for (c, v) in velocity.iter().enumerate() {
            check_len(self.velocity[c].len(), v.len())?;
            for (d, val) in self.velocity[c].iter().zip(v.iter()) {
                if let Dof::Free(k) = d {
                    x[*k] = *val;
                }
            }
        }
        x[self.pressure_range()].copy_from_slice(pressure);
        for (c, w) in vorticity.iter().enumerate() {
            check_len(self.vorticity_len[c], w.len())?;
            x[self.vorticity_range(c)].copy_from_slice(w);
        }
        x[self.lambda] = lambda;
        Ok(x)
    }

    /// Unknown vector with zero free values (fixed coefficients carry the boundary data).
    pub fn zero_state(&self) -> Vec<f64> {
        vec![0.0; self.num_unknowns()]
    }
}

/// Sparse row under construction: accumulates `(column, value)` pairs for
/// coefficients of any field, skipping prescribed ones.
pub(crate) struct RowEntries<'a> {
    dofs: &'a DofMap,
    pub(crate) entries: Vec<(usize, f64)>,
}

impl<'a> RowEntries<'a> {
    pub(crate) fn new(dofs: &'a DofMap) -> Self {
        Self { dofs, entries: Vec::with_capacity(256) }
    }

    pub(crate) fn clear(&mut self) {
        self.entries.clear();
    }

    #[inline]
    pub(crate) fn add(&mut self, field: Field, index: usize, value: f64) {
        if let Some(col) = self.dofs.column(field, index) {
            self.entries.push((col, value));
        }
    }

    #[inline]
    pub(crate) fn add_column(&mut self, col: usize, value: f64) {
        self.entries.push((col, value));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::build_complex_2d;
    use crate::splines::uniform_breakpoints;

    fn layout_2d<'a>(
        s: &'a crate::spaces::ComplexSpaces2D<f64>,
        vvp: bool,
        data: &'a dyn Fn(usize, [f64; 3], Face) -> f64,
    ) -> DofLayout<'a> {
        DofLayout {
            velocity: vec![&s.vel_x, &s.vel_y],
            pressure: &s.pres,
            vorticity: if vvp { vec![&s.psi] } else { vec![] },
            strong_normal: &|_| true,
            normal_data: data,
            gauge: GaugeMode::MeanZero,
        }
    }

    #[test]
    fn square_for_small_configurations() {
        let zero = |_: usize, _: [f64; 3], _: Face| 0.0;
        for k in 1..=3 {
            for n in [2, 4] {
                let b = uniform_breakpoints(n).unwrap();
                let s = build_complex_2d(k, &b, &b).unwrap();
                for vvp in [false, true] {
                    let m = DofMap::build(&layout_2d(&s, vvp, &zero)).unwrap();
                    assert!(m.is_square());
                    assert_eq!(m.num_fixed_velocity(0), 2 * s.vel_x.direction(1).num_basis());
                    assert!(m.velocity_dofs(0).iter().all(|d| !matches!(d, Dof::Fixed(v) if *v != 0.0)));
                }
            }
        }
    }

    #[test]
    fn figure_layout_k2_four_elements() {
        let zero = |_: usize, _: [f64; 3], _: Face| 0.0;
        let b = uniform_breakpoints(4).unwrap();
        let s = build_complex_2d(2, &b, &b).unwrap();
        let m = DofMap::build(&layout_2d(&s, true, &zero)).unwrap();
        // vel_x is 7 x 6: the two x-faces lose 6 points each
        assert_eq!(m.num_fixed_velocity(0), 12);
        let xmom: Vec<_> = m.equations().iter().filter(|e| e.kind == EquationKind::Momentum(0)).collect();
        assert_eq!(xmom.len(), 42 - 12);
        assert!(xmom.iter().all(|e| !e.faces.on_axis(0)));
        let bottom = xmom.iter().find(|e| e.faces.contains(Face::YMin)).unwrap();
        // reduced y-degree 2 on 4 elements: Greville 0, 0.125
        assert!((bottom.h[1] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn trace_interpolation_reproduces_boundary_data() {
        let b = uniform_breakpoints(3).unwrap();
        let s = build_complex_2d(2, &b, &b).unwrap();
        // u_x = y^2 on x = 0, u_y = 1 - x on y = 1, zero elsewhere
        let data = |c: usize, x: [f64; 3], f: Face| match (c, f) {
            (0, Face::XMin) => x[1] * x[1],
            (1, Face::YMax) => 1.0 - x[0],
            _ => 0.0,
        };
        let m = DofMap::build(&layout_2d(&s, false, &data)).unwrap();
        let x = m.zero_state();
        let ux = m.velocity_coeffs(&x, 0);
        let uy = m.velocity_coeffs(&x, 1);
        for t in [0.0, 0.3, 0.77, 1.0] {
            let v = crate::spaces::eval_field(&s.vel_x, &ux, &[0.0, t], 0).unwrap().value;
            assert!((v - t * t).abs() < 1e-13);
            let w = crate::spaces::eval_field(&s.vel_y, &uy, &[t, 1.0], 0).unwrap().value;
            assert!((w - (1.0 - t)).abs() < 1e-13);
        }
        let packed = m.pack(&[&ux, &uy], &vec![0.5; s.pres.dim()], &[], 2.0).unwrap();
        assert_eq!(packed[m.lambda_index()], 2.0);
        assert_eq!(m.velocity_coeffs(&packed, 0), ux);
    }
}
