//! Pointwise residual kernels shared by the 2D and 3D assemblies. Each
//! kernel returns the residual value at one collocation point and, when a
//! row is supplied, appends the exact linearization.

use crate::dofs::{DofMap, Equation, EquationKind, Field, RowEntries};
use crate::sparse::CsrMatrix;
use crate::error::Result;
use crate::spaces::{Derivs, TensorBasis, TensorSpace};

/// Basis functions of a space at a point together with the field they carry.
pub(crate) struct Sampled {
    pub basis: TensorBasis<f64>,
    pub val: Derivs<f64>,
}

pub(crate) fn sample(space: &TensorSpace<f64>, coeffs: &[f64], point: &[f64; 3], order: usize) -> Result<Sampled> {
    let basis = space.eval_basis(&point[..space.dims()], order)?;
    let val = basis.field(coeffs);
    Ok(Sampled { basis, val })
}

/// Velocity-pressure momentum balance for component `c`:
/// `−ν Δu_c + (u·∇)u_c + ∂_c p + pen·u_c − pen_target − f_c`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn vp_momentum(
    c: usize,
    vel: &[Sampled],
    p: &Sampled,
    nu: f64,
    convective: bool,
    forcing: f64,
    pen: f64,
    pen_target: f64,
    row: Option<&mut RowEntries<'_>>,
) -> f64 {
    let dims = vel.len();
    let uc = &vel[c].val;
    let mut conv = 0.0;
    if convective {
        for d in 0..dims {
            conv += vel[d].val.value * uc.grad[d];
        }
    }
    let res = -nu * uc.laplacian() + conv + p.val.grad[c] + pen * uc.value - pen_target - forcing;
    if let Some(row) = row {
        vel[c].basis.for_each(|i, phi| {
            let mut v = -nu * phi.laplacian() + pen * phi.value;
            if convective {
                for d in 0..dims {
                    v += vel[d].val.value * phi.grad[d];
                }
                v += phi.value * uc.grad[c];
            }
            row.add(Field::Velocity(c), i, v);
        });
        if convective {
            for e in (0..dims).filter(|&e| e != c) {
                let g = uc.grad[e];
                vel[e].basis.for_each(|i, phi| row.add(Field::Velocity(e), i, phi.value * g));
            }
        }
        p.basis.for_each(|i, phi| row.add(Field::Pressure, i, phi.grad[c]));
    }
    res
}

/// Continuity `∇·u + λ`.
pub(crate) fn continuity(vel: &[Sampled], lambda: f64, lambda_col: usize, row: Option<&mut RowEntries<'_>>) -> f64 {
    let res = vel.iter().enumerate().map(|(c, s)| s.val.grad[c]).sum::<f64>() + lambda;
    if let Some(row) = row {
        for (c, s) in vel.iter().enumerate() {
            s.basis.for_each(|i, phi| row.add(Field::Velocity(c), i, phi.grad[c]));
        }
        row.add_column(lambda_col, 1.0);
    }
    res
}

/// Evaluates every equation of `dofs` in order; the gauge row is handled
/// here, all others by `row_fn`.
pub(crate) fn assemble_rows(
    dofs: &DofMap,
    pressure: &[f64],
    want_jacobian: bool,
    row_fn: &dyn Fn(&Equation, Option<&mut RowEntries<'_>>) -> Result<f64>,
) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
    let n = dofs.num_unknowns();
    let mut res = Vec::with_capacity(n);
    let mut jac = want_jacobian.then(|| CsrMatrix::with_capacity(n, n, n * 48));
    let mut row = RowEntries::new(dofs);
    for eq in dofs.equations() {
        row.clear();
        let r = if eq.kind == EquationKind::Gauge {
            let w = dofs.gauge_weights();
            for (i, wi) in w.iter().enumerate() {
                if *wi != 0.0 {
                    row.add(Field::Pressure, i, *wi);
                }
            }
            w.iter().zip(pressure).map(|(w, p)| w * p).sum()
        } else {
            row_fn(eq, want_jacobian.then_some(&mut row))?
        };
        res.push(r);
        if let Some(j) = jac.as_mut() {
            j.push_row(&mut row.entries);
        }
    }
    Ok((res, jac))
}

/// Van der Corput radical inverse in `base`.
fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// First `n` points of the Halton sequence in `(0, 1)^dims` (bases 2, 3, 5).
pub fn halton_points(n: usize, dims: usize) -> Vec<[f64; 3]> {
    const BASES: [usize; 3] = [2, 3, 5];
    (1..=n)
        .map(|i| {
            let mut p = [0.0; 3];
            for d in 0..dims {
                p[d] = radical_inverse(i, BASES[d]);
            }
            p
        })
        .collect()
}

/// Maximum of `|∇·u|` and of `|u|` over quasi-random parametric points.
pub(crate) fn divergence_and_speed(vel: &[(&TensorSpace<f64>, &[f64])], n_samples: usize) -> Result<(f64, f64)> {
    let dims = vel.len();
    let mut div_max = 0.0f64;
    let mut speed_max = 0.0f64;
    for p in halton_points(n_samples, dims) {
        let mut div = 0.0;
        let mut speed2 = 0.0;
        for (c, (space, coeffs)) in vel.iter().enumerate() {
            let s = sample(space, coeffs, &p, 1)?;
            div += s.val.grad[c];
            speed2 += s.val.value * s.val.value;
        }
        div_max = div_max.max(div.abs());
        speed_max = speed_max.max(speed2.sqrt());
    }
    Ok((div_max, speed_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_prefix() {
        let p = halton_points(3, 2);
        assert_eq!(p[0][..2], [0.5, 1.0 / 3.0]);
        assert_eq!(p[1][..2], [0.25, 2.0 / 3.0]);
        assert_eq!(p[2][0], 0.75);
        assert!(halton_points(1000, 3).iter().all(|q| q.iter().take(3).all(|x| *x > 0.0 && *x < 1.0)));
    }
}
