//! Benchmark problem builders: lid-driven cavities in 2D and 3D.

use crate::colloc2d::{self, CaseDefinition2D, DiscreteSolution2D, Formulation};
use crate::colloc3d::{self, CaseDefinition3D, DiscreteSolution3D};
use crate::error::{Error, Result};
use crate::solver::{continuation_solve, default_ladder, NewtonSettings, SolveReport};
use crate::spaces::{build_complex_2d, build_complex_3d, Face};
use crate::splines::{stretched_breakpoints, uniform_breakpoints};

/// Breakpoints on `[0, 1]`, uniform or tanh-stretched toward the walls.
pub fn breakpoints(num_elements: usize, stretched: bool) -> Result<Vec<f64>> {
    if stretched {
        stretched_breakpoints(num_elements)
    } else {
        uniform_breakpoints(num_elements)
    }
}

/// Unit lid velocity on the top wall; the side walls keep zero data at the
/// lid corners.
pub fn lid_velocity_2d(_: [f64; 2], face: Face) -> [f64; 2] {
    if face == Face::YMax {
        [1.0, 0.0]
    } else {
        [0.0, 0.0]
    }
}

/// 2D lid-driven cavity at Reynolds number `re` (unit lid speed and box).
pub fn cavity_2d(formulation: Formulation, kprime: usize, num_elements: usize, stretched: bool, re: f64) -> Result<CaseDefinition2D> {
    if !(re > 0.0) {
        return Err(Error::InvalidInput(format!("Reynolds number must be positive, got {re}")));
    }
    let b = breakpoints(num_elements, stretched)?;
    let spaces = build_complex_2d(kprime, &b, &b)?;
    let case = CaseDefinition2D::new(formulation, spaces, 1.0 / re).with_dirichlet(lid_velocity_2d);
    case.validate()?;
    Ok(case)
}

/// Solves a 2D case along a Reynolds ladder (`ν = 1/Re` per stage), ending at
/// the case's own Reynolds number. Uses the configured ladder or the default.
pub fn solve_with_continuation_2d(
    case: &CaseDefinition2D,
    settings: &NewtonSettings,
) -> Result<(DiscreteSolution2D, Vec<(f64, SolveReport)>)> {
    let target = 1.0 / case.nu;
    let ladder = ladder_for(settings, target);
    let dofs = colloc2d::build_dof_map(case)?;
    let stages: Vec<CaseDefinition2D> = ladder.iter().map(|&re| case.clone().with_nu(1.0 / re)).collect();
    let mut next = 0;
    let (x, reports) = continuation_solve(
        |_| {
            let stage = &stages[next];
            next += 1;
            Ok(colloc2d::system(stage, &dofs))
        },
        &ladder,
        dofs.zero_state(),
        settings,
    )?;
    Ok((DiscreteSolution2D::from_unknowns(case, &dofs, &x)?, reports))
}

/// Unit lid velocity `(1, 0, 0)` on the top face `y = 1`.
pub fn lid_velocity_3d(_: [f64; 3], face: Face) -> [f64; 3] {
    if face == Face::YMax {
        [1.0, 0.0, 0.0]
    } else {
        [0.0; 3]
    }
}

/// 3D lid-driven cavity: the 2D cavity extruded along `z`.
pub fn cavity_3d(formulation: Formulation, kprime: usize, num_elements: usize, stretched: bool, re: f64) -> Result<CaseDefinition3D> {
    if !(re > 0.0) {
        return Err(Error::InvalidInput(format!("Reynolds number must be positive, got {re}")));
    }
    let b = breakpoints(num_elements, stretched)?;
    let spaces = build_complex_3d(kprime, [&b, &b, &b])?;
    let case = CaseDefinition3D::new(formulation, spaces, 1.0 / re).with_dirichlet(lid_velocity_3d);
    case.validate()?;
    Ok(case)
}

/// 3D analogue of [`solve_with_continuation_2d`].
pub fn solve_with_continuation_3d(
    case: &CaseDefinition3D,
    settings: &NewtonSettings,
) -> Result<(DiscreteSolution3D, Vec<(f64, SolveReport)>)> {
    let target = 1.0 / case.nu;
    let ladder = ladder_for(settings, target);
    let dofs = colloc3d::build_dof_map_3d(case)?;
    let stages: Vec<CaseDefinition3D> = ladder.iter().map(|&re| case.clone().with_nu(1.0 / re)).collect();
    let mut next = 0;
    let (x, reports) = continuation_solve(
        |_| {
            let stage = &stages[next];
            next += 1;
            Ok(colloc3d::system_3d(stage, &dofs))
        },
        &ladder,
        dofs.zero_state(),
        settings,
    )?;
    Ok((DiscreteSolution3D::from_unknowns(case, &dofs, &x)?, reports))
}

fn ladder_for(settings: &NewtonSettings, target: f64) -> Vec<f64> {
    let mut ladder: Vec<f64> = settings.continuation_ladder.clone().unwrap_or_else(|| default_ladder(target));
    ladder.retain(|&r| r < target * (1.0 - 1e-12));
    ladder.push(target);
    ladder
}
