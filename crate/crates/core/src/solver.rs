//! Sparse direct linear solves, full-step Newton iteration and Reynolds
//! continuation.

use faer::prelude::*;
use faer::sparse::{SparseRowMat, SymbolicSparseRowMat};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Backward error accepted from the linear solver.
pub const BACKWARD_ERROR_TOL: f64 = 1e-10;

const MAX_REFINEMENT_STEPS: usize = 4;

/// Newton iteration controls.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSettings {
    /// Absolute tolerance on the residual ∞-norm.
    pub abs_tol: f64,
    /// Tolerance relative to the initial residual ∞-norm.
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Residual growth factor (relative to the initial residual) treated as divergence.
    pub divergence_factor: f64,
    /// Reynolds numbers solved in sequence before the target; `None` picks
    /// [`default_ladder`].
    pub continuation_ladder: Option<Vec<f64>>,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self { abs_tol: 1e-11, rel_tol: 1e-10, max_iters: 25, divergence_factor: 1e4, continuation_ladder: None }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidInput("Newton tolerances must be positive".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::InvalidInput("divergence_factor must exceed 1".into()));
        }
        Ok(())
    }
}

/// Diagnostics of one sparse direct solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearStats {
    pub size: usize,
    pub matrix_nnz: usize,
    /// `‖Ax − b‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞)` after refinement.
    pub backward_error: f64,
    pub refinement_steps: usize,
}

/// Outcome of a Newton solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    /// Number of Newton updates applied.
    pub iterations: usize,
    /// Residual ∞-norm before each update and at the final state.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub linear: Vec<LinearStats>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }

    /// Largest backward error over all linear solves.
    pub fn max_backward_error(&self) -> f64 {
        self.linear.iter().map(|s| s.backward_error).fold(0.0, f64::max)
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Solves `A x = b` by sparse LU with row equilibration, fill-reducing
/// ordering, partial pivoting and iterative refinement.
pub fn solve_linear(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, LinearStats)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidInput(format!("matrix is {}x{}, expected square", n, a.ncols())));
    }
    if b.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: b.len() });
    }
    if n == 0 {
        return Ok((Vec::new(), LinearStats::default()));
    }
    if (0..n).any(|i| a.row(i).1.iter().all(|v| *v == 0.0)) {
        return Err(Error::SingularSystem("matrix has an empty row".into()));
    }
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let m = a.row(i).1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m > 0.0 { 1.0 / m } else { 1.0 }
        })
        .collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(a.nnz());
    let mut vals = Vec::with_capacity(a.nnz());
    row_ptr.push(0usize);
    for i in 0..n {
        let (c, v) = a.row(i);
        cols.extend_from_slice(c);
        vals.extend(v.iter().map(|x| x * scale[i]));
        row_ptr.push(cols.len());
    }
    let sym = SymbolicSparseRowMat::new_checked(n, n, row_ptr, None, cols);
    let mat = SparseRowMat::<usize, f64>::new(sym, vals);
    let lu = mat.sp_lu().map_err(|e| Error::SingularSystem(format!("LU factorization failed: {e:?}")))?;
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let r = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i] * scale[i]);
        let x = lu.solve(&r);
        (0..n).map(|i| x[(i, 0)]).collect()
    };

    let a_norm = a.norm_inf();
    let b_norm = norm_inf(b);
    let mut x = solve(b);
    let backward = |x: &[f64]| -> (Vec<f64>, f64) {
        let ax = a.matvec(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
        let denom = a_norm * norm_inf(x) + b_norm;
        let e = if denom > 0.0 { norm_inf(&r) / denom } else { norm_inf(&r) };
        (r, e)
    };
    let (mut r, mut berr) = backward(&x);
    let mut steps = 0;
    while steps < MAX_REFINEMENT_STEPS && berr.is_finite() && berr > f64::EPSILON {
        let dx = solve(&r);
        let trial: Vec<f64> = x.iter().zip(&dx).map(|(x, d)| x + d).collect();
        let (r_new, e_new) = backward(&trial);
        steps += 1;
        if !(e_new < berr) {
            break;
        }
        x = trial;
        r = r_new;
        berr = e_new;
    }
    if !berr.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("factorization produced non-finite values".into()));
    }
    if berr > BACKWARD_ERROR_TOL {
        return Err(Error::SingularSystem(format!("backward error {berr:.3e} exceeds {BACKWARD_ERROR_TOL:.0e}")));
    }
    Ok((x, LinearStats { size: n, matrix_nnz: a.nnz(), backward_error: berr, refinement_steps: steps }))
}

/// Full-step Newton iteration. `system(x, want_jacobian)` returns the
/// residual and, when requested, its Jacobian.
pub fn newton_solve<F>(mut system: F, initial: Vec<f64>, settings: &NewtonSettings) -> Result<(Vec<f64>, SolveReport)>
where
    F: FnMut(&[f64], bool) -> Result<(Vec<f64>, Option<CsrMatrix>)>,
{
    settings.validate()?;
    let mut x = initial;
    let mut report = SolveReport::default();
    let mut r0 = f64::NAN;
    loop {
        let (res, jac) = system(&x, true)?;
        if res.len() != x.len() {
            return Err(Error::LengthMismatch { expected: x.len(), got: res.len() });
        }
        let r = norm_inf(&res);
        report.residual_history.push(r);
        if report.iterations == 0 {
            r0 = r;
        }
        if r.is_nan() || (report.iterations > 0 && r > settings.divergence_factor * r0) {
            return Err(Error::Diverged { iteration: report.iterations, residual: r });
        }
        if r <= settings.abs_tol || (report.iterations > 0 && r <= settings.rel_tol * r0) {
            report.converged = true;
            return Ok((x, report));
        }
        if report.iterations >= settings.max_iters {
            return Err(Error::MaxIterations { iterations: report.iterations, residual: r });
        }
        let jac = jac.ok_or_else(|| Error::InvalidInput("system did not return a Jacobian".into()))?;
        let (dx, stats) = solve_linear(&jac, &res)?;
        report.linear.push(stats);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi -= d;
        }
        report.iterations += 1;
    }
}

/// Continuation ladder used when none is configured: `{100, 400, target}`
/// for targets above 400, the target alone otherwise.
pub fn default_ladder(target: f64) -> Vec<f64> {
    if target > 400.0 {
        vec![100.0, 400.0, target]
    } else {
        vec![target]
    }
}

/// Solves a family of problems along an increasing Reynolds ladder, each
/// stage starting from the previous solution. `make(re)` returns the system
/// callback for one stage.
pub fn continuation_solve<M, F>(
    mut make: M,
    ladder: &[f64],
    initial: Vec<f64>,
    settings: &NewtonSettings,
) -> Result<(Vec<f64>, Vec<(f64, SolveReport)>)>
where
    M: FnMut(f64) -> Result<F>,
    F: FnMut(&[f64], bool) -> Result<(Vec<f64>, Option<CsrMatrix>)>,
{
    if ladder.is_empty() {
        return Err(Error::InvalidInput("continuation ladder is empty".into()));
    }
    if ladder.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("continuation ladder must be increasing".into()));
    }
    let mut x = initial;
    let mut reports = Vec::with_capacity(ladder.len());
    for (stage, &re) in ladder.iter().enumerate() {
        let system = make(re)?;
        let (next, report) = newton_solve(system, x, settings)
            .map_err(|e| Error::Continuation { stage, reynolds: re, source: Box::new(e) })?;
        x = next;
        reports.push((re, report));
    }
    Ok((x, reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> CsrMatrix {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        CsrMatrix::from_triplets(d.len(), d.len(), &t).unwrap()
    }

    #[test]
    fn identity_and_diagonal() {
        let b = vec![3.0, -1.0, 7.5];
        let (x, s) = solve_linear(&diag(&[1.0, 1.0, 1.0]), &b).unwrap();
        assert_eq!(x, b);
        assert!(s.backward_error <= 1e-16);
        let (x, _) = solve_linear(&diag(&[2.0, 4.0]), &[2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrices_are_reported() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(solve_linear(&m, &[1.0, 2.0]), Err(Error::SingularSystem(_))));
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        assert!(matches!(solve_linear(&m, &[1.0, 2.0]), Err(Error::SingularSystem(_))));
        assert!(solve_linear(&diag(&[1.0]), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn nonsymmetric_system_with_pivoting() {
        let m = CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 1, 1.0), (0, 2, 2.0), (1, 0, 3.0), (1, 2, 1.0), (2, 0, 1.0), (2, 1, 1.0)],
        )
        .unwrap();
        let (x, s) = solve_linear(&m, &[5.0, 6.0, 3.0]).unwrap();
        let expected = [1.0, 2.0, 1.5];
        let ax = m.matvec(&expected);
        let (x2, _) = solve_linear(&m, &ax).unwrap();
        for i in 0..3 {
            assert!((x2[i] - expected[i]).abs() < 1e-14);
        }
        assert!(s.backward_error <= BACKWARD_ERROR_TOL);
        assert_eq!(x.len(), 3);
    }

    fn scalar_square(target: f64) -> impl FnMut(&[f64], bool) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
        move |x: &[f64], want: bool| Ok((vec![x[0] * x[0] - target], want.then(|| diag(&[2.0 * x[0]]))))
    }

    #[test]
    fn newton_scalar_square_root() {
        let (x, rep) = newton_solve(scalar_square(4.0), vec![3.0], &NewtonSettings::default()).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-9);
        assert!(rep.converged);
        // hand iteration: 3 -> 13/6 -> 2.00641 -> ...
        let h = &rep.residual_history;
        assert!((h[0] - 5.0).abs() < 1e-15);
        assert!((h[1] - (169.0 / 36.0 - 4.0)).abs() < 1e-13);
        for w in h.windows(2).skip(1) {
            if w[0] < 1e-2 && w[1] > 1e-300 {
                assert!(w[1] <= 1.0 * w[0] * w[0]);
            }
        }
    }

    #[test]
    fn newton_linear_problem_takes_one_step() {
        let sys = |x: &[f64], want: bool| {
            let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]).unwrap();
            let ax = a.matvec(x);
            Ok((vec![ax[0] - 1.0, ax[1] - 2.0], want.then_some(a)))
        };
        let (_, rep) = newton_solve(sys, vec![0.0, 0.0], &NewtonSettings::default()).unwrap();
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn newton_failures_are_distinguished() {
        let s = NewtonSettings { max_iters: 2, ..Default::default() };
        assert!(matches!(newton_solve(scalar_square(4.0), vec![100.0], &s), Err(Error::MaxIterations { .. })));
        // x^2 + 1 has no real root; from a tiny start the first step explodes
        let sys = |x: &[f64], want: bool| Ok((vec![x[0] * x[0] + 1.0], want.then(|| diag(&[2.0 * x[0]]))));
        assert!(matches!(newton_solve(sys, vec![1e-6], &NewtonSettings::default()), Err(Error::Diverged { .. })));
        let nan = |_: &[f64], want: bool| Ok((vec![f64::NAN], want.then(|| diag(&[1.0]))));
        assert!(matches!(newton_solve(nan, vec![0.0], &NewtonSettings::default()), Err(Error::Diverged { .. })));
        let bad = NewtonSettings { max_iters: 0, ..Default::default() };
        assert!(newton_solve(scalar_square(4.0), vec![3.0], &bad).is_err());
    }

    #[test]
    fn continuation_ladders() {
        assert_eq!(default_ladder(1000.0), vec![100.0, 400.0, 1000.0]);
        assert_eq!(default_ladder(100.0), vec![100.0]);
        let s = NewtonSettings::default();
        let (x, reps) = continuation_solve(|t| Ok(scalar_square(t)), &[1.0, 4.0, 9.0], vec![0.5], &s).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-9);
        assert_eq!(reps.len(), 3);
        let (direct, _) = newton_solve(scalar_square(4.0), vec![3.0], &s).unwrap();
        let (single, _) = continuation_solve(|t| Ok(scalar_square(t)), &[4.0], vec![3.0], &s).unwrap();
        assert_eq!(direct, single);
        assert!(matches!(continuation_solve(|t| Ok(scalar_square(t)), &[], vec![3.0], &s), Err(Error::InvalidInput(_))));
        assert!(continuation_solve(|t| Ok(scalar_square(t)), &[4.0, 1.0], vec![3.0], &s).is_err());
        let err = continuation_solve(|t| Ok(scalar_square(t)), &[4.0, 9.0], vec![3.0], &NewtonSettings { max_iters: 1, ..s })
            .unwrap_err();
        assert!(matches!(err, Error::Continuation { stage: 0, .. }));
    }
}
