//! Error measurement and post-processing: error norms against exact fields,
//! convergence rates, centerline profiles and extrema, streamfunctions and
//! reference profile tables.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytic::{ManufacturedCase, PointSample};
use crate::colloc2d::{DiscreteSolution2D, Formulation};
use crate::error::{Error, Result};
use crate::quadrature::span_rule;

/// Physical image of a parametric point and the Jacobian determinant there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedPoint {
    pub x: [f64; 3],
    pub jacobian: f64,
}

/// Read access to a discrete solution for post-processing. Samples are
/// returned in physical coordinates; unmapped solutions use the identity.
pub trait SolutionView {
    fn dims(&self) -> usize;
    fn kprime(&self) -> usize;
    fn formulation(&self) -> Formulation;
    /// Parametric breakpoints per direction.
    fn breakpoints(&self) -> Vec<Vec<f64>>;
    /// Physical point, Jacobian and fields at a parametric point.
    fn sample(&self, xi: [f64; 3]) -> Result<(MappedPoint, PointSample)>;
    /// Parametric (pulled-back) velocity at a parametric point.
    fn parametric_velocity(&self, xi: [f64; 3]) -> Result<[f64; 3]>;

    /// Largest parametric knot span.
    fn mesh_size(&self) -> f64 {
        self.breakpoints()
            .iter()
            .flat_map(|b| b.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }
}

/// Exact fields in physical coordinates.
pub trait ExactSolution {
    fn exact(&self, x: [f64; 3]) -> PointSample;
}

impl ExactSolution for ManufacturedCase {
    fn exact(&self, x: [f64; 3]) -> PointSample {
        self.sample(x)
    }
}

impl<F: Fn([f64; 3]) -> PointSample> ExactSolution for F {
    fn exact(&self, x: [f64; 3]) -> PointSample {
        self(x)
    }
}

impl SolutionView for DiscreteSolution2D {
    fn dims(&self) -> usize {
        2
    }

    fn kprime(&self) -> usize {
        self.spaces.kprime
    }

    fn formulation(&self) -> Formulation {
        self.formulation
    }

    fn breakpoints(&self) -> Vec<Vec<f64>> {
        (0..2).map(|a| self.spaces.pres.direction(a).breakpoints()).collect()
    }

    fn sample(&self, xi: [f64; 3]) -> Result<(MappedPoint, PointSample)> {
        let pt = [xi[0], xi[1]];
        let u = self.velocity(pt, 1)?;
        let (p, gp) = self.kinematic_pressure(pt)?;
        let (w, gw) = self.vorticity(pt)?;
        let mut s = PointSample { p, ..Default::default() };
        for c in 0..2 {
            s.u[c] = u[c].value;
            s.grad_u[c] = u[c].grad;
            s.grad_p[c] = gp[c];
            s.grad_w[0][c] = gw[c];
        }
        s.w[0] = w;
        Ok((MappedPoint { x: xi, jacobian: 1.0 }, s))
    }

    fn parametric_velocity(&self, xi: [f64; 3]) -> Result<[f64; 3]> {
        let u = self.velocity([xi[0], xi[1]], 0)?;
        Ok([u[0].value, u[1].value, 0.0])
    }
}

/// `L²` and `H¹`-seminorm errors of one field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub l2: f64,
    pub h1: f64,
}

/// Errors of a discrete solution against an exact one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub h: f64,
    pub kprime: usize,
    pub formulation: Formulation,
    pub velocity: FieldError,
    /// Kinematic pressure, both fields shifted to zero mean.
    pub pressure: FieldError,
    pub vorticity: FieldError,
}

/// Tensor Gauss rule over the spans of `breakpoints`, `order` points per
/// direction per span, calling `f(point, weight)`.
pub fn for_each_quadrature_point(
    breakpoints: &[Vec<f64>],
    order: usize,
    mut f: impl FnMut([f64; 3], f64) -> Result<()>,
) -> Result<()> {
    if order < 1 {
        return Err(Error::InvalidInput("quadrature order must be at least 1".into()));
    }
    let rules: Vec<(Vec<f64>, Vec<f64>)> = breakpoints.iter().map(|b| span_rule(b, order)).collect::<Result<_>>()?;
    let dims = rules.len();
    let len = |d: usize| if d < dims { rules[d].0.len() } else { 1 };
    for k in 0..len(2) {
        for j in 0..len(1) {
            for i in 0..len(0) {
                let mut p = [0.0; 3];
                let mut w = 1.0;
                for (d, idx) in [i, j, k].into_iter().enumerate().take(dims) {
                    p[d] = rules[d].0[idx];
                    w *= rules[d].1[idx];
                }
                f(p, w)?;
            }
        }
    }
    Ok(())
}

/// `‖approx − exact‖_{L²}` of scalar functions over the box spanned by
/// `breakpoints`.
pub fn l2_error_scalar(
    breakpoints: &[Vec<f64>],
    order: usize,
    approx: impl Fn([f64; 3]) -> f64,
    exact: impl Fn([f64; 3]) -> f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for_each_quadrature_point(breakpoints, order, |p, w| {
        let e = approx(p) - exact(p);
        sum += w * e * e;
        Ok(())
    })?;
    Ok(sum.sqrt())
}

fn sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Errors in `L²` and `H¹`-seminorm of velocity, kinematic pressure and
/// vorticity, by Gauss quadrature with `k'+3` points per direction per span.
/// Mapped solutions are integrated in physical space through their Jacobian.
pub fn error_norms(solution: &dyn SolutionView, exact: &dyn ExactSolution) -> Result<ErrorReport> {
    error_norms_with_order(solution, exact, solution.kprime() + 3)
}

/// [`error_norms`] with an explicit number of points per span.
pub fn error_norms_with_order(solution: &dyn SolutionView, exact: &dyn ExactSolution, order: usize) -> Result<ErrorReport> {
    let dims = solution.dims();
    let nw = if dims == 2 { 1 } else { 3 };
    let breaks = solution.breakpoints();
    let mut samples = Vec::new();
    let (mut area, mut mean_h, mut mean_e) = (0.0, 0.0, 0.0);
    for_each_quadrature_point(&breaks, order, |xi, w| {
        let (m, s) = solution.sample(xi)?;
        let e = exact.exact(m.x);
        let wt = w * m.jacobian.abs();
        area += wt;
        mean_h += wt * s.p;
        mean_e += wt * e.p;
        samples.push((wt, s, e));
        Ok(())
    })?;
    if !(area > 0.0) {
        return Err(Error::InvalidGeometry("domain has zero measure".into()));
    }
    let shift = (mean_h - mean_e) / area;
    let mut acc = [0.0; 6];
    for (wt, s, e) in &samples {
        for c in 0..dims {
            acc[0] += wt * (s.u[c] - e.u[c]).powi(2);
            acc[1] += wt * sq_diff(&s.grad_u[c][..dims], &e.grad_u[c][..dims]);
        }
        acc[2] += wt * (s.p - shift - e.p).powi(2);
        acc[3] += wt * sq_diff(&s.grad_p[..dims], &e.grad_p[..dims]);
        for c in 0..nw {
            acc[4] += wt * (s.w[c] - e.w[c]).powi(2);
            acc[5] += wt * sq_diff(&s.grad_w[c][..dims], &e.grad_w[c][..dims]);
        }
    }
    let f = |a: f64, b: f64| FieldError { l2: a.sqrt(), h1: b.sqrt() };
    Ok(ErrorReport {
        h: solution.mesh_size(),
        kprime: solution.kprime(),
        formulation: solution.formulation(),
        velocity: f(acc[0], acc[1]),
        pressure: f(acc[2], acc[3]),
        vorticity: f(acc[4], acc[5]),
    })
}

/// Observed order `log(e_coarse / e_fine) / log(h_coarse / h_fine)`; `None`
/// when either error is zero or not finite.
pub fn observed_rate(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> Option<f64> {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    (ok(e_coarse) && ok(e_fine) && ok(h_coarse / h_fine) && h_coarse != h_fine)
        .then(|| (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln())
}

/// Rates of one field between consecutive meshes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldRates {
    pub l2: Vec<Option<f64>>,
    pub h1: Vec<Option<f64>>,
}

impl FieldRates {
    pub fn last_l2(&self) -> Option<f64> {
        self.l2.last().copied().flatten()
    }

    pub fn last_h1(&self) -> Option<f64> {
        self.h1.last().copied().flatten()
    }
}

/// Observed convergence rates of all fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRates {
    pub velocity: FieldRates,
    pub pressure: FieldRates,
    pub vorticity: FieldRates,
}

/// Rates between consecutive reports on successively refined meshes.
pub fn convergence_rates(reports: &[ErrorReport]) -> Result<ConvergenceRates> {
    if reports.len() < 2 {
        return Err(Error::InvalidInput("convergence rates need at least two reports".into()));
    }
    let mut out = ConvergenceRates::default();
    for w in reports.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if !(b.h < a.h) {
            return Err(Error::InvalidInput(format!("mesh sizes must decrease, got {} then {}", a.h, b.h)));
        }
        for (r, ea, eb) in [
            (&mut out.velocity, a.velocity, b.velocity),
            (&mut out.pressure, a.pressure, b.pressure),
            (&mut out.vorticity, a.vorticity, b.vorticity),
        ] {
            r.l2.push(observed_rate(ea.l2, eb.l2, a.h, b.h));
            r.h1.push(observed_rate(ea.h1, eb.h1, a.h, b.h));
        }
    }
    Ok(out)
}

/// Velocity component sampled along a line through the domain center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    /// Direction of the line.
    pub axis: usize,
    /// Sampled velocity component.
    pub component: usize,
    pub coords: Vec<f64>,
    pub values: Vec<f64>,
}

fn line_point(dims: usize, axis: usize, t: f64) -> [f64; 3] {
    let mut p = [0.0; 3];
    for (d, v) in p.iter_mut().enumerate().take(dims) {
        *v = if d == axis { t } else { 0.5 };
    }
    p
}

fn velocity_on_line(sol: &dyn SolutionView, axis: usize, component: usize, t: f64) -> Result<f64> {
    Ok(sol.sample(line_point(sol.dims(), axis, t))?.1.u[component])
}

/// `n_samples` uniformly spaced values of velocity `component` along the
/// center line parallel to `axis` of the unit box.
pub fn centerline_profile(sol: &dyn SolutionView, axis: usize, component: usize, n_samples: usize) -> Result<Profile> {
    let dims = sol.dims();
    if axis >= dims || component >= dims {
        return Err(Error::InvalidInput(format!("axis {axis} or component {component} out of range for {dims}D")));
    }
    if n_samples < 2 {
        return Err(Error::InvalidInput("a profile needs at least two samples".into()));
    }
    let coords: Vec<f64> = (0..n_samples).map(|i| i as f64 / (n_samples - 1) as f64).collect();
    let values = coords.iter().map(|&t| velocity_on_line(sol, axis, component, t)).collect::<Result<_>>()?;
    Ok(Profile { axis, component, coords, values })
}

/// Standard cavity profiles: `u_x` along the vertical line `x = 0.5` and
/// `u_y` along the horizontal line `y = 0.5` (in 3D on the mid-plane `z = 0.5`).
pub fn centerline_profiles(sol: &dyn SolutionView, n_samples: usize) -> Result<Vec<Profile>> {
    Ok(vec![centerline_profile(sol, 1, 0, n_samples)?, centerline_profile(sol, 0, 1, n_samples)?])
}

/// Minimizer of `f` on `[a, b]` by golden-section search to coordinate tolerance `tol`.
pub fn golden_section_min(mut f: impl FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

const EXTREMA_SAMPLES: usize = 4096;

/// Extremum of a function on `[0, 1]`: dense sampling, then golden-section
/// refinement on the bracketing samples. `sign = 1` finds a minimum, `-1` a maximum.
fn line_extremum(f: &dyn Fn(f64) -> Result<f64>, sign: f64) -> Result<(f64, f64)> {
    let n = EXTREMA_SAMPLES;
    let mut best = (0, f64::INFINITY);
    for i in 0..n {
        let v = sign * f(i as f64 / (n - 1) as f64)?;
        if v < best.1 {
            best = (i, v);
        }
    }
    let lo = best.0.saturating_sub(1) as f64 / (n - 1) as f64;
    let hi = (best.0 + 1).min(n - 1) as f64 / (n - 1) as f64;
    let (x, v) = golden_section_min(|t| Ok(sign * f(t)?), lo, hi, 1e-10)?;
    let (x, v) = if v <= best.1 { (x, v) } else { (best.0 as f64 / (n - 1) as f64, best.1) };
    Ok((x, sign * v))
}

/// Centerline velocity extrema of a 2D cavity solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityExtrema {
    /// Minimum of `u_x` on `x = 0.5` and its `y` location.
    pub ux_min: f64,
    pub ux_min_at: f64,
    /// Maximum of `u_y` on `y = 0.5` and its `x` location.
    pub uy_max: f64,
    pub uy_max_at: f64,
    /// Minimum of `u_y` on `y = 0.5` and its `x` location.
    pub uy_min: f64,
    pub uy_min_at: f64,
}

/// Centerline velocity extrema of a 2D solution on the unit square.
pub fn velocity_extrema(sol: &dyn SolutionView) -> Result<VelocityExtrema> {
    if sol.dims() != 2 {
        return Err(Error::InvalidInput("velocity extrema are defined for 2D solutions".into()));
    }
    let vertical = |t: f64| velocity_on_line(sol, 1, 0, t);
    let horizontal = |t: f64| velocity_on_line(sol, 0, 1, t);
    let (a, ux_min) = line_extremum(&vertical, 1.0)?;
    let (b, uy_max) = line_extremum(&horizontal, -1.0)?;
    let (c, uy_min) = line_extremum(&horizontal, 1.0)?;
    Ok(VelocityExtrema { ux_min, ux_min_at: a, uy_max, uy_max_at: b, uy_min, uy_min_at: c })
}

/// Maximum of the physical `|∇·u|` and of `|u|` over quasi-random parametric points.
pub fn sampled_divergence_and_speed(sol: &dyn SolutionView, n_samples: usize) -> Result<(f64, f64)> {
    let dims = sol.dims();
    let mut div = 0.0f64;
    let mut speed = 0.0f64;
    for p in crate::kernels::halton_points(n_samples, dims) {
        let (_, s) = sol.sample(p)?;
        div = div.max((0..dims).map(|c| s.grad_u[c][c]).sum::<f64>().abs());
        speed = speed.max(s.u[..dims].iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok((div, speed))
}

/// Integration path for the streamfunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StreamPath {
    /// `ψ(x, y) = ∫₀^y u_x(x, t) dt`.
    #[default]
    Vertical,
    /// `ψ(x, y) = ∫₀^y u_x(0, t) dt − ∫₀^x u_y(s, y) ds`.
    Horizontal,
}

/// `∫_0^to g(t) dt` with a Gauss rule on every span of `breaks` (clipped at `to`).
fn integrate_to(breaks: &[f64], order: usize, to: f64, mut g: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b < to).collect();
    cuts.push(to);
    let (nodes, weights) = span_rule(&cuts, order)?;
    let mut sum = 0.0;
    for (t, w) in nodes.iter().zip(&weights) {
        sum += w * g(*t)?;
    }
    Ok(sum)
}

/// Streamfunction of a 2D solenoidal solution at parametric points, with
/// `ψ = 0` on the bottom wall. Integrates the parametric velocity span by
/// span, so the result is exact up to rounding for spline fields.
pub fn streamfunction(sol: &dyn SolutionView, points: &[[f64; 2]], path: StreamPath) -> Result<Vec<f64>> {
    if sol.dims() != 2 {
        return Err(Error::InvalidInput("the streamfunction is defined for 2D solutions".into()));
    }
    let breaks = sol.breakpoints();
    let order = sol.kprime() + 2;
    let u = |x: f64, y: f64, c: usize| Ok(sol.parametric_velocity([x, y, 0.0])?[c]);
    points
        .iter()
        .map(|&[x, y]| match path {
            StreamPath::Vertical => integrate_to(&breaks[1], order, y, |t| u(x, t, 0)),
            StreamPath::Horizontal => {
                let left = integrate_to(&breaks[1], order, y, |t| u(breaks[0][0], t, 0))?;
                Ok(left - integrate_to(&breaks[0], order, x, |s| u(s, y, 1))?)
            }
        })
        .collect()
}

/// One reference sample of a centerline profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub coord: f64,
    pub value: f64,
    pub re: f64,
    /// `u` (x-velocity on the vertical centerline) or `v` (y-velocity on the horizontal centerline).
    pub component: String,
    pub source: String,
}

/// Reference centerline profiles.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceTable {
    pub rows: Vec<ReferenceRow>,
}

impl ReferenceTable {
    /// `(coord, value)` pairs of one component at one Reynolds number.
    pub fn component(&self, re: f64, component: &str) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.re == re && r.component == component).map(|r| (r.coord, r.value)).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

const REFERENCE_HEADER: [&str; 5] = ["coord", "value", "re", "component", "source"];

/// Parses a reference table. Lines starting with `#` are comments.
pub fn parse_reference_profiles(reader: impl Read) -> Result<ReferenceTable> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| malformed(&e, 1))?.clone();
    if header.iter().collect::<Vec<_>>() != REFERENCE_HEADER {
        let line = header.position().map_or(1, |p| p.line() as usize);
        return Err(Error::MalformedData { line, message: format!("expected header {}", REFERENCE_HEADER.join(",")) });
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<ReferenceRow>() {
        rows.push(rec.map_err(|e| malformed(&e, 0))?);
    }
    if rows.is_empty() {
        return Err(Error::MalformedData { line: 2, message: "no data rows".into() });
    }
    Ok(ReferenceTable { rows })
}

fn malformed(e: &csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    Error::MalformedData { line, message: e.to_string() }
}

/// Loads a reference table from a CSV file.
pub fn load_reference_profiles(path: impl AsRef<Path>) -> Result<ReferenceTable> {
    parse_reference_profiles(std::fs::File::open(path)?)
}

/// Writes a reference table as CSV.
pub fn write_reference_profiles(table: &ReferenceTable, writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(writer);
    for r in &table.rows {
        w.serialize(r).map_err(|e| malformed(&e, 0))?;
    }
    if table.rows.is_empty() {
        w.write_record(REFERENCE_HEADER).map_err(|e| malformed(&e, 0))?;
    }
    w.flush()?;
    Ok(())
}

const GHIA_100: &str = include_str!("../data/ghia_re100.csv");
const GHIA_400: &str = include_str!("../data/ghia_re400.csv");
const GHIA_1000: &str = include_str!("../data/ghia_re1000.csv");

/// Bundled Ghia-Ghia-Shin centerline data for `re` in {100, 400, 1000}.
pub fn ghia_reference(re: u32) -> Result<ReferenceTable> {
    let text = match re {
        100 => GHIA_100,
        400 => GHIA_400,
        1000 => GHIA_1000,
        _ => return Err(Error::InvalidInput(format!("no bundled reference data for Re = {re}"))),
    };
    parse_reference_profiles(text.as_bytes())
}

/// Root-mean-square deviation of the solution's `u` and `v` centerline
/// profiles from the reference samples at Reynolds number `re`.
pub fn profile_rms(sol: &dyn SolutionView, table: &ReferenceTable, re: f64) -> Result<(f64, f64)> {
    let rms = |axis: usize, comp: usize, name: &str| -> Result<f64> {
        let pts = table.component(re, name);
        if pts.is_empty() {
            return Err(Error::InvalidInput(format!("reference has no '{name}' samples at Re = {re}")));
        }
        let mut s = 0.0;
        for (t, v) in &pts {
            s += (velocity_on_line(sol, axis, comp, *t)? - v).powi(2);
        }
        Ok((s / pts.len() as f64).sqrt())
    };
    Ok((rms(1, 0, "u")?, rms(0, 1, "v")?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_quartered_error_is_two() {
        assert!((observed_rate(1e-2, 2.5e-3, 0.5, 0.25).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(observed_rate(0.0, 0.0, 0.5, 0.25), None);
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, v) = golden_section_min(|t| Ok((t - 0.3).powi(2) - 1.0), 0.0, 1.0, 1e-10).unwrap();
        assert!((x - 0.3).abs() < 1e-8 && (v + 1.0).abs() < 1e-14);
    }

    #[test]
    fn bundled_tables_parse() {
        for re in [100, 400, 1000] {
            let t = ghia_reference(re).unwrap();
            assert_eq!(t.component(re as f64, "u").len(), 17);
            assert_eq!(t.component(re as f64, "v").len(), 17);
        }
    }
}
