//! Case construction, solving and post-processing.

use divcol::analytic::{filament_3d, vortex_2d, ManufacturedCase};
use divcol::cases::{breakpoints, cavity_2d, cavity_3d, solve_with_continuation_2d, solve_with_continuation_3d};
use divcol::colloc2d::{self, DiscreteSolution2D};
use divcol::colloc3d::{self, DiscreteSolution3D};
use divcol::mapped::{self, couette_case_on, wavy_cavity_case, CouetteExact, MappedSolution};
use divcol::solver::SolveReport;
use divcol::spaces::{build_complex_2d, build_complex_3d};
use divcol::verify::{
    convergence_rates, error_norms, ghia_reference, profile_rms, sampled_divergence_and_speed, streamfunction,
    velocity_extrema, ConvergenceRates, ErrorReport, SolutionView, StreamPath, VelocityExtrema,
};
use serde::Serialize;

use crate::config::{CaseKind, RunConfig, Study};

pub const SCHEMA_VERSION: u32 = 1;

const DIVERGENCE_SAMPLES: usize = 1000;

/// Newton statistics of one continuation stage.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub re: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub max_backward_error: f64,
}

impl StageRecord {
    fn new(re: Option<f64>, r: &SolveReport) -> Self {
        Self {
            re,
            iterations: r.iterations,
            converged: r.converged,
            residual_history: r.residual_history.clone(),
            max_backward_error: r.max_backward_error(),
        }
    }
}

/// Results of one solve.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub mesh: usize,
    pub h: f64,
    pub nu: f64,
    pub sigma: f64,
    pub unknowns: usize,
    pub newton: Vec<StageRecord>,
    pub divergence_max: f64,
    pub speed_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors: Option<ErrorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extrema: Option<VelocityExtrema>,
    /// RMS deviation of the `u` and `v` centerline profiles from the bundled reference.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_rms: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_const_error: Option<f64>,
    /// `max |u_y(0.5, y)| / max |u|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetry_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Robustness {
    pub parameter: &'static str,
    pub values: Vec<f64>,
    pub velocity_l2: Vec<f64>,
    pub non_decreasing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub timestamp: u64,
    pub case: CaseKind,
    pub penalty_constant: f64,
    pub config: RunConfig,
    pub runs: Vec<RunRecord>,
    pub divergence_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<ConvergenceRates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robustness: Option<Robustness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_const_error: Option<f64>,
}

/// Row of `profiles.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileRow {
    pub axis: usize,
    pub component: usize,
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub value: f64,
}

/// Row of `field_samples.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u_x: f64,
    pub u_y: f64,
    pub u_z: f64,
    pub p: f64,
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
    pub psi: Option<f64>,
}

/// Everything written by one invocation.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub profiles: Vec<ProfileRow>,
    pub fields: Vec<FieldRow>,
}

/// One entry of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Variant {
    mesh: usize,
    nu: f64,
    sigma: f64,
}

enum Solved {
    Plane(DiscreteSolution2D),
    Solid(DiscreteSolution3D),
    Mapped(MappedSolution),
}

impl Solved {
    fn view(&self) -> &dyn SolutionView {
        match self {
            Solved::Plane(s) => s,
            Solved::Solid(s) => s,
            Solved::Mapped(s) => s,
        }
    }
}

fn variants(cfg: &RunConfig) -> Vec<Variant> {
    let base = Variant { mesh: cfg.mesh, nu: cfg.nu, sigma: cfg.sigma };
    match &cfg.study {
        None => vec![base],
        Some(Study::Convergence(m)) => m.iter().map(|&mesh| Variant { mesh, ..base }).collect(),
        Some(Study::Sigma(v)) => v.iter().map(|&sigma| Variant { sigma, ..base }).collect(),
        Some(Study::Reynolds(v)) => v.iter().map(|&re| Variant { nu: 1.0 / re, ..base }).collect(),
    }
}

fn stages(reports: &[(f64, SolveReport)]) -> Vec<StageRecord> {
    reports.iter().map(|(re, r)| StageRecord::new(Some(*re), r)).collect()
}

fn manufactured(cfg: &RunConfig, v: Variant) -> ManufacturedCase {
    match cfg.case {
        CaseKind::Vortex3d => filament_3d(v.nu),
        _ => vortex_2d(v.nu, v.sigma),
    }
}

fn solve_variant(cfg: &RunConfig, v: Variant) -> divcol::Result<(RunRecord, Solved, Option<CouetteExact>)> {
    let b = breakpoints(v.mesh, cfg.stretched)?;
    let newton = cfg.newton();
    let mut exact_couette = None;
    let (solved, unknowns, newton_records) = match cfg.case {
        CaseKind::Vortex2d | CaseKind::Cavity2d => {
            let case = if cfg.case == CaseKind::Vortex2d {
                manufactured(cfg, v).case_2d_with(cfg.formulation, build_complex_2d(cfg.kprime, &b, &b)?, cfg.stokes)
            } else {
                cavity_2d(cfg.formulation, cfg.kprime, v.mesh, cfg.stretched, 1.0 / v.nu)?.stokes(cfg.stokes)
            }
            .with_penalty(cfg.penalty);
            let unknowns = colloc2d::build_dof_map(&case)?.num_unknowns();
            let (sol, reports) = solve_with_continuation_2d(&case, &newton)?;
            (Solved::Plane(sol), unknowns, stages(&reports))
        }
        CaseKind::Vortex3d | CaseKind::Cavity3d => {
            let case = if cfg.case == CaseKind::Vortex3d {
                manufactured(cfg, v).case_3d_with(cfg.formulation, build_complex_3d(cfg.kprime, [&b, &b, &b])?, cfg.stokes)
            } else {
                cavity_3d(cfg.formulation, cfg.kprime, v.mesh, cfg.stretched, 1.0 / v.nu)?.stokes(cfg.stokes)
            }
            .with_penalty(cfg.penalty);
            let unknowns = colloc3d::build_dof_map_3d(&case)?.num_unknowns();
            let (sol, reports) = solve_with_continuation_3d(&case, &newton)?;
            (Solved::Solid(sol), unknowns, stages(&reports))
        }
        CaseKind::Couette | CaseKind::Wavy => {
            let spaces = build_complex_2d(cfg.kprime, &b, &b)?;
            let case = if cfg.case == CaseKind::Couette {
                let (case, exact) = couette_case_on(cfg.geometry, cfg.wall_speed, spaces)?;
                exact_couette = Some(exact);
                case
            } else {
                let divcol::mapped::GeometryMap2D::Wavy { a, b, c } = cfg.geometry else {
                    return Err(divcol::Error::InvalidGeometry("wavy case without a wavy map".into()));
                };
                wavy_cavity_case(a, b, c, spaces, v.nu)?
            }
            .with_penalty(cfg.penalty);
            let unknowns = mapped::build_dof_map_mapped(&case)?.num_unknowns();
            let (sol, report) = mapped::solve_mapped(&case, &newton)?;
            (Solved::Mapped(sol), unknowns, vec![StageRecord::new(None, &report)])
        }
    };
    let view = solved.view();
    let (divergence_max, speed_max) = sampled_divergence_and_speed(view, DIVERGENCE_SAMPLES)?;
    let errors = match cfg.case {
        CaseKind::Vortex2d | CaseKind::Vortex3d => Some(error_norms(view, &manufactured(cfg, v))?),
        CaseKind::Couette => {
            let e = exact_couette.expect("couette exact solution");
            Some(error_norms(view, &move |x: [f64; 3]| e.sample(x))?)
        }
        _ => None,
    };
    let extrema = if cfg.case == CaseKind::Cavity2d { Some(velocity_extrema(view)?) } else { None };
    let re = 1.0 / v.nu;
    let reference_rms = match (cfg.case, [100u32, 400, 1000].into_iter().find(|r| (*r as f64 - re).abs() < 1e-9 * re)) {
        (CaseKind::Cavity2d, Some(r)) if !cfg.stokes => {
            let (a, b) = profile_rms(view, &ghia_reference(r)?, r as f64)?;
            Some([a, b])
        }
        _ => None,
    };
    let grid = grid_points(cfg.samples, view.dims());
    let omega_const_error = match exact_couette {
        Some(e) => {
            let mut m = 0.0f64;
            for p in &grid {
                m = m.max((view.sample(*p)?.1.w[0] - e.vorticity()).abs());
            }
            Some(m)
        }
        None => None,
    };
    let symmetry_error = if cfg.case == CaseKind::Wavy {
        let mut umax = 0.0f64;
        for p in &grid {
            let u = view.sample(*p)?.1.u;
            umax = umax.max(u[0].hypot(u[1]));
        }
        let mut mid = 0.0f64;
        for i in 0..cfg.profile_samples {
            let t = i as f64 / (cfg.profile_samples - 1) as f64;
            mid = mid.max(view.sample([0.5, t, 0.0])?.1.u[1].abs());
        }
        Some(if umax > 0.0 { mid / umax } else { 0.0 })
    } else {
        None
    };
    let h = view.mesh_size();
    let record = RunRecord {
        mesh: v.mesh,
        h,
        nu: v.nu,
        sigma: v.sigma,
        unknowns,
        newton: newton_records,
        divergence_max,
        speed_max,
        errors,
        extrema,
        reference_rms,
        omega_const_error,
        symmetry_error,
    };
    Ok((record, solved, exact_couette))
}

/// Uniform parametric grid, on the mid-plane `z = 0.5` in 3D.
fn grid_points(n: usize, dims: usize) -> Vec<[f64; 3]> {
    let mut pts = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let z = if dims == 3 { 0.5 } else { 0.0 };
            pts.push([i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64, z]);
        }
    }
    pts
}

fn profiles(view: &dyn SolutionView, n: usize) -> divcol::Result<Vec<ProfileRow>> {
    let dims = view.dims();
    let mut rows = Vec::new();
    for (axis, component) in [(1, 0), (0, 1)] {
        for i in 0..n {
            let s = i as f64 / (n - 1) as f64;
            let mut p = [0.5, 0.5, if dims == 3 { 0.5 } else { 0.0 }];
            p[axis] = s;
            let (m, v) = view.sample(p)?;
            rows.push(ProfileRow { axis, component, s, x: m.x[0], y: m.x[1], z: m.x[2], value: v.u[component] });
        }
    }
    Ok(rows)
}

fn fields(view: &dyn SolutionView, n: usize) -> divcol::Result<Vec<FieldRow>> {
    let dims = view.dims();
    let pts = grid_points(n, dims);
    let psi = if dims == 2 {
        let p2: Vec<[f64; 2]> = pts.iter().map(|p| [p[0], p[1]]).collect();
        Some(streamfunction(view, &p2, StreamPath::Vertical)?)
    } else {
        None
    };
    pts.iter()
        .enumerate()
        .map(|(i, p)| {
            let (m, s) = view.sample(*p)?;
            let w = if dims == 2 { [0.0, 0.0, s.w[0]] } else { s.w };
            Ok(FieldRow {
                x: m.x[0],
                y: m.x[1],
                z: m.x[2],
                u_x: s.u[0],
                u_y: s.u[1],
                u_z: s.u[2],
                p: s.p,
                omega_x: w[0],
                omega_y: w[1],
                omega_z: w[2],
                psi: psi.as_ref().map(|v| v[i]),
            })
        })
        .collect()
}

/// Runs every variant of the configuration on a pool of `workers` threads.
pub fn run(cfg: &RunConfig, workers: usize) -> divcol::Result<Outcome> {
    use rayon::prelude::*;
    let vs = variants(cfg);
    let last = vs.len() - 1;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| divcol::Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let results: Vec<divcol::Result<(RunRecord, Option<Solved>)>> = pool.install(|| {
        vs.par_iter()
            .enumerate()
            .map(|(i, v)| solve_variant(cfg, *v).map(|(r, s, _)| (r, (i == last).then_some(s))))
            .collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    let mut finest = None;
    for r in results {
        let (rec, sol) = r?;
        runs.push(rec);
        if sol.is_some() {
            finest = sol;
        }
    }
    let finest = finest.expect("last variant solution");
    let view = finest.view();
    let rates = match cfg.study {
        Some(Study::Convergence(_)) => {
            let reps: Vec<ErrorReport> = runs.iter().filter_map(|r| r.errors).collect();
            Some(convergence_rates(&reps)?)
        }
        _ => None,
    };
    let robustness = match &cfg.study {
        Some(Study::Sigma(v)) | Some(Study::Reynolds(v)) => {
            let velocity_l2: Vec<f64> = runs.iter().filter_map(|r| r.errors.map(|e| e.velocity.l2)).collect();
            let non_decreasing = velocity_l2.windows(2).all(|w| w[1] >= w[0]);
            let parameter = if matches!(cfg.study, Some(Study::Sigma(_))) { "sigma" } else { "re" };
            Some(Robustness { parameter, values: v.clone(), velocity_l2, non_decreasing })
        }
        _ => None,
    };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        timestamp: std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        case: cfg.case,
        penalty_constant: cfg.penalty,
        config: cfg.clone(),
        divergence_max: runs.iter().map(|r| r.divergence_max).fold(0.0, f64::max),
        omega_const_error: runs.last().and_then(|r| r.omega_const_error),
        runs,
        rates,
        robustness,
    };
    Ok(Outcome { report, profiles: profiles(view, cfg.profile_samples)?, fields: fields(view, cfg.samples)? })
}
