//! Error norms, convergence rates and study orchestration.

pub mod problems;
mod report;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Vec2};
use crate::ipdg::{build_system, AssemblyOptions, DgSystem, EdgeKind, EllipticProblem};
use crate::mesh::quadrature::segment_rule;
use crate::mesh::{cell_quadrature, subtriangulate, validate_regularity, PolyMesh, RegularityReport, SubTriangulation, DEFAULT_SIGMA_THRESHOLD};
use crate::recon::{GlobalRecon, PatchOptions};
use crate::solve::{direct_solve, Solution};
use crate::{Error, Result};

pub use problems::{builtin_problem, custom_problem, polynomial_problem, BoundaryKind, CustomSpec, BUILTIN_NAMES};
pub use report::{write_study_csv, write_svg_plot, PlotNorm};

/// Which boundary edges carry a jump term in the energy norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyBoundary {
    /// Only edges with a Dirichlet condition, where the trace is prescribed.
    #[default]
    DirichletOnly,
    All,
    None,
}

/// `‖f‖_{L²(Ω)}` with `f` evaluated cell by cell.
pub fn l2_norm(mesh: &PolyMesh, sub: &SubTriangulation, degree: usize, f: impl Fn(usize, &Point) -> f64 + Sync) -> f64 {
    let parts: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| cell_quadrature(sub, c, degree).iter().map(|(p, w)| w * f(c, p).powi(2)).sum())
        .collect();
    parts.iter().sum::<f64>().sqrt()
}

/// Broken energy norm `(Σ_K ‖∇v‖²_K + Σ_e |e|⁻¹ ‖[v]‖²_e)^½`.
///
/// Interior edges always contribute; a boundary edge contributes `|e|⁻¹ ‖v‖²_e`
/// when `boundary(e)` holds.
pub fn energy_norm(
    mesh: &PolyMesh,
    sub: &SubTriangulation,
    degree: usize,
    value: impl Fn(usize, &Point) -> f64 + Sync,
    grad: impl Fn(usize, &Point) -> Vec2 + Sync,
    boundary: impl Fn(usize) -> bool + Sync,
) -> f64 {
    let cells: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| cell_quadrature(sub, c, degree).iter().map(|(p, w)| w * grad(c, p).norm_squared()).sum())
        .collect();
    let npts = degree / 2 + 1;
    let edges: Vec<f64> = (0..mesh.num_edges())
        .into_par_iter()
        .map(|e| {
            let edge = mesh.edge(e);
            if edge.is_boundary() && !boundary(e) {
                return 0.0;
            }
            let (a, b) = mesh.edge_endpoints(e);
            let s: f64 = segment_rule(&a, &b, npts)
                .iter()
                .map(|(p, w)| {
                    let jump = value(edge.left, p) - edge.right.map_or(0.0, |r| value(r, p));
                    w * jump * jump
                })
                .sum();
            s / mesh.edge_length(e)
        })
        .collect();
    (cells.iter().sum::<f64>() + edges.iter().sum::<f64>()).sqrt()
}

/// Domain average of `g`.
pub fn mean_value(mesh: &PolyMesh, sub: &SubTriangulation, degree: usize, g: impl Fn(&Point) -> f64 + Sync) -> f64 {
    let parts: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| cell_quadrature(sub, c, degree).integrate(&g))
        .collect();
    parts.iter().sum::<f64>() / mesh.total_area()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub m: usize,
    /// max h_K
    pub h: f64,
    /// Number of unknowns, i.e. cells.
    pub n: usize,
    pub l2_error: f64,
    pub energy_error: f64,
}

/// `‖u - R u_h‖` in L² and the energy norm.
///
/// For pure Neumann problems the discrete solution has zero mean, so the exact
/// solution is shifted by its own mean before comparing.
pub fn compute_errors(
    mesh: &PolyMesh,
    sub: &SubTriangulation,
    recon: &GlobalRecon,
    system: &DgSystem,
    solution: &Solution,
    problem: &EllipticProblem,
    energy_boundary: EnergyBoundary,
) -> Result<ErrorReport> {
    let (Some(u), Some(grad)) = (problem.exact.as_ref(), problem.exact_gradient.as_ref()) else {
        return Err(Error::Config(format!("problem '{}' has no exact solution", problem.name)));
    };
    let x = &solution.dof_values;
    if x.len() != mesh.num_cells() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_cells(),
            got: x.len(),
        });
    }
    let degree = 2 * recon.m + 4;
    let shift = if system.pure_neumann { mean_value(mesh, sub, degree, |p| u(p)) } else { 0.0 };
    let err = |c: usize, p: &Point| u(p) - shift - recon.eval(c, x, p);
    let l2 = l2_norm(mesh, sub, degree, err);
    let energy = energy_norm(
        mesh,
        sub,
        degree,
        err,
        |c, p| grad(p) - recon.gradient(c, x, p),
        |e| match energy_boundary {
            EnergyBoundary::DirichletOnly => system.edge_kinds[e] == EdgeKind::Dirichlet,
            EnergyBoundary::All => true,
            EnergyBoundary::None => false,
        },
    );
    Ok(ErrorReport {
        m: recon.m,
        h: mesh.h(),
        n: mesh.num_cells(),
        l2_error: l2,
        energy_error: energy,
    })
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub patch: PatchOptions,
    pub assembly: AssemblyOptions,
    pub energy_boundary: EnergyBoundary,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Timings {
    pub reconstruction: f64,
    pub assembly: f64,
    pub solve: f64,
}

pub struct PipelineOutput {
    pub sub: SubTriangulation,
    pub regularity: RegularityReport,
    pub recon: GlobalRecon,
    pub system: DgSystem,
    pub solution: Solution,
    /// Present when the problem has an exact solution.
    pub errors: Option<ErrorReport>,
    pub timings: Timings,
}

/// Reconstruction, assembly, solve and (if possible) error evaluation.
pub fn solve_problem(mesh: &PolyMesh, problem: &EllipticProblem, m: usize, opts: &SolveOptions) -> Result<PipelineOutput> {
    let sub = subtriangulate(mesh)?;
    let regularity = validate_regularity(mesh, &sub, DEFAULT_SIGMA_THRESHOLD);
    for w in &regularity.warnings {
        log::warn!("{w}");
    }
    let t = Instant::now();
    let recon = GlobalRecon::build(mesh, m, &opts.patch)?;
    let reconstruction = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let system = build_system(mesh, &sub, &recon, problem, &opts.assembly)?;
    let assembly = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let solution = direct_solve(&system)?;
    let solve = t.elapsed().as_secs_f64();
    let errors = if problem.exact.is_some() {
        Some(compute_errors(mesh, &sub, &recon, &system, &solution, problem, opts.energy_boundary)?)
    } else {
        None
    };
    log::info!(
        "{} m={m} N={}: recon {reconstruction:.2}s, assembly {assembly:.2}s, solve {solve:.2}s",
        problem.name,
        mesh.num_cells()
    );
    Ok(PipelineOutput {
        sub,
        regularity,
        recon,
        system,
        solution,
        errors,
        timings: Timings {
            reconstruction,
            assembly,
            solve,
        },
    })
}

/// Refinement parameter against which rates are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateAxis {
    /// max h_K, for structured families.
    #[default]
    MeshSize,
    /// `N^{-1/2}` with N the number of cells, for unstructured families.
    Dofs,
}

impl RateAxis {
    pub fn abscissa(self, r: &ErrorReport) -> f64 {
        match self {
            RateAxis::MeshSize => r.h,
            RateAxis::Dofs => (r.n as f64).powf(-0.5),
        }
    }

    /// The value written in the `h_or_N` column.
    pub fn label_value(self, r: &ErrorReport) -> f64 {
        match self {
            RateAxis::MeshSize => r.h,
            RateAxis::Dofs => r.n as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    /// Rate between the two finest levels.
    pub l2_tail: f64,
    pub energy_tail: f64,
    /// Least-squares slope of log error against log abscissa.
    pub l2_slope: f64,
    pub energy_slope: f64,
    /// Errors decrease strictly along the sequence.
    pub monotone: bool,
}

/// Rate between consecutive entries; `None` for the first.
pub fn pairwise_rates(x: &[f64], e: &[f64]) -> Vec<Option<f64>> {
    (0..x.len())
        .map(|i| (i > 0).then(|| (e[i - 1] / e[i]).ln() / (x[i - 1] / x[i]).ln()))
        .collect()
}

fn ls_slope(x: &[f64], e: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let le: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, me) = (lx.iter().sum::<f64>() / n, le.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&le).map(|(a, b)| (a - mx) * (b - me)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Rates for reports ordered from coarse to fine.
pub fn fit_rates(reports: &[ErrorReport], axis: RateAxis) -> Result<Rates> {
    if reports.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 refinement levels, got {}",
            reports.len()
        )));
    }
    let x: Vec<f64> = reports.iter().map(|r| axis.abscissa(r)).collect();
    if x.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InsufficientData("refinement parameter must strictly decrease".into()));
    }
    let l2: Vec<f64> = reports.iter().map(|r| r.l2_error).collect();
    let en: Vec<f64> = reports.iter().map(|r| r.energy_error).collect();
    let tail = |e: &[f64]| pairwise_rates(&x, e).last().copied().flatten().unwrap_or(f64::NAN);
    let monotone = l2.windows(2).all(|w| w[1] < w[0]) && en.windows(2).all(|w| w[1] < w[0]);
    if !monotone {
        log::warn!("error sequence is not monotonically decreasing");
    }
    Ok(Rates {
        l2_tail: tail(&l2),
        energy_tail: tail(&en),
        l2_slope: ls_slope(&x, &l2),
        energy_slope: ls_slope(&x, &en),
        monotone,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub m: usize,
    pub axis: RateAxis,
    /// Coarse to fine.
    pub reports: Vec<ErrorReport>,
    pub rates: Option<Rates>,
}

impl ConvergenceStudy {
    pub fn from_reports(m: usize, axis: RateAxis, mut reports: Vec<ErrorReport>) -> Self {
        reports.sort_by(|a, b| axis.abscissa(b).total_cmp(&axis.abscissa(a)));
        let rates = match fit_rates(&reports, axis) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("m={m}: no rates: {e}");
                None
            }
        };
        ConvergenceStudy { m, axis, reports, rates }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyFailure {
    pub mesh_index: usize,
    pub m: usize,
    pub message: String,
    pub numerical: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub problem: String,
    pub studies: Vec<ConvergenceStudy>,
    pub failures: Vec<StudyFailure>,
}

/// Solves `problem` on every mesh for every order. Failed runs are recorded and
/// skipped; rates are fitted from whatever succeeded.
pub fn run_study(
    problem: &EllipticProblem,
    meshes: &[PolyMesh],
    orders: &[usize],
    opts: &SolveOptions,
    axis: RateAxis,
) -> StudyResult {
    let mut studies = Vec::new();
    let mut failures = Vec::new();
    for &m in orders {
        let mut reports = Vec::new();
        for (i, mesh) in meshes.iter().enumerate() {
            match solve_problem(mesh, problem, m, opts).and_then(|out| {
                out.errors
                    .ok_or_else(|| Error::Config(format!("problem '{}' has no exact solution", problem.name)))
            }) {
                Ok(r) => reports.push(r),
                Err(e) => {
                    log::error!("m={m} mesh {i}: {e}");
                    failures.push(StudyFailure {
                        mesh_index: i,
                        m,
                        message: e.to_string(),
                        numerical: e.is_numerical(),
                    });
                }
            }
        }
        studies.push(ConvergenceStudy::from_reports(m, axis, reports));
    }
    StudyResult {
        problem: problem.name.clone(),
        studies,
        failures,
    }
}
