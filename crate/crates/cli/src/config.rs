//! Flag validation. Everything here runs before any reconstruction or solve.

use std::path::{Path, PathBuf};

use patchdg::analyze::{builtin_problem, custom_problem, EnergyBoundary, RateAxis, SolveOptions, BUILTIN_NAMES};
use patchdg::mesh::{builtin_mesh, load_mesh};
use patchdg::recon::{DepthChoice, PatchOptions, Perturbation};
use patchdg::{AssemblyOptions, EllipticProblem, LoadOptions, NeighborRule, PolyMesh};
use serde::Serialize;

use crate::args::{MethodArgs, PatchArgs, MAX_ORDER};
use crate::CliError;

/// Largest quadrature setting accepted on the command line.
const MAX_QUADRATURE: usize = 60;

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn check_order(m: usize) -> Result<usize, CliError> {
    if (1..=MAX_ORDER).contains(&m) {
        Ok(m)
    } else {
        Err(config_err(format!("order: {m} is outside the supported range 1..={MAX_ORDER}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshInfo {
    pub source: String,
    pub cells: usize,
    pub edges: usize,
    pub h: f64,
}

/// Loads `builtin:SPEC` or a mesh file.
pub fn load_mesh_arg(arg: &str) -> Result<(PolyMesh, MeshInfo), CliError> {
    let mesh = if let Some(spec) = arg.strip_prefix("builtin:") {
        builtin_mesh(spec).map_err(|e| config_err(format!("mesh: {e}")))?
    } else {
        let path = Path::new(arg);
        if !path.is_file() {
            return Err(config_err(format!("mesh: file not found: {arg}")));
        }
        load_mesh(path, LoadOptions::default()).map_err(|e| config_err(format!("mesh: {arg}: {e}")))?
    };
    let info = MeshInfo {
        source: arg.to_string(),
        cells: mesh.num_cells(),
        edges: mesh.num_edges(),
        h: mesh.h(),
    };
    Ok((mesh, info))
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemInfo {
    pub name: String,
    /// Path of the JSON description for custom problems.
    pub file: Option<PathBuf>,
    pub c1: f64,
    pub c2: f64,
    pub has_exact_solution: bool,
}

pub fn load_problem(arg: &str) -> Result<(EllipticProblem, ProblemInfo), CliError> {
    let (problem, file) = if BUILTIN_NAMES.contains(&arg) {
        (builtin_problem(arg).map_err(|e| config_err(format!("problem: {e}")))?, None)
    } else {
        let path = PathBuf::from(arg);
        if !path.is_file() {
            return Err(config_err(format!(
                "problem: '{arg}' is neither a built-in problem ({}) nor an existing file",
                BUILTIN_NAMES.join(", ")
            )));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| config_err(format!("problem: {arg}: {e}")))?;
        let problem = custom_problem(&text).map_err(|e| config_err(format!("problem: {arg}: {e}")))?;
        (problem, Some(path))
    };
    let info = ProblemInfo {
        name: problem.name.clone(),
        file,
        c1: problem.c1,
        c2: problem.c2,
        has_exact_solution: problem.exact.is_some(),
    };
    Ok((problem, info))
}

pub fn patch_options(a: &PatchArgs) -> Result<PatchOptions, CliError> {
    let rule: NeighborRule = a.rule.parse().map_err(|e| config_err(format!("rule: {e}")))?;
    let depth = match a.depth.parse().map_err(|e| config_err(format!("depth: {e}")))? {
        DepthChoice::Auto { .. } => {
            if !(a.safety.is_finite() && a.safety > 0.0) {
                return Err(config_err(format!("safety: {} must be a positive number", a.safety)));
            }
            DepthChoice::Auto { safety: a.safety }
        }
        fixed => fixed,
    };
    if !(0.0..1.0).contains(&a.perturb) {
        return Err(config_err(format!("perturb: {} must lie in [0, 1)", a.perturb)));
    }
    let perturbation = (a.perturb > 0.0).then_some(Perturbation {
        magnitude: a.perturb,
        seed: a.seed,
    });
    Ok(PatchOptions { rule, depth, perturbation })
}

fn check_quadrature(name: &str, v: Option<usize>) -> Result<Option<usize>, CliError> {
    match v {
        Some(n) if n == 0 || n > MAX_QUADRATURE => {
            Err(config_err(format!("{name}: {n} must lie in 1..={MAX_QUADRATURE}")))
        }
        _ => Ok(v),
    }
}

pub fn solve_options(a: &MethodArgs) -> Result<SolveOptions, CliError> {
    if !(a.penalty_k.is_finite() && a.penalty_k > 0.0) {
        return Err(config_err(format!("penalty-k: {} must be positive", a.penalty_k)));
    }
    if let Some(f) = a.interior_penalty {
        if !(f.is_finite() && f >= 3.0) {
            return Err(config_err(format!("interior-penalty: {f} must be at least 3")));
        }
    }
    let energy_boundary = match a.energy_boundary.as_str() {
        "dirichlet-only" => EnergyBoundary::DirichletOnly,
        "all" => EnergyBoundary::All,
        "none" => EnergyBoundary::None,
        other => {
            return Err(config_err(format!(
                "energy-boundary: unknown value '{other}' (expected dirichlet-only, all or none)"
            )))
        }
    };
    Ok(SolveOptions {
        patch: patch_options(&a.patch)?,
        assembly: AssemblyOptions {
            penalty_k: a.penalty_k,
            interior_factor: a.interior_penalty,
            cell_degree: check_quadrature("cell-degree", a.cell_degree)?,
            edge_points: check_quadrature("edge-points", a.edge_points)?,
        },
        energy_boundary,
    })
}

pub fn rate_axis(s: &str) -> Result<RateAxis, CliError> {
    match s {
        "h" => Ok(RateAxis::MeshSize),
        "dofs" => Ok(RateAxis::Dofs),
        other => Err(config_err(format!("axis: unknown value '{other}' (expected h or dofs)"))),
    }
}

/// Creates `dir` and checks that it accepts files.
pub fn prepare_output_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| config_err(format!("out: {}: {e}", dir.display())))?;
    if !dir.is_dir() {
        return Err(config_err(format!("out: {} is not a directory", dir.display())));
    }
    Ok(())
}

/// Quadrature actually used at order `m`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolvedQuadrature {
    pub m: usize,
    pub cell_degree: usize,
    pub edge_points: usize,
}

pub fn resolved_quadrature(opts: &AssemblyOptions, m: usize) -> ResolvedQuadrature {
    use patchdg::mesh::quadrature::{default_cell_degree, default_edge_points};
    ResolvedQuadrature {
        m,
        cell_degree: opts.cell_degree.unwrap_or_else(|| default_cell_degree(m)),
        edge_points: opts.edge_points.unwrap_or_else(|| default_edge_points(m)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch_args() -> PatchArgs {
        PatchArgs {
            rule: "von-neumann".into(),
            depth: "auto".into(),
            safety: 2.0,
            perturb: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn order_range() {
        assert!(check_order(0).is_err());
        assert_eq!(check_order(1).unwrap(), 1);
        assert_eq!(check_order(MAX_ORDER).unwrap(), MAX_ORDER);
        assert!(check_order(MAX_ORDER + 1).is_err());
    }

    #[test]
    fn patch_flags() {
        let opts = patch_options(&patch_args()).unwrap();
        assert_eq!(opts, PatchOptions::default());
        let fixed = PatchArgs {
            rule: "moore".into(),
            depth: "2".into(),
            perturb: 0.3,
            seed: 5,
            ..patch_args()
        };
        let opts = patch_options(&fixed).unwrap();
        assert_eq!(opts.rule, NeighborRule::Moore);
        assert_eq!(opts.depth, DepthChoice::Fixed(2));
        assert_eq!(opts.perturbation, Some(Perturbation { magnitude: 0.3, seed: 5 }));
        for bad in [
            PatchArgs { safety: 0.0, ..patch_args() },
            PatchArgs { perturb: 1.0, ..patch_args() },
            PatchArgs { perturb: -0.1, ..patch_args() },
            PatchArgs { depth: "deep".into(), ..patch_args() },
        ] {
            assert!(matches!(patch_options(&bad), Err(CliError::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn default_quadrature_resolution() {
        let q = resolved_quadrature(&AssemblyOptions::default(), 3);
        assert_eq!((q.cell_degree, q.edge_points), (8, 5));
        let custom = AssemblyOptions {
            cell_degree: Some(12),
            ..AssemblyOptions::default()
        };
        assert_eq!(resolved_quadrature(&custom, 3).cell_degree, 12);
    }
}
