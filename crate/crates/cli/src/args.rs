use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

pub const MAX_ORDER: usize = 6;

#[derive(Debug, Parser)]
#[command(name = "patchdg", version, about = "One-unknown-per-element DG solver for 2D elliptic problems on polygonal meshes")]
pub struct Cli {
    /// Worker threads. The default of 1 makes every run bit-for-bit reproducible.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    /// Only errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem on one mesh at one order.
    Solve(SolveArgs),
    /// Convergence study over a mesh sequence and several orders.
    Study(StudyArgs),
    /// Per-cell patch diagnostics as CSV.
    PatchReport(PatchReportArgs),
    /// Write a built-in mesh to a .poly file.
    GenerateMesh(GenerateMeshArgs),
}

/// Reconstruction settings shared by every subcommand that builds patches.
#[derive(Debug, Clone, Args)]
pub struct PatchArgs {
    /// Neighbor rule for growing patches: von-neumann (shared edge) or moore (shared vertex).
    #[arg(long, default_value = "von-neumann")]
    pub rule: String,

    /// Patch depth: `auto` or a fixed number of layers.
    #[arg(long, default_value = "auto")]
    pub depth: String,

    /// With `--depth auto`, patches hold at least ceil(safety * dim P_m) cells.
    #[arg(long, default_value_t = 2.0)]
    pub safety: f64,

    /// Move each sampling node in a random direction by this fraction of its
    /// cell's diameter, less where needed to stay inside. 0 samples at barycenters.
    #[arg(long, default_value_t = 0.0)]
    pub perturb: f64,

    /// Seed of the sampling-node perturbation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    #[command(flatten)]
    pub patch: PatchArgs,

    /// Penalty factor k: boundary edges use k m^2 c2, interior edges max(3 c2, k m^2 c2).
    #[arg(long, default_value_t = 10.0)]
    pub penalty_k: f64,

    /// Use factor * c2 as the interior-edge penalty instead (factor >= 3).
    #[arg(long)]
    pub interior_penalty: Option<f64>,

    /// Cell quadrature degree [default: 2m + 2].
    #[arg(long)]
    pub cell_degree: Option<usize>,

    /// Gauss points per edge [default: m + 2].
    #[arg(long)]
    pub edge_points: Option<usize>,

    /// Boundary edges carrying a jump term in the energy norm: dirichlet-only, all or none.
    #[arg(long, default_value = "dirichlet-only")]
    pub energy_boundary: String,

    /// Built-in problem (example1, example2, example3) or a JSON file with a
    /// polynomial solution.
    #[arg(long, default_value = "example1")]
    pub problem: String,

    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Mesh file (.msh, .poly) or `builtin:FAMILY:N[:...]`.
    #[arg(long)]
    pub mesh: String,

    /// Reconstruction order m.
    #[arg(long)]
    pub order: usize,

    /// Grid resolution of the sampled-field CSV.
    #[arg(long, default_value_t = 101)]
    pub samples: usize,

    /// Also write the system matrix (Matrix Market), edge penalties and
    /// reconstruction operators.
    #[arg(long)]
    pub diagnostics: bool,

    #[command(flatten)]
    pub method: MethodArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    /// Mesh files or built-in specs, one per refinement level.
    #[arg(long, num_args = 1.., required = true)]
    pub mesh: Vec<String>,

    /// Orders to study.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub orders: Vec<usize>,

    /// Refinement parameter for rates: h, or dofs for N^(-1/2).
    #[arg(long, default_value = "h")]
    pub axis: String,

    #[command(flatten)]
    pub method: MethodArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PatchReportArgs {
    /// Mesh file (.msh, .poly) or `builtin:FAMILY:N[:...]`.
    #[arg(long)]
    pub mesh: String,

    #[arg(long)]
    pub order: usize,

    #[command(flatten)]
    pub patch: PatchArgs,

    /// Lattice density per sub-triangle for the Lebesgue-constant estimate.
    #[arg(long, default_value_t = 6)]
    pub density: usize,

    /// Output CSV file.
    #[arg(long, default_value = "patch_report.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateMeshArgs {
    /// tri:N, quad:N, mixed:N[:jitter[:seed]] or voronoi:N[:seed[:jitter[:lloyd]]].
    pub spec: String,

    /// Output .poly file.
    #[arg(long)]
    pub out: PathBuf,
}
