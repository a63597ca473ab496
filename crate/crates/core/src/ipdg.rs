//! Symmetric interior penalty assembly on the reconstructed space.
//!
//! Row and column `i` of the system belong to cell `i`. The shape function of
//! cell `j` is the reconstruction of the unit vector `e_j`; on a cell `K` it is
//! nonzero only if `j` belongs to the patch of `K`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{Point, Vec2};
use crate::mesh::quadrature::{default_cell_degree, default_edge_points, segment_rule};
use crate::mesh::{cell_quadrature, PolyMesh, SubTriangulation};
use crate::recon::{GlobalRecon, ReconOp};
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Point) -> Vec2 + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(&Point) -> Matrix2<f64> + Send + Sync>;
/// Boundary flux `g_N(x, n)` given the outward unit normal.
pub type FluxFn = Arc<dyn Fn(&Point, &Vec2) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition {
    Dirichlet(ScalarFn),
    /// Prescribed `(A ∇u) · n`.
    Neumann(FluxFn),
}

impl BoundaryCondition {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, BoundaryCondition::Dirichlet(_))
    }
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_dirichlet() { "Dirichlet" } else { "Neumann" })
    }
}

/// `-div(A ∇u) = f` with per-marker boundary conditions.
#[derive(Clone)]
pub struct EllipticProblem {
    pub name: String,
    pub coefficient: TensorFn,
    pub source: ScalarFn,
    boundary: BTreeMap<i32, BoundaryCondition>,
    fallback: Option<BoundaryCondition>,
    /// Lower and upper ellipticity bounds of `A`.
    pub c1: f64,
    pub c2: f64,
    pub exact: Option<ScalarFn>,
    pub exact_gradient: Option<VectorFn>,
}

impl fmt::Debug for EllipticProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EllipticProblem")
            .field("name", &self.name)
            .field("boundary", &self.boundary)
            .field("fallback", &self.fallback)
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

const PROBE_POINTS: usize = 101;

/// Extreme eigenvalues of `A` over a uniform grid on the box `[lo, hi]`.
/// Fails if `A` is not symmetric or not positive definite at a probe point.
pub fn probe_ellipticity(a: &TensorFn, lo: Point, hi: Point) -> Result<(f64, f64)> {
    let (mut c1, mut c2) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 0..PROBE_POINTS {
        for i in 0..PROBE_POINTS {
            let t = |k: usize| k as f64 / (PROBE_POINTS - 1) as f64;
            let p = Point::new(lo.x + (hi.x - lo.x) * t(i), lo.y + (hi.y - lo.y) * t(j));
            let m = a(&p);
            let scale = m.abs().max().max(f64::MIN_POSITIVE);
            if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-12 * scale {
                return Err(Error::Config(format!("coefficient is not symmetric at ({}, {})", p.x, p.y)));
            }
            let (lmin, lmax) = sym_eigen(&m);
            if lmin <= 0.0 {
                return Err(Error::Config(format!(
                    "coefficient is not positive definite at ({}, {}): eigenvalue {lmin}",
                    p.x, p.y
                )));
            }
            c1 = c1.min(lmin);
            c2 = c2.max(lmax);
        }
    }
    Ok((c1, c2))
}

fn sym_eigen(m: &Matrix2<f64>) -> (f64, f64) {
    let mean = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let rad = (0.25 * (m[(0, 0)] - m[(1, 1)]).powi(2) + m[(0, 1)].powi(2)).sqrt();
    (mean - rad, mean + rad)
}

impl EllipticProblem {
    /// Problem on the unit square with ellipticity bounds probed there.
    pub fn new(name: impl Into<String>, coefficient: TensorFn, source: ScalarFn) -> Result<Self> {
        let (c1, c2) = probe_ellipticity(&coefficient, Point::new(0.0, 0.0), Point::new(1.0, 1.0))?;
        Ok(EllipticProblem {
            name: name.into(),
            coefficient,
            source,
            boundary: BTreeMap::new(),
            fallback: None,
            c1,
            c2,
            exact: None,
            exact_gradient: None,
        })
    }

    /// Re-probes the ellipticity bounds over the box `[lo, hi]`.
    pub fn probe_on(mut self, lo: Point, hi: Point) -> Result<Self> {
        (self.c1, self.c2) = probe_ellipticity(&self.coefficient, lo, hi)?;
        Ok(self)
    }

    pub fn with_ellipticity(mut self, c1: f64, c2: f64) -> Self {
        self.c1 = c1;
        self.c2 = c2;
        self
    }

    pub fn with_boundary(mut self, marker: i32, bc: BoundaryCondition) -> Self {
        self.boundary.insert(marker, bc);
        self
    }

    /// Condition for every marker without an explicit entry.
    pub fn with_default_boundary(mut self, bc: BoundaryCondition) -> Self {
        self.fallback = Some(bc);
        self
    }

    pub fn with_exact(mut self, u: ScalarFn, grad: VectorFn) -> Self {
        self.exact = Some(u);
        self.exact_gradient = Some(grad);
        self
    }

    pub fn condition(&self, marker: i32) -> Result<&BoundaryCondition> {
        self.boundary
            .get(&marker)
            .or(self.fallback.as_ref())
            .ok_or_else(|| Error::Config(format!("no boundary condition for marker {marker}")))
    }

    /// Dirichlet data from the exact solution on every boundary edge.
    pub fn dirichlet_from_exact(self) -> Self {
        let u = self.exact.clone().expect("exact solution required");
        self.with_default_boundary(BoundaryCondition::Dirichlet(u))
    }

    /// Neumann data `(A ∇u) · n` from the exact gradient on every boundary edge.
    pub fn neumann_from_exact(self) -> Self {
        let grad = self.exact_gradient.clone().expect("exact gradient required");
        let a = self.coefficient.clone();
        self.with_default_boundary(BoundaryCondition::Neumann(Arc::new(move |p, n| (a(p) * grad(p)).dot(n))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpAverage {
    pub average: f64,
    pub jump: Vec2,
}

fn check_unit(n: &Vec2) -> Result<()> {
    if (n.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!("normal ({}, {}) is not unit length", n.x, n.y)));
    }
    Ok(())
}

fn check_sides(n1: &Vec2, other: Option<&Vec2>) -> Result<()> {
    check_unit(n1)?;
    if let Some(n2) = other {
        check_unit(n2)?;
        if (n1 + n2).norm() > 1e-12 {
            return Err(Error::Config("normals of the two sides are not opposite".into()));
        }
    }
    Ok(())
}

/// Average and jump `v1 n1 + v2 n2` of a scalar trace; on boundary edges
/// (`other == None`) the jump is `v n` and the average is `v`.
pub fn jump_average(v1: f64, n1: Vec2, other: Option<(f64, Vec2)>) -> Result<JumpAverage> {
    check_sides(&n1, other.as_ref().map(|o| &o.1))?;
    Ok(match other {
        Some((v2, n2)) => JumpAverage {
            average: 0.5 * (v1 + v2),
            jump: n1 * v1 + n2 * v2,
        },
        None => JumpAverage {
            average: v1,
            jump: n1 * v1,
        },
    })
}

/// Average and scalar jump `φ1·n1 + φ2·n2` of a vector trace.
pub fn jump_average_vector(phi1: Vec2, n1: Vec2, other: Option<(Vec2, Vec2)>) -> Result<(Vec2, f64)> {
    check_sides(&n1, other.as_ref().map(|o| &o.1))?;
    Ok(match other {
        Some((phi2, n2)) => (0.5 * (phi1 + phi2), phi1.dot(&n1) + phi2.dot(&n2)),
        None => (phi1, phi1.dot(&n1)),
    })
}

/// `max(3 c2, k m² c2)` on interior edges, `k m² c2` on boundary edges.
pub fn penalty_value(boundary: bool, c2: f64, m: usize, k: f64) -> f64 {
    let scaled = k * (m * m) as f64 * c2;
    if boundary {
        scaled
    } else {
        scaled.max(3.0 * c2)
    }
}

pub fn penalty_for_edge(mesh: &PolyMesh, edge: usize, problem: &EllipticProblem, m: usize, k: f64) -> f64 {
    penalty_value(mesh.edge(edge).is_boundary(), problem.c2, m, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssemblyOptions {
    /// Penalty factor `k` in `k m² c2`.
    pub penalty_k: f64,
    /// Replaces the interior rule by `factor · c2` when set. Must be at least 3.
    pub interior_factor: Option<f64>,
    /// Cell quadrature degree; `2m + 2` when unset.
    pub cell_degree: Option<usize>,
    /// Gauss points per edge; `m + 2` when unset.
    pub edge_points: Option<usize>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            penalty_k: 10.0,
            interior_factor: None,
            cell_degree: None,
            edge_points: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Interior,
    Dirichlet,
    Neumann,
}

/// The discrete problem: one unknown per cell.
#[derive(Debug, Clone)]
pub struct DgSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub edge_kinds: Vec<EdgeKind>,
    /// Penalty used on every edge; `None` on Neumann edges, which carry no edge terms.
    pub penalties: Vec<Option<f64>>,
    /// No Dirichlet edge: the constants form the kernel.
    pub pure_neumann: bool,
    /// Area-weighted mean of each shape function over the domain.
    pub mean_weights: Vec<f64>,
}

impl DgSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn write_penalty_csv(&self, mesh: &PolyMesh, w: impl Write) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            edge: usize,
            v0: usize,
            v1: usize,
            kind: EdgeKind,
            length: f64,
            eta: Option<f64>,
        }
        let mut out = csv::Writer::from_writer(w);
        for (e, edge) in mesh.edges().iter().enumerate() {
            out.serialize(Row {
                edge: e,
                v0: edge.vertices[0],
                v1: edge.vertices[1],
                kind: self.edge_kinds[e],
                length: mesh.edge_length(e),
                eta: self.penalties[e],
            })?;
        }
        out.flush()?;
        Ok(())
    }
}

fn edge_kinds(mesh: &PolyMesh, problem: &EllipticProblem) -> Result<Vec<EdgeKind>> {
    mesh.edges()
        .iter()
        .map(|e| {
            if !e.is_boundary() {
                Ok(EdgeKind::Interior)
            } else if problem.condition(e.marker)?.is_dirichlet() {
                Ok(EdgeKind::Dirichlet)
            } else {
                Ok(EdgeKind::Neumann)
            }
        })
        .collect()
}

/// Union of two patches, with positions of the second patch's members in it.
fn union_dofs(a: &[usize], b: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut dofs = a.to_vec();
    let pos = b
        .iter()
        .map(|j| match a.iter().position(|x| x == j) {
            Some(k) => k,
            None => {
                dofs.push(*j);
                dofs.len() - 1
            }
        })
        .collect();
    (dofs, pos)
}

enum Task {
    Cell(usize),
    Edge(usize),
}

/// Dense contribution of one cell or edge.
struct Block {
    dofs: Vec<usize>,
    /// Row-major `dofs.len()` squared, symmetric.
    mat: Vec<f64>,
    rhs: Vec<f64>,
    mean: Vec<f64>,
}

/// Shape values and gradients of one operator at a point.
struct Shapes {
    phi: Vec<f64>,
    scratch: Vec<f64>,
    v: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl Shapes {
    fn new(op: &ReconOp) -> Self {
        let (nb, n) = (op.basis.len(), op.patch.len());
        Shapes {
            phi: vec![0.0; nb],
            scratch: vec![0.0; 2 * nb],
            v: vec![0.0; n],
            gx: vec![0.0; n],
            gy: vec![0.0; n],
        }
    }

    fn at(&mut self, op: &ReconOp, p: &Point) {
        op.shape_values(p, &mut self.phi, &mut self.v);
        op.shape_gradients(p, &mut self.scratch, &mut self.gx, &mut self.gy);
    }

    /// `(A ∇ψ_j) · n` for every shape function.
    fn normal_flux(&self, a: &Matrix2<f64>, n: &Vec2, out: &mut [f64]) {
        let an = a.transpose() * n;
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.gx[j] * an.x + self.gy[j] * an.y;
        }
    }
}

/// Adds `w (-f_j s_i - f_i s_j + c s_i s_j)` to the upper triangle.
fn edge_update(mat: &mut [f64], n: usize, w: f64, jump: &[f64], flux: &[f64], pen: f64) {
    for i in 0..n {
        let (ji, fi) = (jump[i], flux[i]);
        if ji == 0.0 && fi == 0.0 {
            continue;
        }
        let row = &mut mat[i * n..(i + 1) * n];
        for j in i..n {
            row[j] += w * (-flux[j] * ji - fi * jump[j] + pen * ji * jump[j]);
        }
    }
}

fn mirror(mat: &mut [f64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            mat[j * n + i] = mat[i * n + j];
        }
    }
}

struct Assembler<'a> {
    mesh: &'a PolyMesh,
    sub: &'a SubTriangulation,
    global: &'a GlobalRecon,
    problem: &'a EllipticProblem,
    penalties: &'a [Option<f64>],
    cell_degree: usize,
    edge_points: usize,
    domain_area: f64,
}

impl Assembler<'_> {
    fn cell_block(&self, c: usize) -> Block {
        let op = self.global.op(c);
        let n = op.patch.len();
        let mut s = Shapes::new(op);
        let mut mat = vec![0.0; n * n];
        let (mut rhs, mut mean) = (vec![0.0; n], vec![0.0; n]);
        let (mut fx, mut fy) = (vec![0.0; n], vec![0.0; n]);
        for (p, w) in cell_quadrature(self.sub, c, self.cell_degree).iter() {
            s.at(op, p);
            let a = (self.problem.coefficient)(p);
            let f = (self.problem.source)(p);
            for j in 0..n {
                fx[j] = a[(0, 0)] * s.gx[j] + a[(0, 1)] * s.gy[j];
                fy[j] = a[(1, 0)] * s.gx[j] + a[(1, 1)] * s.gy[j];
                rhs[j] += w * f * s.v[j];
                mean[j] += w * s.v[j] / self.domain_area;
            }
            for i in 0..n {
                let (gxi, gyi) = (w * s.gx[i], w * s.gy[i]);
                let row = &mut mat[i * n..(i + 1) * n];
                for j in i..n {
                    row[j] += gxi * fx[j] + gyi * fy[j];
                }
            }
        }
        mirror(&mut mat, n);
        Block {
            dofs: op.members().to_vec(),
            mat,
            rhs,
            mean,
        }
    }

    fn edge_block(&self, e: usize) -> Block {
        let edge = self.mesh.edge(e);
        let (a0, b0) = self.mesh.edge_endpoints(e);
        let rule = segment_rule(&a0, &b0, self.edge_points);
        let normal = self.mesh.edge_normal(e);
        let pen = self.penalties[e].unwrap_or(0.0) / self.mesh.edge_length(e);
        let op1 = self.global.op(edge.left);
        let n1 = op1.patch.len();
        let mut s1 = Shapes::new(op1);
        let mut flux1 = vec![0.0; n1];
        match edge.right {
            Some(right) => {
                let op2 = self.global.op(right);
                let (dofs, pos2) = union_dofs(op1.members(), op2.members());
                let n = dofs.len();
                let mut s2 = Shapes::new(op2);
                let mut flux2 = vec![0.0; op2.patch.len()];
                let (mut jump, mut flux) = (vec![0.0; n], vec![0.0; n]);
                let mut mat = vec![0.0; n * n];
                for (p, w) in rule.iter() {
                    s1.at(op1, p);
                    s2.at(op2, p);
                    let a = (self.problem.coefficient)(p);
                    s1.normal_flux(&a, &normal, &mut flux1);
                    s2.normal_flux(&a, &normal, &mut flux2);
                    jump.fill(0.0);
                    flux.fill(0.0);
                    for j in 0..n1 {
                        jump[j] = s1.v[j];
                        flux[j] = 0.5 * flux1[j];
                    }
                    for (j, &k) in pos2.iter().enumerate() {
                        jump[k] -= s2.v[j];
                        flux[k] += 0.5 * flux2[j];
                    }
                    edge_update(&mut mat, n, w, &jump, &flux, pen);
                }
                mirror(&mut mat, n);
                Block {
                    dofs,
                    mat,
                    rhs: vec![0.0; n],
                    mean: vec![0.0; n],
                }
            }
            None => {
                let mut mat = vec![0.0; n1 * n1];
                for (p, w) in rule.iter() {
                    s1.at(op1, p);
                    let a = (self.problem.coefficient)(p);
                    s1.normal_flux(&a, &normal, &mut flux1);
                    edge_update(&mut mat, n1, w, &s1.v, &flux1, pen);
                }
                mirror(&mut mat, n1);
                Block {
                    dofs: op1.members().to_vec(),
                    mat,
                    rhs: vec![0.0; n1],
                    mean: vec![0.0; n1],
                }
            }
        }
    }

    fn block(&self, task: &Task) -> Block {
        match *task {
            Task::Cell(c) => self.cell_block(c),
            Task::Edge(e) => self.edge_block(e),
        }
    }
}

/// Column pattern per row: every pair of dofs sharing a cell or edge block.
fn sparsity(n: usize, groups: &[&[usize]]) -> Vec<Vec<usize>> {
    let mut groups_of: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (g, dofs) in groups.iter().enumerate() {
        for &i in dofs.iter() {
            groups_of[i].push(g as u32);
        }
    }
    let mut stamp = vec![usize::MAX; n];
    (0..n)
        .map(|i| {
            let mut row = Vec::new();
            for &g in &groups_of[i] {
                for &j in groups[g as usize] {
                    if stamp[j] != i {
                        stamp[j] = i;
                        row.push(j);
                    }
                }
            }
            row.sort_unstable();
            row
        })
        .collect()
}

const CHUNK: usize = 1024;

/// Assembles the bilinear form and the source term `(f, R e_i)`.
///
/// Boundary data enter through [`apply_dirichlet_rhs`] and [`apply_neumann_rhs`].
/// Local blocks are computed in parallel and summed in a fixed order, so the
/// result does not depend on the number of threads.
pub fn assemble(
    mesh: &PolyMesh,
    sub: &SubTriangulation,
    global: &GlobalRecon,
    problem: &EllipticProblem,
    opts: &AssemblyOptions,
) -> Result<DgSystem> {
    let m = global.m;
    let n = mesh.num_cells();
    if global.num_cells() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: global.num_cells(),
        });
    }
    if let Some(f) = opts.interior_factor {
        if !(f >= 3.0) {
            return Err(Error::Config(format!("interior penalty factor {f} is below 3")));
        }
    }
    if !(opts.penalty_k > 0.0) {
        return Err(Error::Config(format!("penalty factor k = {} must be positive", opts.penalty_k)));
    }
    let kinds = edge_kinds(mesh, problem)?;
    let penalties: Vec<Option<f64>> = kinds
        .iter()
        .map(|k| match k {
            EdgeKind::Interior => Some(match opts.interior_factor {
                Some(f) => f * problem.c2,
                None => penalty_value(false, problem.c2, m, opts.penalty_k),
            }),
            EdgeKind::Dirichlet => Some(penalty_value(true, problem.c2, m, opts.penalty_k)),
            EdgeKind::Neumann => None,
        })
        .collect();

    let union_of = |e: usize| {
        let edge = mesh.edge(e);
        let a = global.op(edge.left).members();
        match edge.right {
            Some(r) => union_dofs(a, global.op(r).members()).0,
            None => a.to_vec(),
        }
    };
    let interior: Vec<usize> = mesh.interior_edges().collect();
    let edge_groups: Vec<Vec<usize>> = interior.iter().map(|&e| union_of(e)).collect();
    let mut groups: Vec<&[usize]> = (0..n).map(|c| global.op(c).members()).collect();
    groups.extend(edge_groups.iter().map(Vec::as_slice));
    let mut matrix = CsrMatrix::from_pattern(sparsity(n, &groups));
    drop(edge_groups);

    let mut tasks: Vec<Task> = (0..n).map(Task::Cell).collect();
    tasks.extend(
        (0..mesh.num_edges())
            .filter(|&e| kinds[e] != EdgeKind::Neumann)
            .map(Task::Edge),
    );
    let asm = Assembler {
        mesh,
        sub,
        global,
        problem,
        penalties: &penalties,
        cell_degree: opts.cell_degree.unwrap_or(default_cell_degree(m)),
        edge_points: opts.edge_points.unwrap_or(default_edge_points(m)),
        domain_area: mesh.total_area(),
    };
    let mut rhs = vec![0.0; n];
    let mut mean_weights = vec![0.0; n];
    for chunk in tasks.chunks(CHUNK) {
        let blocks: Vec<Block> = chunk.par_iter().map(|t| asm.block(t)).collect();
        for b in blocks {
            let k = b.dofs.len();
            for (li, &i) in b.dofs.iter().enumerate() {
                rhs[i] += b.rhs[li];
                mean_weights[i] += b.mean[li];
                for (lj, &j) in b.dofs.iter().enumerate() {
                    let v = b.mat[li * k + lj];
                    if v != 0.0 {
                        matrix.add(i, j, v);
                    }
                }
            }
        }
    }
    let pure_neumann = !kinds.contains(&EdgeKind::Dirichlet);
    Ok(DgSystem {
        matrix,
        rhs,
        edge_kinds: kinds,
        penalties,
        pure_neumann,
        mean_weights,
    })
}

/// `rhs_i += ∫_e g_D (η_e/h_e ψ_i - (A ∇ψ_i)·n)` over Dirichlet edges.
pub fn apply_dirichlet_rhs(
    mesh: &PolyMesh,
    global: &GlobalRecon,
    problem: &EllipticProblem,
    opts: &AssemblyOptions,
    system: &mut DgSystem,
) -> Result<()> {
    let npts = opts.edge_points.unwrap_or(default_edge_points(global.m));
    for e in mesh.boundary_edges() {
        if system.edge_kinds[e] != EdgeKind::Dirichlet {
            continue;
        }
        let BoundaryCondition::Dirichlet(g) = problem.condition(mesh.edge(e).marker)? else {
            unreachable!("edge kinds follow the problem's conditions")
        };
        let pen = system.penalties[e].unwrap_or(0.0) / mesh.edge_length(e);
        let normal = mesh.edge_normal(e);
        let op = global.op(mesh.edge(e).left);
        let mut s = Shapes::new(op);
        let mut flux = vec![0.0; op.patch.len()];
        let (a0, b0) = mesh.edge_endpoints(e);
        for (p, w) in segment_rule(&a0, &b0, npts).iter() {
            s.at(op, p);
            s.normal_flux(&(problem.coefficient)(p), &normal, &mut flux);
            let gv = g(p);
            for (j, &i) in op.members().iter().enumerate() {
                system.rhs[i] += w * gv * (pen * s.v[j] - flux[j]);
            }
        }
    }
    Ok(())
}

/// `rhs_i += ∫_e g_N ψ_i` over Neumann edges.
pub fn apply_neumann_rhs(
    mesh: &PolyMesh,
    global: &GlobalRecon,
    problem: &EllipticProblem,
    opts: &AssemblyOptions,
    system: &mut DgSystem,
) -> Result<()> {
    let npts = opts.edge_points.unwrap_or(default_edge_points(global.m));
    for e in mesh.boundary_edges() {
        if system.edge_kinds[e] != EdgeKind::Neumann {
            continue;
        }
        let BoundaryCondition::Neumann(g) = problem.condition(mesh.edge(e).marker)? else {
            unreachable!("edge kinds follow the problem's conditions")
        };
        let normal = mesh.edge_normal(e);
        let op = global.op(mesh.edge(e).left);
        let mut s = Shapes::new(op);
        let (a0, b0) = mesh.edge_endpoints(e);
        for (p, w) in segment_rule(&a0, &b0, npts).iter() {
            op.shape_values(p, &mut s.phi, &mut s.v);
            let gv = g(p, &normal);
            for (j, &i) in op.members().iter().enumerate() {
                system.rhs[i] += w * gv * s.v[j];
            }
        }
    }
    Ok(())
}

/// Assembly followed by both boundary right-hand sides.
pub fn build_system(
    mesh: &PolyMesh,
    sub: &SubTriangulation,
    global: &GlobalRecon,
    problem: &EllipticProblem,
    opts: &AssemblyOptions,
) -> Result<DgSystem> {
    let mut system = assemble(mesh, sub, global, problem, opts)?;
    apply_dirichlet_rhs(mesh, global, problem, opts, &mut system)?;
    apply_neumann_rhs(mesh, global, problem, opts, &mut system)?;
    Ok(system)
}
