//! Element patches: recursive neighbor sets around a cell, their sampling
//! nodes, and geometric diagnostics of the least-squares stability.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{self, Point, Vec2};
use crate::mesh::{triangulate_polygon, PolyMesh, RegularityReport};
use crate::recon;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborRule {
    /// Cells sharing at least one vertex.
    Moore,
    /// Cells sharing an edge.
    VonNeumann,
}

impl NeighborRule {
    pub fn neighbors<'a>(&self, mesh: &'a PolyMesh, cell: usize) -> &'a [usize] {
        match self {
            NeighborRule::Moore => mesh.vertex_neighbors(cell),
            NeighborRule::VonNeumann => mesh.edge_neighbors(cell),
        }
    }
}

impl fmt::Display for NeighborRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NeighborRule::Moore => "moore",
            NeighborRule::VonNeumann => "von-neumann",
        })
    }
}

impl FromStr for NeighborRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "moore" => Ok(NeighborRule::Moore),
            "von-neumann" | "vonneumann" => Ok(NeighborRule::VonNeumann),
            other => Err(Error::Config(format!(
                "unknown neighbor rule '{other}' (expected moore or von-neumann)"
            ))),
        }
    }
}

/// The cells used to reconstruct on `owner`, with one sampling node per member.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub owner: usize,
    /// Distinct cell ids in breadth-first order; `members[0] == owner`.
    pub members: Vec<usize>,
    /// `nodes[i]` is the sampling point of `members[i]`.
    pub nodes: Vec<Point>,
    pub depth: usize,
    pub rule: NeighborRule,
    /// Barycenter of the owner cell.
    pub center: Point,
    /// Diameter of the union of member cells.
    pub diameter: f64,
}

impl Patch {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.members.contains(&cell)
    }

    /// All vertex coordinates of the member cells.
    pub fn vertex_cloud(&self, mesh: &PolyMesh) -> Vec<Point> {
        let mut seen = HashSet::new();
        self.members
            .iter()
            .flat_map(|&c| mesh.cell(c).iter().copied())
            .filter(|v| seen.insert(*v))
            .map(|v| mesh.vertex(v))
            .collect()
    }
}

/// Incremental breadth-first growth of a cell set.
struct Growth {
    members: Vec<usize>,
    seen: HashSet<usize>,
    frontier: Vec<usize>,
}

impl Growth {
    fn new(cell: usize) -> Self {
        Growth {
            members: vec![cell],
            seen: HashSet::from([cell]),
            frontier: vec![cell],
        }
    }

    /// Adds one layer; returns false when nothing new was reached.
    fn step(&mut self, mesh: &PolyMesh, rule: NeighborRule) -> bool {
        let mut next = Vec::new();
        for &c in &self.frontier {
            for &nb in rule.neighbors(mesh, c) {
                if self.seen.insert(nb) {
                    next.push(nb);
                }
            }
        }
        next.sort_unstable();
        self.members.extend_from_slice(&next);
        self.frontier = next;
        !self.frontier.is_empty()
    }
}

fn finish(mesh: &PolyMesh, owner: usize, members: Vec<usize>, depth: usize, rule: NeighborRule, nodes: &[Point]) -> Patch {
    let mut patch = Patch {
        owner,
        nodes: members.iter().map(|&c| nodes[c]).collect(),
        members,
        depth,
        rule,
        center: mesh.barycenter(owner),
        diameter: 0.0,
    };
    let hull = geometry::convex_hull(&patch.vertex_cloud(mesh));
    patch.diameter = geometry::diameter(&hull);
    patch
}

/// Patch of depth `depth` around `cell` with barycentric sampling nodes.
pub fn build_patch(mesh: &PolyMesh, cell: usize, depth: usize, rule: NeighborRule) -> Patch {
    build_patch_with_nodes(mesh, cell, depth, rule, mesh.barycenters())
}

/// As [`build_patch`], reading the sampling node of each cell from `nodes`.
pub fn build_patch_with_nodes(
    mesh: &PolyMesh,
    cell: usize,
    depth: usize,
    rule: NeighborRule,
    nodes: &[Point],
) -> Patch {
    let mut g = Growth::new(cell);
    for _ in 0..depth {
        if !g.step(mesh, rule) {
            break;
        }
    }
    finish(mesh, cell, g.members, depth, rule, nodes)
}

/// Number of coefficients of a bivariate polynomial of total degree `m`.
pub fn dim_p(m: usize) -> usize {
    (m + 1) * (m + 2) / 2
}

/// Smallest-depth patch with at least `safety * dim P_m` cells whose design
/// matrix has full rank.
pub fn auto_depth(mesh: &PolyMesh, cell: usize, m: usize, rule: NeighborRule, safety: f64) -> Result<Patch> {
    auto_depth_with_nodes(mesh, cell, m, rule, safety, mesh.barycenters())
}

pub fn auto_depth_with_nodes(
    mesh: &PolyMesh,
    cell: usize,
    m: usize,
    rule: NeighborRule,
    safety: f64,
    nodes: &[Point],
) -> Result<Patch> {
    if !(safety >= 1.0) {
        return Err(Error::Config(format!("safety factor must be at least 1, got {safety}")));
    }
    let needed = (safety * dim_p(m) as f64).ceil() as usize;
    let mut g = Growth::new(cell);
    let mut depth = 0;
    let mut last_rank_failure = None;
    loop {
        if g.members.len() >= needed {
            let patch = finish(mesh, cell, g.members.clone(), depth, rule, nodes);
            match recon::check_rank(&patch, m) {
                Ok(()) => return Ok(patch),
                Err(e @ Error::RankDeficient { .. }) => last_rank_failure = Some(e),
                Err(e) => return Err(e),
            }
        }
        if !g.step(mesh, rule) {
            return Err(last_rank_failure.unwrap_or(Error::MeshTooCoarse {
                m,
                cell,
                available: g.members.len(),
                needed,
            }));
        }
        depth += 1;
    }
}

/// Moves every cell's node by exactly `magnitude * h_K` in a uniformly random
/// direction. Each cell draws from its own stream of `seed`, so the result does
/// not depend on the order cells are visited.
pub fn perturbed_nodes(mesh: &PolyMesh, magnitude: f64, seed: u64) -> Vec<Point> {
    (0..mesh.num_cells())
        .map(|c| perturb_one(mesh, c, magnitude, seed))
        .collect()
}

const PERTURB_TRIES: usize = 100;

fn perturb_one(mesh: &PolyMesh, cell: usize, magnitude: f64, seed: u64) -> Point {
    let base = mesh.barycenter(cell);
    if magnitude == 0.0 {
        return base;
    }
    let poly = mesh.cell_polygon(cell);
    let hk = mesh.diameter(cell);
    let margin = 1e-10 * hk;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell as u64);
    let mut dir = Vec2::zeros();
    for _ in 0..PERTURB_TRIES {
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        dir = Vec2::new(angle.cos(), angle.sin());
        let p = base + dir * (magnitude * hk);
        if geometry::strictly_inside(&p, &poly, margin) {
            return p;
        }
    }
    // Fall back toward the barycenter along the last direction.
    let mut len = magnitude * hk;
    loop {
        len *= 0.5;
        let p = base + dir * len;
        if geometry::strictly_inside(&p, &poly, margin) || len < margin {
            log::debug!("perturbed node of cell {cell} clamped to distance {len:e}");
            return p;
        }
    }
}

/// Replaces the patch nodes with perturbed ones (see [`perturbed_nodes`]).
pub fn perturb_nodes(mesh: &PolyMesh, patch: &Patch, magnitude: f64, seed: u64) -> Patch {
    let mut out = patch.clone();
    for (node, &c) in out.nodes.iter_mut().zip(&patch.members) {
        *node = perturb_one(mesh, c, magnitude, seed);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PatchGeometry {
    /// Patch diameter d_K.
    pub d_k: f64,
    /// Radius of the disk about the patch centroid enclosing the patch.
    pub big_r: f64,
    /// Distance from the owner barycenter to the patch boundary.
    pub r: f64,
    /// d_K / r
    pub gamma: f64,
    /// Cone aperture 2 asin(r / 2R).
    pub theta: f64,
    /// Minimum width of the patch's convex hull.
    pub width: f64,
}

/// Edges of member cells whose other side is outside the patch.
fn patch_boundary(mesh: &PolyMesh, patch: &Patch) -> Vec<(Point, Point)> {
    let inside: HashSet<usize> = patch.members.iter().copied().collect();
    let mut out = Vec::new();
    for &c in &patch.members {
        for &e in mesh.cell_edges(c) {
            let outside = match mesh.edge(e).other(c) {
                None => true,
                Some(o) => !inside.contains(&o),
            };
            if outside {
                out.push(mesh.edge_endpoints(e));
            }
        }
    }
    out
}

pub fn geometry_report(mesh: &PolyMesh, patch: &Patch) -> PatchGeometry {
    let cloud = patch.vertex_cloud(mesh);
    let hull = geometry::convex_hull(&cloud);
    let (mut area, mut moment) = (0.0, Vec2::zeros());
    for &c in &patch.members {
        area += mesh.area(c);
        moment += mesh.barycenter(c).coords * mesh.area(c);
    }
    let centroid = Point::from(moment / area);
    let big_r = cloud.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
    let r = patch_boundary(mesh, patch)
        .iter()
        .map(|(a, b)| geometry::distance_to_segment(&patch.center, a, b))
        .fold(f64::INFINITY, f64::min);
    let d_k = geometry::diameter(&hull);
    PatchGeometry {
        d_k,
        big_r,
        r,
        gamma: d_k / r,
        theta: cone_angle(r, big_r),
        width: geometry::convex_width(&hull),
    }
}

/// 2 asin(r / 2R), clamped to π.
pub fn cone_angle(r: f64, big_r: f64) -> f64 {
    2.0 * (r / (2.0 * big_r)).min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LambdaBound {
    Certified(f64),
    NotCertified,
}

impl LambdaBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            LambdaBound::Certified(v) => Some(*v),
            LambdaBound::NotCertified => None,
        }
    }
}

/// Geometric certificate for the stability constant of point evaluation.
///
/// Certifies 2 when `r > 2m sqrt(R h_K)` and, given `eps`, `1 + eps` when
/// `r > m sqrt(2 R h_K (1 + 1/eps))`; the smaller certified value wins.
pub fn lambda_bound_check(geom: &PatchGeometry, m: usize, h_k: f64, eps: Option<f64>) -> LambdaBound {
    let m = m as f64;
    let mut best: Option<f64> = None;
    if geom.r > 2.0 * m * (geom.big_r * h_k).sqrt() {
        best = Some(2.0);
    }
    if let Some(eps) = eps.filter(|e| *e > 0.0) {
        if geom.r > m * (2.0 * geom.big_r * h_k * (1.0 + 1.0 / eps)).sqrt() {
            best = Some(best.map_or(1.0 + eps, |b: f64| b.min(1.0 + eps)));
        }
    }
    best.map_or(LambdaBound::NotCertified, LambdaBound::Certified)
}

/// Sample points covering the patch: a barycentric lattice on a triangulation
/// of each member cell.
pub fn patch_samples(mesh: &PolyMesh, patch: &Patch, density: usize) -> Vec<Point> {
    let n = density.max(1);
    let mut out = Vec::new();
    for &c in &patch.members {
        let tris = triangulate_polygon(&mesh.cell_polygon(c)).unwrap_or_default();
        for t in tris {
            for i in 0..=n {
                for j in 0..=n - i {
                    let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
                    out.push(t[0] + (t[1] - t[0]) * a + (t[2] - t[0]) * b);
                }
            }
        }
    }
    out
}

/// Largest ℓ1 norm, over sample points of the patch, of the row mapping node
/// values to the fitted polynomial's value.
pub fn lebesgue_estimate(mesh: &PolyMesh, patch: &Patch, m: usize, density: usize) -> Result<f64> {
    let op = recon::fit_operator(patch, m)?;
    let mut phi = vec![0.0; op.basis.len()];
    let mut best: f64 = 0.0;
    for y in patch_samples(mesh, patch, density) {
        op.basis.eval_into(&y, &mut phi);
        let mut sum = 0.0;
        for j in 0..patch.len() {
            let lj: f64 = (0..phi.len()).map(|k| phi[k] * op.coeff_map[(k, j)]).sum();
            sum += lj.abs();
        }
        best = best.max(sum);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CardinalityCheck {
    pub bound: f64,
    pub actual: usize,
    pub satisfied: bool,
}

/// Compares #I(K) with σ² ρ₁² / N · R² / h_K².
pub fn cardinality_bound_check(reg: &RegularityReport, patch: &Patch, geom: &PatchGeometry, h_k: f64) -> CardinalityCheck {
    let bound = reg.sigma.powi(2) * reg.rho1.powi(2) / reg.n_max as f64 * (geom.big_r / h_k).powi(2);
    CardinalityCheck {
        bound,
        actual: patch.len(),
        satisfied: patch.len() as f64 <= bound,
    }
}

/// One row of the per-cell diagnostic report.
#[derive(Debug, Clone, Serialize)]
pub struct PatchReportRow {
    pub cell_id: usize,
    pub depth: usize,
    pub members: usize,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub r: f64,
    pub gamma: f64,
    pub theta: f64,
    /// Empty when the geometric condition does not certify a value.
    pub lambda_certified: Option<f64>,
    pub lebesgue_estimate: f64,
    pub cardinality_bound: f64,
}

pub fn report_row(mesh: &PolyMesh, reg: &RegularityReport, patch: &Patch, m: usize, density: usize) -> Result<PatchReportRow> {
    let geom = geometry_report(mesh, patch);
    let hk = mesh.diameter(patch.owner);
    let card = cardinality_bound_check(reg, patch, &geom, hk);
    Ok(PatchReportRow {
        cell_id: patch.owner,
        depth: patch.depth,
        members: patch.len(),
        big_r: geom.big_r,
        r: geom.r,
        gamma: geom.gamma,
        theta: geom.theta,
        lambda_certified: lambda_bound_check(&geom, m, hk, None).value(),
        lebesgue_estimate: lebesgue_estimate(mesh, patch, m, density)?,
        cardinality_bound: card.bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{structured_quad, structured_tri, subtriangulate, validate_regularity, voronoi_hex, LoadOptions};

    fn interior_quad(n: usize) -> usize {
        // Cell (n/2, n/2) of an n x n quad grid.
        (n / 2) * n + n / 2
    }

    /// Cells whose closure meets the closure of `cell`, found by comparing vertex coordinates.
    fn touching_cells(mesh: &PolyMesh, cell: usize) -> Vec<usize> {
        let mine = mesh.cell_polygon(cell);
        let mut out: Vec<usize> = (0..mesh.num_cells())
            .filter(|&c| {
                c != cell
                    && mesh
                        .cell_polygon(c)
                        .iter()
                        .any(|p| mine.iter().any(|q| (p - q).norm() < 1e-12))
            })
            .collect();
        out.sort_unstable();
        out
    }

    #[test]
    fn depth_zero_is_owner() {
        let m = structured_tri(4);
        let p = build_patch(&m, 5, 0, NeighborRule::Moore);
        assert_eq!(p.members, vec![5]);
        assert_eq!(p.nodes, vec![m.barycenter(5)]);
    }

    #[test]
    fn triangle_von_neumann_depth_one() {
        let m = structured_tri(6);
        let c = 2 * (3 * 6 + 3);
        let p = build_patch(&m, c, 1, NeighborRule::VonNeumann);
        assert_eq!(p.len(), 4);
    }

    #[test]
    fn quad_moore_matches_enumeration() {
        let m = structured_quad(5);
        let c = interior_quad(5);
        let p = build_patch(&m, c, 1, NeighborRule::Moore);
        let mut got = p.members[1..].to_vec();
        got.sort_unstable();
        assert_eq!(got, touching_cells(&m, c));
        assert_eq!(p.len(), 9);
    }

    #[test]
    fn moore_enumeration_on_voronoi() {
        let m = voronoi_hex(6, 2);
        for c in 0..m.num_cells() {
            let p = build_patch(&m, c, 1, NeighborRule::Moore);
            let mut got = p.members[1..].to_vec();
            got.sort_unstable();
            assert_eq!(got, touching_cells(&m, c));
        }
    }

    #[test]
    fn nesting() {
        let m = voronoi_hex(8, 4);
        for c in [0, 17, 40] {
            for t in 0..4 {
                let vn = build_patch(&m, c, t, NeighborRule::VonNeumann);
                let mo = build_patch(&m, c, t, NeighborRule::Moore);
                let vn1 = build_patch(&m, c, t + 1, NeighborRule::VonNeumann);
                assert!(vn.members.iter().all(|x| mo.contains(*x)));
                assert!(vn.members.iter().all(|x| vn1.contains(*x)));
            }
        }
    }

    #[test]
    fn auto_depth_linear_on_quads() {
        let m = structured_quad(6);
        let p = auto_depth(&m, interior_quad(6), 1, NeighborRule::Moore, 2.0).unwrap();
        assert_eq!(p.depth, 1);
        assert_eq!(p.len(), 9);
    }

    #[test]
    fn auto_depth_quadratic_on_triangles() {
        let mesh = structured_tri(8);
        let c = 2 * (4 * 8 + 4);
        let p = auto_depth(&mesh, c, 2, NeighborRule::VonNeumann, 2.0).unwrap();
        // Enumerate depths directly: the chosen depth is the first with >= 12 cells.
        let counts: Vec<usize> = (0..6).map(|t| build_patch(&mesh, c, t, NeighborRule::VonNeumann).len()).collect();
        let first = counts.iter().position(|&n| n >= 12).unwrap();
        assert_eq!(p.depth, first);
        assert!(counts[1] < 12);
        assert!(p.len() >= 12);
    }

    #[test]
    fn auto_depth_too_coarse() {
        let m = structured_quad(2);
        let err = auto_depth(&m, 0, 6, NeighborRule::Moore, 2.0).unwrap_err();
        assert!(matches!(err, Error::MeshTooCoarse { m: 6, available: 4, .. }), "{err}");
        assert!(err.to_string().contains("mesh too coarse for order 6"));
    }

    #[test]
    fn perturbation() {
        let m = structured_quad(4);
        let p = build_patch(&m, 5, 1, NeighborRule::Moore);
        assert_eq!(perturb_nodes(&m, &p, 0.0, 1), p);
        let q = perturb_nodes(&m, &p, 0.1, 9);
        for (i, &c) in q.members.iter().enumerate() {
            let d = (q.nodes[i] - m.barycenter(c)).norm();
            assert!((d - 0.1 * m.diameter(c)).abs() < 1e-14);
            assert!(geometry::point_in_polygon(&q.nodes[i], &m.cell_polygon(c)));
        }
        let again = perturb_nodes(&m, &p, 0.1, 9);
        assert!(q.nodes.iter().zip(&again.nodes).all(|(a, b)| a.x.to_bits() == b.x.to_bits() && a.y.to_bits() == b.y.to_bits()));
        // The same cell gets the same node in every patch.
        let global = perturbed_nodes(&m, 0.1, 9);
        for (i, &c) in q.members.iter().enumerate() {
            assert_eq!(q.nodes[i], global[c]);
        }
    }

    #[test]
    fn large_perturbation_stays_inside() {
        let m = structured_tri(5);
        for (c, p) in perturbed_nodes(&m, 0.9, 3).iter().enumerate() {
            assert!(geometry::strictly_inside(p, &m.cell_polygon(c), 0.0));
        }
    }

    #[test]
    fn single_square_geometry() {
        let m = structured_quad(1);
        let g = geometry_report(&m, &build_patch(&m, 0, 0, NeighborRule::Moore));
        assert!((g.big_r - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((g.r - 0.5).abs() < 1e-15);
        assert!((g.gamma - 2.0 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn block_geometry() {
        let m = PolyMesh::from_parts(
            (0..4)
                .flat_map(|j| (0..4).map(move |i| Point::new(i as f64, j as f64)))
                .collect(),
            (0..3)
                .flat_map(|j| (0..3).map(move |i| vec![j * 4 + i, j * 4 + i + 1, j * 4 + i + 5, j * 4 + i + 4]))
                .collect(),
            &[],
            LoadOptions::default(),
        )
        .unwrap();
        let g = geometry_report(&m, &build_patch(&m, 4, 1, NeighborRule::Moore));
        assert!((g.big_r - 1.5 * 2f64.sqrt()).abs() < 1e-14);
        assert!((g.r - 1.5).abs() < 1e-14);
        assert!((g.width - 3.0).abs() < 1e-14);
    }

    #[test]
    fn theta_formula() {
        assert!((cone_angle(1.0, 2.0) - 0.505_360_510_284_157).abs() < 1e-12);
    }

    #[test]
    fn lambda_certificates() {
        let geom = |r: f64, big_r: f64| PatchGeometry {
            d_k: 2.0 * big_r,
            big_r,
            r,
            gamma: 2.0 * big_r / r,
            theta: cone_angle(r, big_r),
            width: 2.0 * r,
        };
        assert_eq!(lambda_bound_check(&geom(1.0, 2.0), 3, 0.01, None), LambdaBound::Certified(2.0));
        assert_eq!(lambda_bound_check(&geom(0.1, 2.0), 3, 0.01, None), LambdaBound::NotCertified);
        let edge = 3.0 * (4.0 * 2.0 * 0.01f64).sqrt();
        assert_eq!(
            lambda_bound_check(&geom(edge * (1.0 + 1e-12), 2.0), 3, 0.01, Some(1.0)),
            LambdaBound::Certified(2.0)
        );
        // 1 + eps = 1.5 needs r > 3 sqrt(0.12) ≈ 1.039.
        assert_eq!(
            lambda_bound_check(&geom(1.0, 2.0), 3, 0.01, Some(0.5)),
            LambdaBound::Certified(2.0)
        );
        assert_eq!(
            lambda_bound_check(&geom(1.05, 2.0), 3, 0.01, Some(0.5)),
            LambdaBound::Certified(1.5)
        );
    }

    #[test]
    fn lebesgue_constant_fit() {
        let m = voronoi_hex(6, 1);
        let p = build_patch(&m, 10, 2, NeighborRule::VonNeumann);
        let l = lebesgue_estimate(&m, &p, 0, 4).unwrap();
        assert!((l - 1.0).abs() < 1e-13);
    }

    #[test]
    fn lebesgue_rotation_invariant() {
        let block = structured_quad(3);
        let rotate = |a: f64| {
            let (s, c) = a.sin_cos();
            let verts = block
                .vertices()
                .iter()
                .map(|p| Point::new(c * p.x - s * p.y, s * p.x + c * p.y))
                .collect();
            PolyMesh::from_parts(verts, block.cells().to_vec(), &[], LoadOptions::default()).unwrap()
        };
        let base = lebesgue_estimate(&block, &build_patch(&block, 4, 1, NeighborRule::Moore), 1, 6).unwrap();
        assert!(base.is_finite() && base >= 1.0);
        for a in [0.3, 1.1, 2.5] {
            let r = rotate(a);
            let l = lebesgue_estimate(&r, &build_patch(&r, 4, 1, NeighborRule::Moore), 1, 6).unwrap();
            assert!((l - base).abs() < 1e-10 * base, "{l} vs {base}");
        }
    }

    #[test]
    fn lebesgue_collinear_nodes() {
        let m = structured_quad(3);
        let mut p = build_patch(&m, 4, 1, NeighborRule::Moore);
        for (i, node) in p.nodes.iter_mut().enumerate() {
            *node = Point::new(i as f64 * 0.1, i as f64 * 0.1);
        }
        assert!(matches!(lebesgue_estimate(&m, &p, 1, 4), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn cardinality() {
        let m = structured_quad(12);
        let reg = validate_regularity(&m, &subtriangulate(&m).unwrap(), 20.0);
        let c = interior_quad(12);
        let single = build_patch(&m, c, 0, NeighborRule::Moore);
        let check = cardinality_bound_check(&reg, &single, &geometry_report(&m, &single), m.diameter(c));
        assert!(check.satisfied && check.actual == 1);
        for t in 1..=4 {
            let p = build_patch(&m, c, t, NeighborRule::Moore);
            assert_eq!(p.len(), (2 * t + 1).pow(2));
            let check = cardinality_bound_check(&reg, &p, &geometry_report(&m, &p), m.diameter(c));
            assert!(check.satisfied, "{check:?}");
        }
    }

    #[test]
    fn geometry_invariants_on_test_meshes() {
        for mesh in [structured_tri(6), structured_quad(6), voronoi_hex(6, 5)] {
            for c in 0..mesh.num_cells() {
                for t in 0..3 {
                    let g = geometry_report(&mesh, &build_patch(&mesh, c, t, NeighborRule::VonNeumann));
                    assert!(g.r <= g.big_r && g.d_k <= 2.0 * g.big_r + 1e-14);
                    assert!(g.gamma >= 1.0 && g.theta > 0.0 && g.theta <= std::f64::consts::PI);
                }
            }
        }
    }
}
