//! Polygonal meshes: ingestion, validation, topology queries, sub-triangulation
//! and quadrature.

mod generate;
mod msh;
mod polymesh;
pub mod quadrature;
mod regularity;
mod subtri;

use std::collections::HashMap;

use crate::geometry::{self, Point, Vec2};
use crate::{Error, Result};

pub use generate::{builtin_mesh, mixed_tri_quad, structured_quad, structured_rect, structured_tri, voronoi_hex, voronoi_hex_with};
pub use msh::load_msh2;
pub use polymesh::load_polymesh;
pub use quadrature::{cell_quadrature, edge_quadrature, QuadratureRule};
pub use regularity::{validate_regularity, RegularityReport, DEFAULT_SIGMA_THRESHOLD};
pub use subtri::{subtriangulate, triangulate_polygon, SubTriangle, SubTriangulation};

/// Reads a mesh file, choosing the parser by extension: `.msh` (Gmsh 2 ASCII)
/// or `.poly` / `.polymesh`.
pub fn load_mesh(path: &std::path::Path, opts: LoadOptions) -> Result<PolyMesh> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let parse = match ext.as_str() {
        "msh" => load_msh2,
        "poly" | "polymesh" => load_polymesh,
        _ => return Err(Error::UnsupportedFormat(format!("{} (expected .msh or .poly)", path.display()))),
    };
    parse(&std::fs::read_to_string(path)?, opts)
}

/// A mesh edge. `vertices` follow the counter-clockwise traversal of `left`, so
/// the outward normal of `left` is the edge direction rotated clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
    /// Boundary tag; always 0 on interior edges.
    pub marker: i32,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }

    /// The cell on the other side of `cell`, if any.
    pub fn other(&self, cell: usize) -> Option<usize> {
        if self.left == cell {
            self.right
        } else {
            Some(self.left)
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Reverse clockwise cells instead of rejecting them.
    pub fix_orientation: bool,
}

/// Boundary-marker declaration `(vertex i, vertex j, marker)`.
pub type MarkerDecl = (usize, usize, i32);

/// A validated conforming polygonal mesh with derived topology.
#[derive(Debug, Clone)]
pub struct PolyMesh {
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    cell_edges: Vec<Vec<usize>>,
    areas: Vec<f64>,
    barycenters: Vec<Point>,
    diameters: Vec<f64>,
    edge_neighbors: Vec<Vec<usize>>,
    vertex_neighbors: Vec<Vec<usize>>,
}

impl PolyMesh {
    /// Builds and validates a mesh from raw vertex and cell lists.
    pub fn from_parts(
        vertices: Vec<Point>,
        mut cells: Vec<Vec<usize>>,
        markers: &[MarkerDecl],
        opts: LoadOptions,
    ) -> Result<Self> {
        let nv = vertices.len();
        if cells.is_empty() {
            return Err(Error::Topology("mesh has no cells".into()));
        }
        let mut areas = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter_mut().enumerate() {
            if cell.len() < 3 {
                return Err(Error::DegenerateCell {
                    cell: c,
                    msg: format!("{} vertices", cell.len()),
                });
            }
            if let Some(&bad) = cell.iter().find(|&&v| v >= nv) {
                return Err(Error::Topology(format!(
                    "cell {c} references vertex {bad} but only {nv} vertices exist"
                )));
            }
            let mut sorted = cell.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Topology(format!("cell {c} repeats a vertex")));
            }
            let poly: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            let area = geometry::signed_area(&poly);
            let scale = geometry::diameter(&poly).powi(2);
            if area.abs() <= 1e-14 * scale {
                return Err(Error::DegenerateCell {
                    cell: c,
                    msg: "zero area".into(),
                });
            }
            if area < 0.0 {
                if opts.fix_orientation {
                    cell.reverse();
                } else {
                    return Err(Error::Orientation { cell: c });
                }
            }
            if !geometry::is_simple(&poly) {
                return Err(Error::DegenerateCell {
                    cell: c,
                    msg: "self-intersecting polygon".into(),
                });
            }
            areas.push(area.abs());
        }

        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let k = cell.len();
            let mut local = Vec::with_capacity(k);
            for i in 0..k {
                let (a, b) = (cell[i], cell[(i + 1) % k]);
                let key = (a.min(b), a.max(b));
                match edge_map.get(&key) {
                    None => {
                        edge_map.insert(key, edges.len());
                        local.push(edges.len());
                        edges.push(Edge {
                            vertices: [a, b],
                            left: c,
                            right: None,
                            marker: 0,
                        });
                    }
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.right.is_some() {
                            return Err(Error::Topology(format!(
                                "non-manifold edge ({a}, {b}): more than two incident cells"
                            )));
                        }
                        if edge.vertices == [a, b] {
                            return Err(Error::Topology(format!(
                                "edge ({a}, {b}) traversed in the same direction by cells {} and {c}",
                                edge.left
                            )));
                        }
                        edge.right = Some(c);
                        local.push(e);
                    }
                }
            }
            cell_edges.push(local);
        }

        for &(i, j, marker) in markers {
            let e = *edge_map.get(&(i.min(j), i.max(j))).ok_or_else(|| {
                Error::Topology(format!("boundary marker declared for unknown edge ({i}, {j})"))
            })?;
            if !edges[e].is_boundary() {
                return Err(Error::Topology(format!(
                    "boundary marker declared for interior edge ({i}, {j})"
                )));
            }
            edges[e].marker = marker;
        }

        let barycenters: Vec<Point> = cells
            .iter()
            .map(|cell| geometry::centroid(&cell.iter().map(|&v| vertices[v]).collect::<Vec<_>>()))
            .collect();
        let diameters: Vec<f64> = cells
            .iter()
            .map(|cell| geometry::diameter(&cell.iter().map(|&v| vertices[v]).collect::<Vec<_>>()))
            .collect();

        let mut edge_neighbors = vec![Vec::new(); cells.len()];
        for e in &edges {
            if let Some(r) = e.right {
                edge_neighbors[e.left].push(r);
                edge_neighbors[r].push(e.left);
            }
        }
        let mut vertex_cells = vec![Vec::new(); nv];
        for (c, cell) in cells.iter().enumerate() {
            for &v in cell {
                vertex_cells[v].push(c);
            }
        }
        let mut vertex_neighbors = vec![Vec::new(); cells.len()];
        for (c, cell) in cells.iter().enumerate() {
            let nb: &mut Vec<usize> = &mut vertex_neighbors[c];
            for &v in cell {
                nb.extend(vertex_cells[v].iter().copied().filter(|&o| o != c));
            }
        }
        for list in edge_neighbors.iter_mut().chain(vertex_neighbors.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }

        let mesh = PolyMesh {
            vertices,
            cells,
            edges,
            cell_edges,
            areas,
            barycenters,
            diameters,
            edge_neighbors,
            vertex_neighbors,
        };
        mesh.check_coverage()?;
        Ok(mesh)
    }

    /// Boundary edges must close into loops whose enclosed area matches the cell area sum.
    fn check_coverage(&self) -> Result<()> {
        let mut balance: HashMap<usize, i64> = HashMap::new();
        let mut enclosed = 0.0;
        for e in self.edges.iter().filter(|e| e.is_boundary()) {
            let [a, b] = e.vertices;
            *balance.entry(a).or_default() += 1;
            *balance.entry(b).or_default() -= 1;
            let (p, q) = (self.vertices[a], self.vertices[b]);
            enclosed += 0.5 * (p.x * q.y - q.x * p.y);
        }
        if let Some((v, _)) = balance.iter().find(|(_, &d)| d != 0) {
            return Err(Error::Topology(format!(
                "boundary does not close into loops at vertex {v}"
            )));
        }
        let total = self.total_area();
        if (enclosed - total).abs() > 1e-10 * total {
            return Err(Error::Topology(format!(
                "cell areas sum to {total} but the boundary encloses {enclosed}"
            )));
        }
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    /// Vertex indices of a cell, counter-clockwise.
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c]
    }

    pub fn cell_polygon(&self, c: usize) -> Vec<Point> {
        self.cells[c].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Edge indices of a cell; local edge `i` joins local vertices `i` and `i + 1`.
    pub fn cell_edges(&self, c: usize) -> &[usize] {
        &self.cell_edges[c]
    }

    pub fn area(&self, c: usize) -> f64 {
        self.areas[c]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn barycenter(&self, c: usize) -> Point {
        self.barycenters[c]
    }

    pub fn barycenters(&self) -> &[Point] {
        &self.barycenters
    }

    /// Cell diameter h_K (largest vertex distance).
    pub fn diameter(&self, c: usize) -> f64 {
        self.diameters[c]
    }

    /// Mesh size h = max h_K.
    pub fn h(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn edge_endpoints(&self, e: usize) -> (Point, Point) {
        let [a, b] = self.edges[e].vertices;
        (self.vertices[a], self.vertices[b])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edge_endpoints(e);
        (b - a).norm()
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let (a, b) = self.edge_endpoints(e);
        nalgebra::center(&a, &b)
    }

    /// Unit normal of edge `e` pointing out of its `left` cell.
    pub fn edge_normal(&self, e: usize) -> Vec2 {
        let (a, b) = self.edge_endpoints(e);
        let t = (b - a).normalize();
        Vec2::new(t.y, -t.x)
    }

    /// Cells sharing an edge with `c` (Von Neumann neighbors).
    pub fn edge_neighbors(&self, c: usize) -> &[usize] {
        &self.edge_neighbors[c]
    }

    /// Cells whose closure meets the closure of `c` (Moore neighbors).
    pub fn vertex_neighbors(&self, c: usize) -> &[usize] {
        &self.vertex_neighbors[c]
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_boundary())
            .map(|(i, _)| i)
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.is_boundary())
            .map(|(i, _)| i)
    }

    /// Reassigns boundary markers from a rule on the edge midpoint.
    pub fn with_boundary_markers(mut self, rule: impl Fn(Point) -> i32) -> Self {
        for e in 0..self.edges.len() {
            if self.edges[e].is_boundary() {
                let mid = self.edge_midpoint(e);
                self.edges[e].marker = rule(mid);
            }
        }
        self
    }

    /// Bounding box `(min, max)` of all vertices.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Serializes the mesh in the POLYMESH text format, including nonzero markers.
    pub fn to_polymesh_string(&self) -> String {
        polymesh::write_polymesh(self)
    }

    /// Locates the cell containing `p` by brute force. Intended for probing, not hot loops.
    pub fn locate(&self, p: &Point) -> Option<usize> {
        (0..self.num_cells()).find(|&c| geometry::point_in_polygon(p, &self.cell_polygon(c)))
    }
}

/// Marker rule for the unit square: 1 bottom, 2 right, 3 top, 4 left.
pub fn unit_square_side(p: Point) -> i32 {
    let tol = 1e-12;
    if p.y.abs() < tol {
        1
    } else if (p.x - 1.0).abs() < tol {
        2
    } else if (p.y - 1.0).abs() < tol {
        3
    } else if p.x.abs() < tol {
        4
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_pts() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    #[test]
    fn load_mesh_by_extension() {
        let dir = std::env::temp_dir().join(format!("patchdg-load-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mesh = structured_tri(3);
        let poly = dir.join("m.poly");
        std::fs::write(&poly, mesh.to_polymesh_string()).unwrap();
        let back = load_mesh(&poly, LoadOptions::default()).unwrap();
        assert_eq!(back.cells(), mesh.cells());

        let other = dir.join("m.vtk");
        std::fs::write(&other, "").unwrap();
        assert!(matches!(load_mesh(&other, LoadOptions::default()), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(load_mesh(&dir.join("absent.msh"), LoadOptions::default()), Err(Error::Io(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn single_quad() {
        let m = PolyMesh::from_parts(square_pts(), vec![vec![0, 1, 2, 3]], &[], LoadOptions::default())
            .unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_cells(), 1);
        assert_eq!(m.boundary_edges().count(), 4);
        assert_eq!(m.interior_edges().count(), 0);
        assert_eq!(m.edge_normal(0), Vec2::new(0.0, -1.0));
    }

    #[test]
    fn two_triangles_share_diagonal() {
        let m = PolyMesh::from_parts(
            square_pts(),
            vec![vec![0, 1, 2], vec![0, 2, 3]],
            &[(0, 1, 7)],
            LoadOptions::default(),
        )
        .unwrap();
        assert_eq!(m.interior_edges().count(), 1);
        assert_eq!(m.boundary_edges().count(), 4);
        let e = m.interior_edges().next().unwrap();
        assert_eq!(m.edge(e).left, 0);
        assert_eq!(m.edge(e).right, Some(1));
        assert_eq!(m.edge_neighbors(0), &[1]);
        let marked: Vec<i32> = m.boundary_edges().map(|e| m.edge(e).marker).collect();
        assert!(marked.contains(&7));
    }

    #[test]
    fn clockwise_cell_rejected_or_fixed() {
        let cells = vec![vec![0, 3, 2, 1]];
        let err = PolyMesh::from_parts(square_pts(), cells.clone(), &[], LoadOptions::default());
        assert!(matches!(err, Err(Error::Orientation { cell: 0 })));
        let fixed = PolyMesh::from_parts(square_pts(), cells, &[], LoadOptions { fix_orientation: true })
            .unwrap();
        assert!((fixed.area(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_manifold_edge() {
        let mut pts = square_pts();
        pts.push(Point::new(0.5, -1.0));
        // Three cells on edge (0, 1): two above (overlapping) and one below.
        let cells = vec![vec![0, 1, 2], vec![1, 0, 4], vec![0, 1, 3]];
        let err = PolyMesh::from_parts(pts, cells, &[], LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("non-manifold"), "{err}");
    }

    #[test]
    fn zero_area_cell() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)];
        let err = PolyMesh::from_parts(pts, vec![vec![0, 1, 2]], &[], LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateCell { cell: 0, .. }));
    }

    #[test]
    fn moore_contains_von_neumann() {
        let m = structured_tri(4);
        for c in 0..m.num_cells() {
            for n in m.edge_neighbors(c) {
                assert!(m.vertex_neighbors(c).contains(n));
            }
        }
    }

    #[test]
    fn incidence_is_consistent() {
        for m in [structured_tri(3), structured_quad(3), voronoi_hex(4, 1)] {
            for c in 0..m.num_cells() {
                for &e in m.cell_edges(c) {
                    let edge = m.edge(e);
                    assert!(edge.left == c || edge.right == Some(c));
                }
            }
            for (i, e) in m.edges().iter().enumerate() {
                assert!(m.cell_edges(e.left).contains(&i));
                if let Some(r) = e.right {
                    assert!(m.cell_edges(r).contains(&i));
                }
            }
        }
    }
}
