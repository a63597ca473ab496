use super::PolyMesh;
use crate::geometry::{self, cross, Point};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SubTriangle {
    pub vertices: [Point; 3],
    /// h_T
    pub diameter: f64,
    /// ρ_T
    pub inradius: f64,
}

impl SubTriangle {
    pub fn new(vertices: [Point; 3]) -> Self {
        SubTriangle {
            vertices,
            diameter: geometry::triangle_diameter(&vertices),
            inradius: geometry::triangle_inradius(&vertices),
        }
    }

    pub fn area(&self) -> f64 {
        geometry::signed_area(&self.vertices).abs()
    }

    pub fn shape_ratio(&self) -> f64 {
        self.diameter / self.inradius
    }
}

/// Per-cell partition into triangles.
#[derive(Debug, Clone)]
pub struct SubTriangulation {
    cells: Vec<Vec<SubTriangle>>,
}

impl SubTriangulation {
    pub fn cell(&self, c: usize) -> &[SubTriangle] {
        &self.cells[c]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// N: the largest number of triangles in any cell.
    pub fn max_triangles(&self) -> usize {
        self.cells.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Worst h_T / ρ_T over all triangles.
    pub fn worst_shape_ratio(&self) -> f64 {
        self.cells
            .iter()
            .flatten()
            .map(SubTriangle::shape_ratio)
            .fold(0.0, f64::max)
    }
}

/// Triangulates a simple counter-clockwise polygon. Triangles pass through;
/// other convex polygons are fanned from their barycenter; non-convex ones are
/// ear-clipped.
pub fn triangulate_polygon(poly: &[Point]) -> std::result::Result<Vec<[Point; 3]>, String> {
    let n = poly.len();
    if n < 3 || geometry::signed_area(poly) <= 0.0 {
        return Err("zero or negative area".into());
    }
    if n == 3 {
        return Ok(vec![[poly[0], poly[1], poly[2]]]);
    }
    if geometry::is_convex(poly) {
        let c = geometry::centroid(poly);
        return Ok((0..n).map(|i| [c, poly[i], poly[(i + 1) % n]]).collect());
    }
    ear_clip(poly)
}

fn ear_clip(poly: &[Point]) -> std::result::Result<Vec<[Point; 3]>, String> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::with_capacity(poly.len() - 2);
    let scale = geometry::diameter(poly).powi(2);
    while idx.len() > 3 {
        let k = idx.len();
        let mut clipped = false;
        for i in 0..k {
            let (ia, ib, ic) = (idx[(i + k - 1) % k], idx[i], idx[(i + 1) % k]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if cross(&(b - a), &(c - b)) <= 1e-14 * scale {
                continue;
            }
            let tri = [a, b, c];
            let blocked = idx.iter().any(|&j| {
                j != ia && j != ib && j != ic && {
                    let p = poly[j];
                    let d0 = cross(&(b - a), &(p - a));
                    let d1 = cross(&(c - b), &(p - b));
                    let d2 = cross(&(a - c), &(p - c));
                    d0 >= 0.0 && d1 >= 0.0 && d2 >= 0.0
                }
            });
            if !blocked {
                out.push(tri);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err("ear clipping found no ear".into());
        }
    }
    out.push([poly[idx[0]], poly[idx[1]], poly[idx[2]]]);
    Ok(out)
}

pub fn subtriangulate(mesh: &PolyMesh) -> Result<SubTriangulation> {
    let cells = (0..mesh.num_cells())
        .map(|c| {
            triangulate_polygon(&mesh.cell_polygon(c))
                .map(|tris| tris.into_iter().map(SubTriangle::new).collect())
                .map_err(|msg| Error::DegenerateCell { cell: c, msg })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubTriangulation { cells })
}
