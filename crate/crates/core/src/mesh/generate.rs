//! Built-in mesh families on the unit square, used by tests and studies.
//!
//! All generators tag the sides of the square 1 (bottom), 2 (right), 3 (top)
//! and 4 (left).

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{unit_square_side, LoadOptions, PolyMesh};
use crate::geometry::{self, Point};
use crate::{Error, Result};

fn grid_vertices(nx: usize, ny: usize, x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<Point> {
    let mut v = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            v.push(Point::new(
                x0 + (x1 - x0) * i as f64 / nx as f64,
                y0 + (y1 - y0) * j as f64 / ny as f64,
            ));
        }
    }
    v
}

fn build(vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> PolyMesh {
    PolyMesh::from_parts(vertices, cells, &[], LoadOptions::default())
        .expect("built-in generator produced an invalid mesh")
        .with_boundary_markers(unit_square_side)
}

/// `nx` by `ny` rectangles on `[x0, x1] x [y0, y1]`.
pub fn structured_rect(nx: usize, ny: usize, x0: f64, x1: f64, y0: f64, y1: f64) -> PolyMesh {
    assert!(nx > 0 && ny > 0);
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    build(grid_vertices(nx, ny, x0, x1, y0, y1), cells)
}

/// `n` by `n` squares on the unit square.
pub fn structured_quad(n: usize) -> PolyMesh {
    structured_rect(n, n, 0.0, 1.0, 0.0, 1.0)
}

/// `n` by `n` squares, each split into two right triangles along the same diagonal.
pub fn structured_tri(n: usize) -> PolyMesh {
    assert!(n > 0);
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            cells.push(vec![idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    build(grid_vertices(n, n, 0.0, 1.0, 0.0, 1.0), cells)
}

/// `n` by `n` squares in a checkerboard of quadrilaterals and triangle pairs.
/// Interior vertices are displaced by up to `jitter * (1/n)` (deterministic in `seed`).
pub fn mixed_tri_quad(n: usize, jitter: f64, seed: u64) -> PolyMesh {
    assert!(n > 0 && (0.0..0.3).contains(&jitter));
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = grid_vertices(n, n, 0.0, 1.0, 0.0, 1.0);
    if jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = jitter / n as f64;
        for j in 1..n {
            for i in 1..n {
                let v = &mut vertices[idx(i, j)];
                v.x += a * rng.random_range(-1.0..1.0);
                v.y += a * rng.random_range(-1.0..1.0);
            }
        }
    }
    let mut cells = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i + j) % 2 == 0 {
                cells.push(vec![a, b, c, d]);
            } else if (i / 2 + j) % 2 == 0 {
                cells.push(vec![a, b, c]);
                cells.push(vec![a, c, d]);
            } else {
                cells.push(vec![a, b, d]);
                cells.push(vec![b, c, d]);
            }
        }
    }
    build(vertices, cells)
}

/// Clips a convex polygon to the half-plane `{x : (x - mid) . dir <= 0}`.
fn clip(poly: &[Point], mid: &Point, dir: &geometry::Vec2) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let dp = (p - mid).dot(dir);
        let dq = (q - mid).dot(dir);
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            let t = dp / (dp - dq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

struct Buckets {
    size: f64,
    n: usize,
    cells: Vec<Vec<usize>>,
}

impl Buckets {
    fn new(points: &[Point], size: f64) -> Self {
        let n = (1.0 / size).ceil() as usize + 1;
        let mut cells = vec![Vec::new(); n * n];
        for (i, p) in points.iter().enumerate() {
            let (bx, by) = Self::key(p, size, n);
            cells[by * n + bx].push(i);
        }
        Buckets { size, n, cells }
    }

    fn key(p: &Point, size: f64, n: usize) -> (usize, usize) {
        let f = |v: f64| ((v / size).floor().max(0.0) as usize).min(n - 1);
        (f(p.x), f(p.y))
    }

    fn within(&self, p: &Point, radius: f64) -> Vec<usize> {
        let r = (radius / self.size).ceil() as isize;
        let (bx, by) = Self::key(p, self.size, self.n);
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (bx as isize + dx, by as isize + dy);
                if x < 0 || y < 0 || x >= self.n as isize || y >= self.n as isize {
                    continue;
                }
                out.extend_from_slice(&self.cells[y as usize * self.n + x as usize]);
            }
        }
        out
    }
}

fn voronoi_cells(gens: &[Point], spacing: f64) -> Vec<Vec<Point>> {
    let buckets = Buckets::new(gens, spacing);
    let square = [
        Point::new(0.0, 0.0),
        Point::new(1.0, 0.0),
        Point::new(1.0, 1.0),
        Point::new(0.0, 1.0),
    ];
    gens.iter()
        .enumerate()
        .map(|(i, g)| {
            let mut radius = 3.0 * spacing;
            loop {
                let mut cand = buckets.within(g, radius);
                cand.retain(|&j| j != i);
                cand.sort_by(|&a, &b| (gens[a] - g).norm_squared().total_cmp(&(gens[b] - g).norm_squared()));
                let mut poly = square.to_vec();
                for &j in &cand {
                    let dir = gens[j] - g;
                    poly = clip(&poly, &nalgebra::center(g, &gens[j]), &dir);
                }
                let reach = poly.iter().map(|p| (p - g).norm()).fold(0.0, f64::max);
                if 2.0 * reach <= radius {
                    return poly;
                }
                radius = 2.0 * reach + spacing;
            }
        })
        .collect()
}

/// Clipped Voronoi tessellation of the unit square from a jittered hexagonal
/// lattice of roughly `n` generators per row, relaxed by a few Lloyd steps.
/// Produces mostly hexagons with pentagons and quadrilaterals along the boundary.
pub fn voronoi_hex(n: usize, seed: u64) -> PolyMesh {
    voronoi_hex_with(n, seed, VORONOI_JITTER, VORONOI_LLOYD_STEPS)
}

pub const VORONOI_JITTER: f64 = 0.1;
pub const VORONOI_LLOYD_STEPS: usize = 4;

/// [`voronoi_hex`] with generator jitter `jitter * (1/n)` (below 0.45) and
/// `lloyd` relaxation steps. Less relaxation leaves a less regular mesh.
pub fn voronoi_hex_with(n: usize, seed: u64, jitter: f64, lloyd: usize) -> PolyMesh {
    assert!(n >= 2 && (0.0..0.45).contains(&jitter));
    let a = 1.0 / n as f64;
    let rows = ((2.0 / (3f64.sqrt() * a)).round() as usize).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gens = Vec::with_capacity(n * rows);
    for j in 0..rows {
        let y = (j as f64 + 0.5) / rows as f64;
        let shift = if j % 2 == 0 { 0.25 } else { 0.75 };
        for i in 0..n {
            let x = (i as f64 + shift) * a;
            let jx = jitter * a * rng.random_range(-1.0..1.0);
            let jy = jitter * a * rng.random_range(-1.0..1.0);
            gens.push(Point::new((x + jx).clamp(0.01 * a, 1.0 - 0.01 * a), y + jy));
        }
    }
    for _ in 0..lloyd {
        let cells = voronoi_cells(&gens, a);
        for (g, poly) in gens.iter_mut().zip(&cells) {
            *g = geometry::centroid(poly);
        }
    }
    let polys = voronoi_cells(&gens, a);

    let tol = 1e-9 * a;
    let mut lookup: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut cells = Vec::with_capacity(polys.len());
    for poly in &polys {
        let mut cell: Vec<usize> = Vec::with_capacity(poly.len());
        for p in poly {
            let key = ((p.x / tol).round() as i64, (p.y / tol).round() as i64);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(&v) = lookup.get(&(key.0 + dx, key.1 + dy)) {
                        found = Some(v);
                        break 'search;
                    }
                }
            }
            let v = found.unwrap_or_else(|| {
                lookup.insert(key, vertices.len());
                vertices.push(*p);
                vertices.len() - 1
            });
            if cell.last() != Some(&v) {
                cell.push(v);
            }
        }
        while cell.len() > 1 && cell.first() == cell.last() {
            cell.pop();
        }
        cells.push(cell);
    }
    build(vertices, cells)
}

/// Parses `tri:N`, `quad:N`, `mixed:N[:jitter[:seed]]` or
/// `voronoi:N[:seed[:jitter[:lloyd]]]`.
pub fn builtin_mesh(spec: &str) -> Result<PolyMesh> {
    let bad = |msg: &str| Error::Config(format!("mesh spec '{spec}': {msg}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let n: usize = parts
        .get(1)
        .ok_or_else(|| bad("missing size"))?
        .parse()
        .map_err(|_| bad("size must be a positive integer"))?;
    if n == 0 {
        return Err(bad("size must be a positive integer"));
    }
    let float = |i: usize, default: f64| -> Result<f64> {
        parts.get(i).map_or(Ok(default), |s| s.parse().map_err(|_| bad("expected a number")))
    };
    let int = |i: usize, default: u64| -> Result<u64> {
        parts.get(i).map_or(Ok(default), |s| s.parse().map_err(|_| bad("expected a non-negative integer")))
    };
    let max_parts = match parts[0] {
        "tri" | "quad" => 2,
        "voronoi" => 5,
        "mixed" => 4,
        _ => return Err(bad("unknown family (expected tri, quad, mixed or voronoi)")),
    };
    if parts.len() > max_parts {
        return Err(bad("too many fields"));
    }
    Ok(match parts[0] {
        "tri" => structured_tri(n),
        "quad" => structured_quad(n),
        "mixed" => {
            let jitter = float(2, 0.0)?;
            if !(0.0..0.3).contains(&jitter) {
                return Err(bad("jitter must lie in [0, 0.3)"));
            }
            mixed_tri_quad(n, jitter, int(3, 0)?)
        }
        _ => {
            if n < 2 {
                return Err(bad("voronoi needs size >= 2"));
            }
            let jitter = float(3, VORONOI_JITTER)?;
            if !(0.0..0.45).contains(&jitter) {
                return Err(bad("jitter must lie in [0, 0.45)"));
            }
            let lloyd = int(4, VORONOI_LLOYD_STEPS as u64)? as usize;
            voronoi_hex_with(n, int(2, 0)?, jitter, lloyd)
        }
    })
}
