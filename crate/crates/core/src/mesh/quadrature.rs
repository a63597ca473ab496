//! Gauss rules on segments and composite collapsed-Gauss rules on polygons.

use std::sync::OnceLock;

use super::{PolyMesh, SubTriangulation};
use crate::geometry::Point;

/// Points and weights; weights are in physical units (length or area).
#[derive(Debug, Clone, Default)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

const MAX_CACHED: usize = 32;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, exact to degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    if n <= MAX_CACHED {
        let cache = CACHE.get_or_init(|| (1..=MAX_CACHED).map(compute_gauss_legendre).collect());
        return cache[n - 1].clone();
    }
    compute_gauss_legendre(n)
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(z) and its derivative.
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Legendre rule with `npts` points on the segment `[a, b]`.
pub fn segment_rule(a: &Point, b: &Point, npts: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre(npts);
    let len = (b - a).norm();
    QuadratureRule {
        points: x.iter().map(|t| a + (b - a) * (0.5 * (t + 1.0))).collect(),
        weights: w.iter().map(|wi| 0.5 * len * wi).collect(),
        degree: 2 * npts.max(1) - 1,
    }
}

/// Collapsed (Duffy) Gauss rule on a triangle, exact to total degree `degree`.
pub fn triangle_rule(tri: &[Point; 3], degree: usize) -> QuadratureRule {
    let mut rule = QuadratureRule {
        degree,
        ..Default::default()
    };
    push_triangle(&mut rule, tri, degree);
    rule
}

fn push_triangle(rule: &mut QuadratureRule, tri: &[Point; 3], degree: usize) {
    // The (1 - u) Jacobian raises the degree in u by one.
    let n = (degree + 2).div_ceil(2);
    let (x, w) = gauss_legendre(n);
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let jac = (e1.x * e2.y - e1.y * e2.x).abs();
    for (xu, wu) in x.iter().zip(&w) {
        let u = 0.5 * (xu + 1.0);
        for (xv, wv) in x.iter().zip(&w) {
            let v = 0.5 * (xv + 1.0) * (1.0 - u);
            rule.points.push(tri[0] + e1 * u + e2 * v);
            rule.weights.push(0.25 * wu * wv * (1.0 - u) * jac);
        }
    }
}

/// Composite rule over the sub-triangles of `cell`, exact to total degree `degree`.
pub fn cell_quadrature(sub: &SubTriangulation, cell: usize, degree: usize) -> QuadratureRule {
    let mut rule = QuadratureRule {
        degree,
        ..Default::default()
    };
    for t in sub.cell(cell) {
        push_triangle(&mut rule, &t.vertices, degree);
    }
    rule
}

/// Gauss rule on mesh edge `e`, oriented along the edge, exact to `degree`.
pub fn edge_quadrature(mesh: &PolyMesh, edge: usize, degree: usize) -> QuadratureRule {
    let (a, b) = mesh.edge_endpoints(edge);
    segment_rule(&a, &b, degree / 2 + 1)
}

/// Default cell quadrature degree for reconstruction order `m`.
pub fn default_cell_degree(m: usize) -> usize {
    2 * m + 2
}

/// Default number of Gauss points on edges for order `m`.
pub fn default_edge_points(m: usize) -> usize {
    m + 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{structured_quad, subtriangulate};

    #[test]
    fn gauss_legendre_moments() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} k={k}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn unit_square_integrals() {
        let m = structured_quad(1);
        let sub = subtriangulate(&m).unwrap();
        let rule = cell_quadrature(&sub, 0, 4);
        assert!((rule.measure() - 1.0).abs() < 1e-15);
        let q = rule.integrate(|p| p.x * p.x * p.y * p.y);
        assert!((q - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn edge_rules() {
        let two = segment_rule(&Point::new(0.0, 0.0), &Point::new(0.0, 2.0), 1);
        assert!((two.measure() - 2.0).abs() < 1e-15);
        let unit = segment_rule(&Point::new(0.0, 0.0), &Point::new(1.0, 0.0), 2);
        assert!((unit.integrate(|p| p.x.powi(3)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn triangle_monomials_exact() {
        // Reference triangle: ∫ x^a y^b = a! b! / (a + b + 2)!
        let t = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        for d in 0..=14 {
            let rule = triangle_rule(&t, d);
            for a in 0..=d {
                let b = d - a;
                let q = rule.integrate(|p| p.x.powi(a as i32) * p.y.powi(b as i32));
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((q - exact).abs() <= 1e-13 * exact, "d={d} a={a}");
            }
        }
    }
}
