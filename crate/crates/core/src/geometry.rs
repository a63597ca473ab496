//! Planar polygon helpers shared by the mesh and patch modules.

use nalgebra::{Point2, Vector2};

pub type Point = Point2<f64>;
pub type Vec2 = Vector2<f64>;

#[inline]
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Shoelace area, positive for counter-clockwise vertex order.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let p = &poly[i];
        let q = &poly[(i + 1) % n];
        acc += p.x * q.y - q.x * p.y;
    }
    0.5 * acc
}

/// Area centroid (barycenter) of a simple polygon.
pub fn centroid(poly: &[Point]) -> Point {
    let n = poly.len();
    // Shift to the first vertex to limit cancellation on far-from-origin cells.
    let o = poly[0];
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let p = poly[i] - o;
        let q = poly[(i + 1) % n] - o;
        let w = p.x * q.y - q.x * p.y;
        a2 += w;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    if a2.abs() < f64::MIN_POSITIVE {
        let s = poly.iter().fold(Vec2::zeros(), |s, p| s + (p - o));
        return o + s / n as f64;
    }
    Point::new(o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2))
}

/// Largest pairwise distance in a point set.
pub fn diameter(points: &[Point]) -> f64 {
    let mut d2: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d2 = d2.max((p - q).norm_squared());
        }
    }
    d2.sqrt()
}

pub fn distance_to_segment(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Crossing-number point-in-polygon test. Points on the boundary may go either way.
pub fn point_in_polygon(p: &Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (&poly[i], &poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Minimum distance from `p` to the polygon boundary.
pub fn distance_to_boundary(p: &Point, poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| distance_to_segment(p, &poly[i], &poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// `p` lies inside the polygon and at least `margin` away from its boundary.
pub fn strictly_inside(p: &Point, poly: &[Point], margin: f64) -> bool {
    point_in_polygon(p, poly) && distance_to_boundary(p, poly) > margin
}

/// Convexity test for a counter-clockwise polygon; collinear vertices are tolerated.
pub fn is_convex(poly: &[Point]) -> bool {
    let n = poly.len();
    let scale = diameter(poly).powi(2);
    (0..n).all(|i| {
        let a = poly[(i + n - 1) % n];
        let b = poly[i];
        let c = poly[(i + 1) % n];
        cross(&(b - a), &(c - b)) >= -1e-12 * scale
    })
}

fn segments_intersect(p1: &Point, p2: &Point, q1: &Point, q2: &Point) -> bool {
    let d1 = cross(&(q2 - q1), &(p1 - q1));
    let d2 = cross(&(q2 - q1), &(p2 - q1));
    let d3 = cross(&(p2 - p1), &(q1 - p1));
    let d4 = cross(&(p2 - p1), &(q2 - p1));
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != 0.0 && d2 != 0.0
}

/// No two non-adjacent edges of the polygon cross.
pub fn is_simple(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 4 {
        return true;
    }
    for i in 0..n {
        let (a, b) = (&poly[i], &poly[(i + 1) % n]);
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (&poly[j], &poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Inradius of a triangle.
pub fn triangle_inradius(t: &[Point; 3]) -> f64 {
    let a = (t[1] - t[2]).norm();
    let b = (t[0] - t[2]).norm();
    let c = (t[0] - t[1]).norm();
    let area = signed_area(t).abs();
    2.0 * area / (a + b + c)
}

pub fn triangle_diameter(t: &[Point; 3]) -> f64 {
    diameter(t)
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, without collinear points.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if cross(&(b - a), &(p - a)) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

/// Minimal width of a convex polygon: the smallest distance between two parallel
/// supporting lines.
pub fn convex_width(hull: &[Point]) -> f64 {
    let n = hull.len();
    if n < 3 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..n {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        let e = b - a;
        let len = e.norm();
        if len == 0.0 {
            continue;
        }
        let far = hull
            .iter()
            .map(|p| cross(&e, &(p - a)).abs() / len)
            .fold(0.0, f64::max);
        best = best.min(far);
    }
    best
}
