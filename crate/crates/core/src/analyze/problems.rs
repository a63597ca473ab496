//! Manufactured problems with closed-form solutions.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix2;
use serde::Deserialize;

use crate::geometry::{Point, Vec2};
use crate::ipdg::{EllipticProblem, ScalarFn, TensorFn, VectorFn};
use crate::{Error, Result};

pub const BUILTIN_NAMES: [&str; 3] = ["example1", "example2", "example3"];

/// Second derivatives `(uxx, uxy, uyy)`.
type Hessian = (f64, f64, f64);

/// `-div(A ∇u)` from the derivatives of `u` and the divergence of the columns of `A`.
fn source_from(a: Matrix2<f64>, div_a: Vec2, g: Vec2, hess: Hessian) -> f64 {
    let (uxx, uxy, uyy) = hess;
    -(a[(0, 0)] * uxx + 2.0 * a[(0, 1)] * uxy + a[(1, 1)] * uyy + div_a.x * g.x + div_a.y * g.y)
}

/// `u = sin 2πx sin 2πy`, `A = I`, Neumann data from `u`.
pub fn example1() -> EllipticProblem {
    let k = 2.0 * PI;
    let u: ScalarFn = Arc::new(move |p| (k * p.x).sin() * (k * p.y).sin());
    let grad: VectorFn = Arc::new(move |p| {
        Vec2::new(
            k * (k * p.x).cos() * (k * p.y).sin(),
            k * (k * p.x).sin() * (k * p.y).cos(),
        )
    });
    let f: ScalarFn = Arc::new(move |p| 2.0 * k * k * (k * p.x).sin() * (k * p.y).sin());
    EllipticProblem::new("example1", Arc::new(|_| Matrix2::identity()), f)
        .expect("identity coefficient is elliptic")
        .with_exact(u, grad)
        .neumann_from_exact()
}

fn ex2_coefficient(p: &Point) -> Matrix2<f64> {
    let (x, y) = (p.x, p.y);
    Matrix2::new((x + 1.0).powi(2) + y * y, -x * y, -x * y, (x + 1.0).powi(2))
}

fn ex2_derivatives(p: &Point) -> (f64, Vec2, Hessian) {
    let k = 2.0 * PI;
    let (x, y) = (p.x, p.y);
    let (sn, cs) = (k * x * y).sin_cos();
    let (s, c) = (k * y).sin_cos();
    let u = x.powi(3) * y * y + x * sn * s;
    let ux = 3.0 * x * x * y * y + sn * s + k * x * y * cs * s;
    let uy = 2.0 * x.powi(3) * y + k * x * x * cs * s + k * x * sn * c;
    let uxx = 6.0 * x * y * y + 2.0 * k * y * cs * s - k * k * x * y * y * sn * s;
    let uyy = 2.0 * x.powi(3) - k * k * x.powi(3) * sn * s + 2.0 * k * k * x * x * cs * c - k * k * x * sn * s;
    let uxy = 6.0 * x * x * y + 2.0 * k * x * cs * s + k * sn * c - k * k * x * x * y * sn * s + k * k * x * y * cs * c;
    (u, Vec2::new(ux, uy), (uxx, uxy, uyy))
}

/// `u = x³y² + x sin(2πxy) sin(2πy)` with a variable anisotropic coefficient,
/// Dirichlet data from `u`.
pub fn example2() -> EllipticProblem {
    let f: ScalarFn = Arc::new(|p| {
        let (_, g, h) = ex2_derivatives(p);
        // Column divergences: (∂x A11 + ∂y A12, ∂x A12 + ∂y A22).
        let div_a = Vec2::new(2.0 * (p.x + 1.0) - p.x, -p.y);
        source_from(ex2_coefficient(p), div_a, g, h)
    });
    EllipticProblem::new("example2", Arc::new(ex2_coefficient), f)
        .expect("coefficient is elliptic on the unit square")
        .with_exact(Arc::new(|p| ex2_derivatives(p).0), Arc::new(|p| ex2_derivatives(p).1))
        .dirichlet_from_exact()
}

fn ex3_coefficient(p: &Point) -> Matrix2<f64> {
    let k = 2.0 * PI;
    let off = p.x - p.y;
    Matrix2::new(3.0 + (k * p.x).cos(), off, off, 3.0 - (k * p.y).sin())
}

fn ex3_derivatives(p: &Point) -> (f64, Vec2, Hessian) {
    let k = 2.0 * PI;
    let (x, y) = (p.x, p.y);
    let e = ((x * x + y * y) / 2.0).exp();
    let (sp, cq) = (k * (x + y)).sin_cos();
    let (s, c) = (k * y).sin_cos();
    let u = e + sp * s;
    let ux = x * e + k * cq * s;
    let uy = y * e + k * cq * s + k * sp * c;
    let uxx = e + x * x * e - k * k * sp * s;
    let uyy = e + y * y * e - 2.0 * k * k * sp * s + 2.0 * k * k * cq * c;
    let uxy = x * y * e - k * k * sp * s + k * k * cq * c;
    (u, Vec2::new(ux, uy), (uxx, uxy, uyy))
}

/// `u = exp((x²+y²)/2) + sin(2π(x+y)) sin 2πy` with a full variable
/// coefficient, Neumann data from `u`.
pub fn example3() -> EllipticProblem {
    let k = 2.0 * PI;
    let f: ScalarFn = Arc::new(move |p| {
        let (_, g, h) = ex3_derivatives(p);
        let div_a = Vec2::new(-k * (k * p.x).sin() - 1.0, 1.0 - k * (k * p.y).cos());
        source_from(ex3_coefficient(p), div_a, g, h)
    });
    EllipticProblem::new("example3", Arc::new(ex3_coefficient), f)
        .expect("coefficient is elliptic on the unit square")
        .with_exact(Arc::new(|p| ex3_derivatives(p).0), Arc::new(|p| ex3_derivatives(p).1))
        .neumann_from_exact()
}

/// Boundary condition type for generated problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// `u = Σ c x^a y^b` with constant `A`; data and source derived from `u`.
pub fn polynomial_problem(
    name: &str,
    terms: &[(u32, u32, f64)],
    a: Matrix2<f64>,
    boundary: BoundaryKind,
) -> Result<EllipticProblem> {
    let terms: Arc<[(u32, u32, f64)]> = terms.into();
    let pw = |v: f64, e: u32| if e == 0 { 1.0 } else { v.powi(e as i32) };
    let t = terms.clone();
    let u: ScalarFn = Arc::new(move |p| t.iter().map(|&(i, j, c)| c * pw(p.x, i) * pw(p.y, j)).sum());
    let t = terms.clone();
    let grad: VectorFn = Arc::new(move |p| {
        t.iter().fold(Vec2::zeros(), |g, &(i, j, c)| {
            let dx = if i > 0 { c * i as f64 * pw(p.x, i - 1) * pw(p.y, j) } else { 0.0 };
            let dy = if j > 0 { c * j as f64 * pw(p.x, i) * pw(p.y, j - 1) } else { 0.0 };
            g + Vec2::new(dx, dy)
        })
    });
    let t = terms;
    let f: ScalarFn = Arc::new(move |p| {
        let (mut uxx, mut uxy, mut uyy) = (0.0, 0.0, 0.0);
        for &(i, j, c) in t.iter() {
            let (fi, fj) = (i as f64, j as f64);
            if i > 1 {
                uxx += c * fi * (fi - 1.0) * pw(p.x, i - 2) * pw(p.y, j);
            }
            if j > 1 {
                uyy += c * fj * (fj - 1.0) * pw(p.x, i) * pw(p.y, j - 2);
            }
            if i > 0 && j > 0 {
                uxy += c * fi * fj * pw(p.x, i - 1) * pw(p.y, j - 1);
            }
        }
        source_from(a, Vec2::zeros(), Vec2::zeros(), (uxx, uxy, uyy))
    });
    let coefficient: TensorFn = Arc::new(move |_| a);
    let p = EllipticProblem::new(name, coefficient, f)?.with_exact(u, grad);
    Ok(match boundary {
        BoundaryKind::Dirichlet => p.dirichlet_from_exact(),
        BoundaryKind::Neumann => p.neumann_from_exact(),
    })
}

/// JSON description of a polynomial problem:
///
/// ```json
/// {"name": "quad", "solution": [[2, 0, 1.0], [0, 1, -3.0]],
///  "coefficient": [[2.0, 0.5], [0.5, 1.0]], "boundary": "dirichlet"}
/// ```
///
/// `solution` lists `[a, b, c]` terms of `Σ c x^a y^b`; `coefficient` defaults to
/// the identity and `boundary` to Dirichlet.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSpec {
    #[serde(default = "default_custom_name")]
    pub name: String,
    pub solution: Vec<(u32, u32, f64)>,
    #[serde(default = "identity")]
    pub coefficient: [[f64; 2]; 2],
    #[serde(default = "dirichlet")]
    pub boundary: BoundaryKind,
}

fn default_custom_name() -> String {
    "custom".into()
}

fn identity() -> [[f64; 2]; 2] {
    [[1.0, 0.0], [0.0, 1.0]]
}

fn dirichlet() -> BoundaryKind {
    BoundaryKind::Dirichlet
}

pub fn custom_problem(json: &str) -> Result<EllipticProblem> {
    let spec: CustomSpec = serde_json::from_str(json).map_err(|e| Error::Config(format!("custom problem: {e}")))?;
    let c = spec.coefficient;
    polynomial_problem(
        &spec.name,
        &spec.solution,
        Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1]),
        spec.boundary,
    )
}

pub fn builtin_problem(name: &str) -> Result<EllipticProblem> {
    match name {
        "example1" => Ok(example1()),
        "example2" => Ok(example2()),
        "example3" => Ok(example3()),
        other => Err(Error::Config(format!(
            "unknown problem '{other}' (expected one of {}, or a custom JSON file)",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipdg::BoundaryCondition;

    /// `-div(A ∇u)` by central differences of the flux `A ∇u`.
    fn fd_source(p: &EllipticProblem, q: Point) -> f64 {
        let grad = p.exact_gradient.as_ref().unwrap();
        let flux = |x: Point| (p.coefficient)(&x) * grad(&x);
        let h = 1e-5;
        let dx = Vec2::new(h, 0.0);
        let dy = Vec2::new(0.0, h);
        -((flux(q + dx).x - flux(q - dx).x) + (flux(q + dy).y - flux(q - dy).y)) / (2.0 * h)
    }

    fn fd_gradient(p: &EllipticProblem, q: Point) -> Vec2 {
        let u = p.exact.as_ref().unwrap();
        let h = 1e-6;
        Vec2::new(
            (u(&(q + Vec2::new(h, 0.0))) - u(&(q - Vec2::new(h, 0.0)))) / (2.0 * h),
            (u(&(q + Vec2::new(0.0, h))) - u(&(q - Vec2::new(0.0, h)))) / (2.0 * h),
        )
    }

    #[test]
    fn sources_match_finite_differences() {
        for p in [example1(), example2(), example3()] {
            for i in 0..7 {
                for j in 0..7 {
                    let q = Point::new(0.05 + 0.15 * i as f64, 0.07 + 0.14 * j as f64);
                    let f = (p.source)(&q);
                    let fd = fd_source(&p, q);
                    assert!((f - fd).abs() < 1e-5 * (1.0 + f.abs()), "{} at {q:?}: {f} vs {fd}", p.name);
                    let g = p.exact_gradient.as_ref().unwrap()(&q);
                    assert!((g - fd_gradient(&p, q)).norm() < 1e-7 * (1.0 + g.norm()), "{}", p.name);
                }
            }
        }
    }

    #[test]
    fn reference_values() {
        let f = (example1().source)(&Point::new(0.25, 0.25));
        assert!((f - 8.0 * PI * PI).abs() < 1e-12);
        assert!((f - 78.9568).abs() < 1e-4);
        assert_eq!((example2().coefficient)(&Point::new(0.0, 0.0)), Matrix2::identity());
        let a3 = (example3().coefficient)(&Point::new(0.5, 0.0));
        let expect = Matrix2::new(2.0, 0.5, 0.5, 3.0);
        assert!((a3 - expect).abs().max() < 1e-15);
    }

    #[test]
    fn boundary_types() {
        assert!(matches!(example1().condition(1).unwrap(), BoundaryCondition::Neumann(_)));
        assert!(example2().condition(3).unwrap().is_dirichlet());
        assert!(matches!(example3().condition(4).unwrap(), BoundaryCondition::Neumann(_)));
        assert!(builtin_problem("example9").is_err());
    }

    #[test]
    fn ellipticity_bounds() {
        let p = example3();
        assert!(p.c1 > 0.0 && p.c1 <= p.c2);
        let p = example2();
        // A(0,0) = I, so the bounds bracket 1.
        assert!(p.c1 <= 1.0 && p.c2 >= 1.0);
    }

    #[test]
    fn polynomial_and_custom() {
        let a = Matrix2::new(2.0, 0.5, 0.5, 1.0);
        let p = polynomial_problem("p", &[(2, 0, 1.0), (1, 1, 3.0), (0, 2, -1.0)], a, BoundaryKind::Dirichlet).unwrap();
        // -(2·2 + 2·0.5·3 + 1·(-2)) = -5
        assert!(((p.source)(&Point::new(0.3, 0.8)) + 5.0).abs() < 1e-14);
        let q = Point::new(0.4, 0.9);
        assert!((fd_source(&p, q) + 5.0).abs() < 1e-6);
        let c = custom_problem(r#"{"solution": [[1, 0, 2.0]], "boundary": "neumann"}"#).unwrap();
        assert!(matches!(c.condition(0).unwrap(), BoundaryCondition::Neumann(_)));
        assert!(custom_problem(r#"{"solution": 3}"#).is_err());
    }
}
