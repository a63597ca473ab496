//! Least-squares polynomial reconstruction from cell values on a patch.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Vec2};
use crate::mesh::{cell_quadrature, PolyMesh, SubTriangulation};
use crate::patch::{self, dim_p, NeighborRule, Patch};
use crate::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Scaled monomials `((x - c.x)/s)^a ((y - c.y)/s)^b`, `a + b <= m`, in graded
/// lexicographic order: 1, x, y, x², xy, y², ...
#[derive(Debug, Clone, PartialEq)]
pub struct PolyBasis {
    pub degree: usize,
    pub center: Point,
    pub scale: f64,
    exps: Vec<(usize, usize)>,
}

impl PolyBasis {
    /// Supports degrees up to 15.
    pub fn new(degree: usize, center: Point, scale: f64) -> Self {
        assert!(degree < 16, "polynomial degree {degree} is not supported");
        let mut exps = Vec::with_capacity(dim_p(degree));
        for d in 0..=degree {
            for b in 0..=d {
                exps.push((d - b, b));
            }
        }
        PolyBasis {
            degree,
            center,
            scale,
            exps,
        }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    /// Exponent pairs `(a, b)` in basis order.
    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exps
    }

    fn powers(&self, p: &Point) -> ([f64; 16], [f64; 16]) {
        let x = (p.x - self.center.x) / self.scale;
        let y = (p.y - self.center.y) / self.scale;
        let (mut px, mut py) = ([1.0; 16], [1.0; 16]);
        for k in 1..=self.degree {
            px[k] = px[k - 1] * x;
            py[k] = py[k - 1] * y;
        }
        (px, py)
    }

    pub fn eval_into(&self, p: &Point, out: &mut [f64]) {
        let (px, py) = self.powers(p);
        for (o, &(a, b)) in out.iter_mut().zip(&self.exps) {
            *o = px[a] * py[b];
        }
    }

    pub fn eval(&self, p: &Point) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(p, &mut out);
        out
    }

    /// Partial derivatives of every basis function, in physical coordinates.
    pub fn grad_into(&self, p: &Point, dx: &mut [f64], dy: &mut [f64]) {
        let (px, py) = self.powers(p);
        let inv = 1.0 / self.scale;
        for (k, &(a, b)) in self.exps.iter().enumerate() {
            dx[k] = if a > 0 { a as f64 * px[a - 1] * py[b] * inv } else { 0.0 };
            dy[k] = if b > 0 { b as f64 * px[a] * py[b - 1] * inv } else { 0.0 };
        }
    }

    /// Value of the polynomial with coefficients `c` at `p`.
    pub fn value(&self, c: &[f64], p: &Point) -> f64 {
        let (px, py) = self.powers(p);
        self.exps.iter().zip(c).map(|(&(a, b), ci)| ci * px[a] * py[b]).sum()
    }

    pub fn gradient(&self, c: &[f64], p: &Point) -> Vec2 {
        let n = self.len();
        let (mut dx, mut dy) = (vec![0.0; n], vec![0.0; n]);
        self.grad_into(p, &mut dx, &mut dy);
        let gx: f64 = dx.iter().zip(c).map(|(a, b)| a * b).sum();
        let gy: f64 = dy.iter().zip(c).map(|(a, b)| a * b).sum();
        Vec2::new(gx, gy)
    }
}

/// Row `i` holds the basis evaluated at node `i`.
pub fn design_matrix(basis: &PolyBasis, nodes: &[Point]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(nodes.len(), basis.len());
    let mut row = vec![0.0; basis.len()];
    for (i, x) in nodes.iter().enumerate() {
        basis.eval_into(x, &mut row);
        for (j, v) in row.iter().enumerate() {
            b[(i, j)] = *v;
        }
    }
    b
}

fn basis_for(patch: &Patch, m: usize) -> PolyBasis {
    let scale = if patch.diameter > 0.0 { patch.diameter } else { 1.0 };
    PolyBasis::new(m, patch.center, scale)
}

/// Thin SVD by one-sided Jacobi rotations on the columns of `B`.
///
/// Yields `W, V` with `B V = W` and `V` orthogonal: the columns of `W` are mutually orthogonal
/// and their norms are the singular values. Accurate to high relative
/// precision even for small singular values.
pub(crate) struct JacobiSvd {
    pub w: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub sigma: Vec<f64>,
}

pub(crate) fn jacobi_svd(b: &DMatrix<f64>) -> JacobiSvd {
    let n = b.ncols();
    let mut w = b.clone();
    let mut v = DMatrix::identity(n, n);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for r in 0..mat.nrows() {
                        let (xp, xq) = (mat[(r, p)], mat[(r, q)]);
                        mat[(r, p)] = c * xp - s * xq;
                        mat[(r, q)] = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = (0..n).map(|j| w.column(j).norm()).collect();
    JacobiSvd { w, v, sigma }
}

fn numerical_rank(sv: &[f64]) -> usize {
    let max = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

/// Checks that no nonzero polynomial of degree `m` vanishes at all patch nodes.
pub fn check_rank(patch: &Patch, m: usize) -> Result<()> {
    let needed = dim_p(m);
    let rank = if patch.len() < needed {
        patch.len().min(needed)
    } else {
        let b = design_matrix(&basis_for(patch, m), &patch.nodes);
        numerical_rank(&jacobi_svd(&b).sigma)
    };
    if rank < needed {
        return Err(Error::RankDeficient {
            cell: patch.owner,
            rank,
            needed,
        });
    }
    Ok(())
}

/// The fitted least-squares map for one cell.
#[derive(Debug, Clone)]
pub struct ReconOp {
    pub patch: Patch,
    pub basis: PolyBasis,
    /// `dim P_m` by `#patch`; column `j` holds the polynomial fitted to the
    /// indicator of member `j`.
    pub coeff_map: DMatrix<f64>,
    /// Ratio of extreme singular values of the design matrix.
    pub condition: f64,
}

/// Least-squares fit through a Jacobi SVD of the design matrix.
pub fn fit_operator(patch: &Patch, m: usize) -> Result<ReconOp> {
    let basis = basis_for(patch, m);
    let needed = basis.len();
    if patch.len() < needed {
        return Err(Error::RankDeficient {
            cell: patch.owner,
            rank: patch.len(),
            needed,
        });
    }
    let b = design_matrix(&basis, &patch.nodes);
    let svd = jacobi_svd(&b);
    let rank = numerical_rank(&svd.sigma);
    if rank < needed {
        return Err(Error::RankDeficient {
            cell: patch.owner,
            rank,
            needed,
        });
    }
    // B⁺ = V Σ⁻² Wᵀ
    let mut scaled_wt = svd.w.transpose();
    for (k, s) in svd.sigma.iter().enumerate() {
        scaled_wt.row_mut(k).scale_mut(1.0 / (s * s));
    }
    let coeff_map = &svd.v * scaled_wt;
    let (lo, hi) = svd.sigma.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    Ok(ReconOp {
        patch: patch.clone(),
        basis,
        coeff_map,
        condition: hi / lo,
    })
}

impl ReconOp {
    pub fn owner(&self) -> usize {
        self.patch.owner
    }

    pub fn members(&self) -> &[usize] {
        &self.patch.members
    }

    fn check_len(&self, dofs: &[f64]) -> Result<()> {
        if dofs.len() != self.patch.len() {
            return Err(Error::DimensionMismatch {
                expected: self.patch.len(),
                got: dofs.len(),
            });
        }
        Ok(())
    }

    /// Polynomial coefficients fitted to the patch values `dofs`.
    pub fn coefficients(&self, dofs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(dofs)?;
        Ok((&self.coeff_map * DVector::from_column_slice(dofs)).as_slice().to_vec())
    }

    pub fn evaluate(&self, dofs: &[f64], p: &Point) -> Result<f64> {
        let c = self.coefficients(dofs)?;
        Ok(self.basis.value(&c, p))
    }

    pub fn evaluate_gradient(&self, dofs: &[f64], p: &Point) -> Result<Vec2> {
        let c = self.coefficients(dofs)?;
        Ok(self.basis.gradient(&c, p))
    }

    /// Coefficient vectors of the reconstructed unit vectors, one per member.
    pub fn basis_columns(&self) -> Vec<Vec<f64>> {
        self.coeff_map.column_iter().map(|c| c.iter().copied().collect()).collect()
    }

    /// Values at `p` of the reconstructions of every member's unit vector.
    pub fn shape_values(&self, p: &Point, phi: &mut [f64], out: &mut [f64]) {
        self.basis.eval_into(p, phi);
        mul_transpose(&self.coeff_map, phi, out);
    }

    /// Gradients at `p` of the reconstructions of every member's unit vector.
    pub fn shape_gradients(&self, p: &Point, scratch: &mut [f64], gx: &mut [f64], gy: &mut [f64]) {
        let n = self.basis.len();
        let (dx, dy) = scratch.split_at_mut(n);
        self.basis.grad_into(p, dx, &mut dy[..n]);
        mul_transpose(&self.coeff_map, dx, gx);
        mul_transpose(&self.coeff_map, &dy[..n], gy);
    }

    /// Evaluates the reconstruction reading member values from a global cell vector.
    pub fn eval_global(&self, u: &[f64], p: &Point) -> f64 {
        let local: Vec<f64> = self.patch.members.iter().map(|&c| u[c]).collect();
        self.evaluate(&local, p).expect("patch length matches by construction")
    }

    pub fn gradient_global(&self, u: &[f64], p: &Point) -> Vec2 {
        let local: Vec<f64> = self.patch.members.iter().map(|&c| u[c]).collect();
        self.evaluate_gradient(&local, p).expect("patch length matches by construction")
    }
}

/// `out = Cᵀ v`
fn mul_transpose(c: &DMatrix<f64>, v: &[f64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = c.column(j).iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

/// Patch depth selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthChoice {
    /// Smallest depth reaching `safety * dim P_m` cells with full rank.
    Auto { safety: f64 },
    Fixed(usize),
}

impl Default for DepthChoice {
    fn default() -> Self {
        DepthChoice::Auto { safety: 2.0 }
    }
}

impl fmt::Display for DepthChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepthChoice::Auto { .. } => f.write_str("auto"),
            DepthChoice::Fixed(t) => write!(f, "{t}"),
        }
    }
}

impl FromStr for DepthChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(DepthChoice::default());
        }
        s.parse()
            .map(DepthChoice::Fixed)
            .map_err(|_| Error::Config(format!("depth must be 'auto' or a non-negative integer, got '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Displacement as a fraction of each cell's diameter.
    pub magnitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchOptions {
    pub rule: NeighborRule,
    pub depth: DepthChoice,
    pub perturbation: Option<Perturbation>,
}

impl Default for PatchOptions {
    fn default() -> Self {
        PatchOptions {
            rule: NeighborRule::VonNeumann,
            depth: DepthChoice::default(),
            perturbation: None,
        }
    }
}

/// One reconstruction operator per cell.
#[derive(Debug, Clone)]
pub struct GlobalRecon {
    pub m: usize,
    pub ops: Vec<ReconOp>,
    /// Sampling node of every cell.
    pub nodes: Vec<Point>,
}

impl GlobalRecon {
    pub fn build(mesh: &PolyMesh, m: usize, opts: &PatchOptions) -> Result<Self> {
        let nodes = match opts.perturbation {
            Some(p) if p.magnitude > 0.0 => patch::perturbed_nodes(mesh, p.magnitude, p.seed),
            _ => mesh.barycenters().to_vec(),
        };
        let ops = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let patch = match opts.depth {
                    DepthChoice::Auto { safety } => {
                        patch::auto_depth_with_nodes(mesh, c, m, opts.rule, safety, &nodes)?
                    }
                    DepthChoice::Fixed(t) => patch::build_patch_with_nodes(mesh, c, t, opts.rule, &nodes),
                };
                fit_operator(&patch, m)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GlobalRecon { m, ops, nodes })
    }

    pub fn op(&self, cell: usize) -> &ReconOp {
        &self.ops[cell]
    }

    pub fn num_cells(&self) -> usize {
        self.ops.len()
    }

    /// `(R u)(p)` for `p` in `cell`.
    pub fn eval(&self, cell: usize, u: &[f64], p: &Point) -> f64 {
        self.ops[cell].eval_global(u, p)
    }

    pub fn gradient(&self, cell: usize, u: &[f64], p: &Point) -> Vec2 {
        self.ops[cell].gradient_global(u, p)
    }

    /// Samples `g` at the sampling nodes.
    pub fn sample(&self, g: impl Fn(&Point) -> f64) -> Vec<f64> {
        self.nodes.iter().map(g).collect()
    }

    pub fn max_condition(&self) -> f64 {
        self.ops.iter().map(|o| o.condition).fold(0.0, f64::max)
    }

    pub fn mean_patch_size(&self) -> f64 {
        self.ops.iter().map(|o| o.patch.len()).sum::<usize>() as f64 / self.ops.len() as f64
    }

    /// Writes every operator as JSON for cross-implementation comparison.
    pub fn write_coeff_maps(&self, w: impl Write) -> Result<()> {
        #[derive(Serialize)]
        struct Entry<'a> {
            cell: usize,
            members: &'a [usize],
            center: [f64; 2],
            scale: f64,
            condition: f64,
            /// Row-major, `dim P_m` rows.
            coeff_map: Vec<Vec<f64>>,
        }
        let entries: Vec<Entry> = self
            .ops
            .iter()
            .map(|o| Entry {
                cell: o.owner(),
                members: o.members(),
                center: [o.basis.center.x, o.basis.center.y],
                scale: o.basis.scale,
                condition: o.condition,
                coeff_map: o.coeff_map.row_iter().map(|r| r.iter().copied().collect()).collect(),
            })
            .collect();
        serde_json::to_writer(w, &entries)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeErrors {
    pub l2: f64,
    /// Broken H¹ seminorm.
    pub h1: f64,
}

/// Errors of reconstructing `g` from its node samples, with no PDE solve.
pub fn approximation_error_probe(
    mesh: &PolyMesh,
    sub: &SubTriangulation,
    global: &GlobalRecon,
    g: impl Fn(&Point) -> f64,
    grad: impl Fn(&Point) -> Vec2,
) -> ProbeErrors {
    let u = global.sample(&g);
    let degree = 2 * global.m + 4;
    let (mut l2, mut h1) = (0.0, 0.0);
    for c in 0..mesh.num_cells() {
        let op = global.op(c);
        let coeffs = op
            .coefficients(&op.members().iter().map(|&j| u[j]).collect::<Vec<_>>())
            .expect("patch length matches by construction");
        for (p, w) in cell_quadrature(sub, c, degree).iter() {
            l2 += w * (g(p) - op.basis.value(&coeffs, p)).powi(2);
            h1 += w * (grad(p) - op.basis.gradient(&coeffs, p)).norm_squared();
        }
    }
    ProbeErrors {
        l2: l2.sqrt(),
        h1: h1.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{structured_quad, structured_tri, subtriangulate, voronoi_hex};
    use crate::patch::build_patch;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bare_patch(nodes: Vec<Point>) -> Patch {
        let center = nodes[0];
        let diameter = crate::geometry::diameter(&nodes);
        Patch {
            owner: 0,
            members: (0..nodes.len()).collect(),
            nodes,
            depth: 0,
            rule: NeighborRule::VonNeumann,
            center,
            diameter,
        }
    }

    #[test]
    fn basis_order_and_center() {
        let b = PolyBasis::new(2, Point::new(1.0, 2.0), 2.0);
        assert_eq!(b.exponents(), &[(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        assert_eq!(b.eval(&Point::new(1.0, 2.0)), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.eval(&Point::new(3.0, 4.0)), vec![1.0; 6]);
        for m in 0..=6 {
            assert_eq!(PolyBasis::new(m, Point::origin(), 1.0).len(), dim_p(m));
        }
    }

    #[test]
    fn constants_reproduced() {
        let p = bare_patch(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
        ]);
        let op = fit_operator(&p, 1).unwrap();
        for q in [Point::new(0.3, 0.7), Point::new(-1.0, 2.0)] {
            assert!((op.evaluate(&[1.0; 4], &q).unwrap() - 1.0).abs() < 1e-14);
            assert!(op.evaluate_gradient(&[1.0; 4], &q).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn collinear_nodes_rejected() {
        let p = bare_patch(vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)]);
        assert!(matches!(fit_operator(&p, 1), Err(Error::RankDeficient { rank: 2, needed: 3, .. })));
        let mut longer: Vec<Point> = (0..8).map(|i| Point::new(i as f64, i as f64)).collect();
        longer.rotate_left(3);
        assert!(matches!(check_rank(&bare_patch(longer), 1), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn dimension_mismatch() {
        let m = structured_quad(3);
        let op = fit_operator(&build_patch(&m, 4, 1, NeighborRule::Moore), 1).unwrap();
        assert!(matches!(
            op.evaluate(&[1.0; 3], &Point::origin()),
            Err(Error::DimensionMismatch { expected: 9, got: 3 })
        ));
    }

    #[test]
    fn linear_reproduction() {
        let m = voronoi_hex(6, 3);
        let op = fit_operator(&build_patch(&m, 12, 2, NeighborRule::VonNeumann), 2).unwrap();
        let g = |p: &Point| 2.0 * p.x + 3.0 * p.y - 1.0;
        let vals: Vec<f64> = op.patch.nodes.iter().map(g).collect();
        let q = m.barycenter(12) + Vec2::new(0.01, -0.02);
        assert!((op.evaluate(&vals, &q).unwrap() - g(&q)).abs() < 1e-12);
        let grad = op.evaluate_gradient(&vals, &q).unwrap();
        assert!((grad - Vec2::new(2.0, 3.0)).norm() < 1e-11);
    }

    #[test]
    fn jacobi_singular_values() {
        // σ² are the roots of t² - 50t + 225.
        let b = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 4.0, 5.0, 0.0, 0.0]);
        let svd = jacobi_svd(&b);
        let mut sv = svd.sigma.clone();
        sv.sort_by(f64::total_cmp);
        assert!((sv[0] - 5f64.sqrt()).abs() < 1e-14 && (sv[1] - 45f64.sqrt()).abs() < 1e-14);
        assert!((&b * &svd.v - &svd.w).abs().max() < 1e-14);
        assert!((svd.v.transpose() * &svd.v - DMatrix::identity(2, 2)).abs().max() < 1e-15);
    }

    #[test]
    fn perturbed_patches_reproduce_constants() {
        // This configuration exposed an inaccurate library SVD.
        let m = crate::mesh::mixed_tri_quad(20, 0.1, 3);
        let opts = PatchOptions {
            perturbation: Some(Perturbation { magnitude: 0.1, seed: 7 }),
            ..Default::default()
        };
        let g = GlobalRecon::build(&m, 2, &opts).unwrap();
        for op in &g.ops {
            let c = op.coefficients(&vec![1.0; op.patch.len()]).unwrap();
            assert!((c[0] - 1.0).abs() < 1e-12, "cell {}", op.owner());
            assert!(c[1..].iter().all(|v| v.abs() < 1e-12), "cell {}", op.owner());
        }
    }

    #[test]
    fn pseudoinverse_oracle() {
        // Evaluate through an independently formed (BᵀB)⁻¹Bᵀ.
        let m = structured_tri(6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for cell in [0, 20, 37] {
            let op = fit_operator(&build_patch(&m, cell, 3, NeighborRule::VonNeumann), 2).unwrap();
            let b = design_matrix(&op.basis, &op.patch.nodes);
            let bt = b.transpose();
            let pinv = (&bt * &b).try_inverse().unwrap() * bt;
            let v: Vec<f64> = (0..op.patch.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c = pinv * DVector::from_column_slice(&v);
            let q = m.barycenter(cell);
            let direct = op.basis.value(c.as_slice(), &q);
            assert!((op.evaluate(&v, &q).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = voronoi_hex(6, 8);
        let op = fit_operator(&build_patch(&m, 20, 2, NeighborRule::VonNeumann), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: Vec<f64> = (0..op.patch.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = m.barycenter(20);
        let h = 1e-6 * m.diameter(20);
        let g = op.evaluate_gradient(&v, &p).unwrap();
        let f = |q: Point| op.evaluate(&v, &q).unwrap();
        let fd = Vec2::new(
            (f(p + Vec2::new(h, 0.0)) - f(p - Vec2::new(h, 0.0))) / (2.0 * h),
            (f(p + Vec2::new(0.0, h)) - f(p - Vec2::new(0.0, h))) / (2.0 * h),
        );
        assert!((g - fd).norm() <= 1e-6 * g.norm());
    }

    #[test]
    fn columns_partition_unity() {
        let m = structured_tri(5);
        let op = fit_operator(&build_patch(&m, 13, 3, NeighborRule::VonNeumann), 2).unwrap();
        let cols = op.basis_columns();
        let p = m.barycenter(13) + Vec2::new(0.02, 0.01);
        let sum: f64 = cols.iter().map(|c| op.basis.value(c, &p)).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for (j, col) in cols.iter().enumerate() {
            let mut e = vec![0.0; op.patch.len()];
            e[j] = 1.0;
            assert!((op.evaluate(&e, &p).unwrap() - op.basis.value(col, &p)).abs() < 1e-13);
        }
        let single = fit_operator(&build_patch(&m, 13, 0, NeighborRule::VonNeumann), 0).unwrap();
        let c = single.basis_columns();
        assert_eq!(c.len(), 1);
        assert!((c[0][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shape_functions_match_columns() {
        let m = structured_quad(4);
        let op = fit_operator(&build_patch(&m, 5, 1, NeighborRule::Moore), 1).unwrap();
        let p = Point::new(0.3, 0.35);
        let n = op.patch.len();
        let (mut phi, mut vals) = (vec![0.0; 3], vec![0.0; n]);
        op.shape_values(&p, &mut phi, &mut vals);
        let (mut scratch, mut gx, mut gy) = (vec![0.0; 6], vec![0.0; n], vec![0.0; n]);
        op.shape_gradients(&p, &mut scratch, &mut gx, &mut gy);
        for (j, col) in op.basis_columns().iter().enumerate() {
            assert!((vals[j] - op.basis.value(col, &p)).abs() < 1e-14);
            let g = op.basis.gradient(col, &p);
            assert!((gx[j] - g.x).abs() < 1e-13 && (gy[j] - g.y).abs() < 1e-13);
        }
    }

    #[test]
    fn probe_exact_for_polynomials() {
        let m = voronoi_hex(8, 1);
        let sub = subtriangulate(&m).unwrap();
        let global = GlobalRecon::build(&m, 2, &PatchOptions::default()).unwrap();
        let e = approximation_error_probe(
            &m,
            &sub,
            &global,
            |p| 1.0 + p.x - 2.0 * p.y * p.x + p.y * p.y,
            |p| Vec2::new(1.0 - 2.0 * p.y, -2.0 * p.x + 2.0 * p.y),
        );
        assert!(e.l2 < 1e-10 && e.h1 < 1e-10, "{e:?}");
    }

    #[test]
    fn coeff_map_dump_is_json() {
        let m = structured_quad(3);
        let global = GlobalRecon::build(&m, 1, &PatchOptions::default()).unwrap();
        let mut buf = Vec::new();
        global.write_coeff_maps(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 9);
        assert_eq!(v[0]["coeff_map"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn depth_choice_parsing() {
        assert_eq!("auto".parse::<DepthChoice>().unwrap(), DepthChoice::Auto { safety: 2.0 });
        assert_eq!("3".parse::<DepthChoice>().unwrap(), DepthChoice::Fixed(3));
        assert!("-1".parse::<DepthChoice>().is_err());
    }
}
