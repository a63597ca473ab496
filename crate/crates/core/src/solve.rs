//! Direct solution of the assembled system.

use std::io::Write;

use serde::Serialize;

use crate::geometry::Point;
use crate::ipdg::DgSystem;
use crate::mesh::PolyMesh;
use crate::recon::GlobalRecon;
use crate::sparse::{Cholesky, CsrMatrix};
use crate::{Error, Result};

/// Relative residual accepted after refinement.
pub const RESIDUAL_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverStats {
    /// Stored entries of the Cholesky factor.
    pub factor_nnz: usize,
    /// ‖Ax - b‖ / ‖b‖ of the returned solution.
    pub residual: f64,
    pub refinement_steps: usize,
}

/// One value per cell; `R u_h` is evaluated through the [`GlobalRecon`] used to
/// assemble the system.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub dof_values: Vec<f64>,
    pub stats: SolverStats,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

fn relative(r: &[f64], b: &[f64]) -> f64 {
    let nb = norm(b);
    if nb == 0.0 {
        norm(r)
    } else {
        norm(r) / nb
    }
}

/// Factors and solves with a few steps of iterative refinement.
fn spd_solve(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolverStats)> {
    let chol = Cholesky::factor(a)?;
    let mut x = chol.solve(b);
    let mut r = residual(a, &x, b);
    let mut steps = 0;
    while steps < REFINEMENT_STEPS && relative(&r, b) > 1e-14 {
        let dx = chol.solve(&r);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        r = residual(a, &x, b);
        steps += 1;
    }
    let res = relative(&r, b);
    if res > RESIDUAL_TOL {
        return Err(Error::Singular(format!("relative residual {res:e} after refinement")));
    }
    Ok((
        x,
        SolverStats {
            factor_nnz: chol.nnz(),
            residual: res,
            refinement_steps: steps,
        },
    ))
}

fn annihilates_constants(a: &CsrMatrix) -> bool {
    let r = a.mul_vec(&vec![1.0; a.nrows()]);
    r.iter().all(|v| v.abs() <= 1e-10 * a.max_abs())
}

/// Sparse Cholesky solve; pure Neumann systems go through [`solve_pure_neumann`].
pub fn direct_solve(system: &DgSystem) -> Result<Solution> {
    if system.pure_neumann {
        return solve_pure_neumann(system);
    }
    match spd_solve(&system.matrix, &system.rhs) {
        Ok((dof_values, stats)) => Ok(Solution { dof_values, stats }),
        Err(Error::Factorization { .. }) if annihilates_constants(&system.matrix) => Err(Error::Singular(
            "the constant vector is in the kernel; solve as a pure Neumann problem".into(),
        )),
        Err(e) => Err(e),
    }
}

/// Solves `A x = b` subject to `Σ w_i x_i = 0`, where `w` holds the mean
/// weights of the shape functions, i.e. the reconstructed field has zero mean.
///
/// This is the bordered system `[A w; wᵀ 0]`. With `A 1 = 0` and `Σ w_i = 1`
/// its multiplier is `λ = Σ b_i`, so the solve reduces to the compatible system
/// `A x = b - λ w` with one dof fixed, followed by a constant shift.
pub fn solve_pure_neumann(system: &DgSystem) -> Result<Solution> {
    let a = &system.matrix;
    let n = a.nrows();
    if !annihilates_constants(a) {
        log::warn!("matrix does not annihilate constants to 1e-10; the mean constraint may be inconsistent");
    }
    let w = &system.mean_weights;
    let lambda: f64 = system.rhs.iter().sum();
    let scale: f64 = system.rhs.iter().map(|v| v.abs()).sum();
    if lambda.abs() > 1e-8 * scale {
        log::warn!("Neumann data incompatible: net source {lambda:e} (relative {:e}); solving the compatible projection", lambda / scale);
    }
    let b: Vec<f64> = system.rhs.iter().zip(w).map(|(bi, wi)| bi - lambda * wi).collect();
    if n == 1 {
        return Ok(Solution {
            dof_values: vec![0.0],
            stats: SolverStats {
                factor_nnz: 0,
                residual: 0.0,
                refinement_steps: 0,
            },
        });
    }
    // Fix the dof with the largest diagonal; any dof works when the kernel is the constants.
    let diag = a.diagonal();
    let pin = (0..n).fold(0, |best, i| if diag[i] > diag[best] { i } else { best });
    let reduced = a.without(pin);
    let rb: Vec<f64> = (0..n).filter(|&i| i != pin).map(|i| b[i]).collect();
    let (y, mut stats) = spd_solve(&reduced, &rb)?;
    let mut x = Vec::with_capacity(n);
    x.extend_from_slice(&y[..pin]);
    x.push(0.0);
    x.extend_from_slice(&y[pin..]);
    let mean: f64 = x.iter().zip(w).map(|(xi, wi)| xi * wi).sum();
    for xi in &mut x {
        *xi -= mean;
    }
    stats.residual = relative(&residual(a, &x, &b), &b);
    if stats.residual > RESIDUAL_TOL {
        return Err(Error::Singular(format!(
            "relative residual {:e} of the constrained Neumann solve",
            stats.residual
        )));
    }
    Ok(Solution { dof_values: x, stats })
}

/// `cell_id, centroid_x, centroid_y, dof_value`
pub fn write_solution_csv(mesh: &PolyMesh, solution: &Solution, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["cell_id", "centroid_x", "centroid_y", "dof_value"])?;
    for (c, v) in solution.dof_values.iter().enumerate() {
        let p = mesh.barycenter(c);
        out.write_record(&[c.to_string(), p.x.to_string(), p.y.to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `x, y, cell_id, value` of `R u_h` on an `n` by `n` grid over the bounding box.
/// Points outside the mesh are skipped.
pub fn write_sampled_field_csv(
    mesh: &PolyMesh,
    recon: &GlobalRecon,
    solution: &Solution,
    n: usize,
    w: impl Write,
) -> Result<()> {
    let (lo, hi) = mesh.bounding_box();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y", "cell_id", "value"])?;
    let n = n.max(2);
    for j in 0..n {
        for i in 0..n {
            let t = |k: usize| k as f64 / (n - 1) as f64;
            let p = Point::new(lo.x + (hi.x - lo.x) * t(i), lo.y + (hi.y - lo.y) * t(j));
            if let Some(c) = mesh.locate(&p) {
                let v = recon.eval(c, &solution.dof_values, &p);
                out.write_record(&[p.x.to_string(), p.y.to_string(), c.to_string(), v.to_string()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
