use serde::Serialize;

use super::{PolyMesh, SubTriangulation};

pub const DEFAULT_SIGMA_THRESHOLD: f64 = 20.0;

/// Shape-regularity diagnostics of a mesh and its sub-triangulation.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    /// Maximum number of sub-triangles in a cell.
    pub n_max: usize,
    /// max h_T / ρ_T
    pub sigma: f64,
    /// max h_K / h_T
    pub rho1: f64,
    /// max h_K
    pub h: f64,
    pub warnings: Vec<String>,
}

pub fn validate_regularity(
    mesh: &PolyMesh,
    sub: &SubTriangulation,
    sigma_threshold: f64,
) -> RegularityReport {
    let mut sigma: f64 = 0.0;
    let mut rho1: f64 = 1.0;
    let mut warnings = Vec::new();
    let mut worst_cell = 0;
    for c in 0..mesh.num_cells() {
        let hk = mesh.diameter(c);
        for t in sub.cell(c) {
            let ratio = t.shape_ratio();
            if ratio > sigma {
                sigma = ratio;
                worst_cell = c;
            }
            rho1 = rho1.max(hk / t.diameter);
        }
    }
    if sigma > sigma_threshold {
        let msg = format!(
            "sub-triangle shape ratio {sigma:.3} in cell {worst_cell} exceeds threshold {sigma_threshold}"
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    RegularityReport {
        n_max: sub.max_triangles(),
        sigma,
        rho1,
        h: mesh.h(),
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::mesh::{structured_rect, structured_tri, subtriangulate, LoadOptions};

    #[test]
    fn triangles_are_their_own_subdivision() {
        let m = structured_tri(4);
        let r = validate_regularity(&m, &subtriangulate(&m).unwrap(), DEFAULT_SIGMA_THRESHOLD);
        assert_eq!(r.n_max, 1);
        assert_eq!(r.rho1, 1.0);
        assert!(r.warnings.is_empty());
        // Right isosceles triangle with legs s: h/ρ = √2 s / ((2 - √2) s / 2).
        let expect = 2f64.sqrt() * 2.0 / (2.0 - 2f64.sqrt());
        assert!((r.sigma - expect).abs() < 1e-12);
    }

    #[test]
    fn hexagon_fan_count() {
        let hex: Vec<Point> = (0..6)
            .map(|k| {
                let a = std::f64::consts::PI / 3.0 * k as f64;
                Point::new(a.cos(), a.sin())
            })
            .collect();
        let m = PolyMesh::from_parts(hex, vec![(0..6).collect()], &[], LoadOptions::default()).unwrap();
        let r = validate_regularity(&m, &subtriangulate(&m).unwrap(), DEFAULT_SIGMA_THRESHOLD);
        assert_eq!(r.n_max, 6);
    }

    #[test]
    fn stretched_quad_warns() {
        // 100 x 1 rectangle fanned from its center: the long triangles have base 100,
        // height 1/2; the short ones base 1, height 50.
        let m = structured_rect(1, 1, 0.0, 100.0, 0.0, 1.0);
        let r = validate_regularity(&m, &subtriangulate(&m).unwrap(), DEFAULT_SIGMA_THRESHOLD);
        let ratio = |base: f64, height: f64| {
            let side = (0.25 * base * base + height * height).sqrt();
            let h_t = base.max(side);
            let rho = 2.0 * (0.5 * base * height) / (base + 2.0 * side);
            h_t / rho
        };
        let expect = ratio(100.0, 0.5).max(ratio(1.0, 50.0));
        assert!((r.sigma - expect).abs() < 1e-9 * expect);
        assert!(r.sigma > DEFAULT_SIGMA_THRESHOLD);
        assert_eq!(r.warnings.len(), 1);
    }
}
