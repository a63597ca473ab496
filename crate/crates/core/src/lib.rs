//! One-unknown-per-element discontinuous Galerkin for second-order elliptic
//! problems on polygonal meshes.
//!
//! Each cell carries a single value. A degree-`m` polynomial is recovered on
//! every cell by a least-squares fit of the values on a patch of surrounding
//! cells, and the symmetric interior penalty form is assembled on those
//! reconstructed polynomials.
//!
//! Pipeline: [`mesh`] → [`patch`] → [`recon`] → [`ipdg`] → [`solve`] → [`analyze`].

pub mod analyze;
mod error;
pub mod geometry;
pub mod ipdg;
pub mod mesh;
pub mod patch;
pub mod recon;
pub mod solve;
pub mod sparse;

pub use error::{Error, Result};
pub use geometry::{Point, Vec2};
pub use ipdg::{assemble, BoundaryCondition, DgSystem, EllipticProblem, AssemblyOptions};
pub use mesh::{LoadOptions, PolyMesh, SubTriangulation};
pub use patch::{NeighborRule, Patch, PatchGeometry};
pub use recon::{GlobalRecon, PolyBasis, ReconOp};
pub use solve::Solution;
