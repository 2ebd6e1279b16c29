//! Mixed-dimensional elliptic solver in 2D.
//!
//! A bulk Poisson problem is coupled through Robin conditions to Poisson
//! problems on a family of embedded line interfaces. The crate provides:
//!
//! * [`geometry`] — planar arrangement of interface segments inside a convex
//!   polygon (bulk regions, interface segments, junctions, adjacency),
//! * [`mesh`] — interface-fitted constrained Delaunay triangulation with
//!   nested regular (red) refinement,
//! * [`space`] — duplicated bulk degrees of freedom (one per triangle fan)
//!   and continuous interface degrees of freedom,
//! * [`assembly`] — the 2x2 block system over free dofs,
//! * [`solver`] — block factorization, Schur complement, PCG and bulk
//!   back-substitution,
//! * [`precond`] — two-level additive Schwarz preconditioner on the
//!   interface space,
//! * [`analysis`] — interface graph Laplacian/mass diagnostics, coercivity
//!   walk and corner singular exponents.

pub mod analysis;
pub mod assembly;
pub mod geometry;
pub mod mesh;
pub mod precond;
pub mod solver;
pub mod space;
pub mod sparse;

pub use geometry::{MixedDomain, Segment2D};
pub use mesh::FittedMesh;
pub use space::DofMap;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input segment {index}: zero length after snapping")]
    DegenerateSegment { index: usize },
    #[error("domain polygon is not convex (or has fewer than 3 vertices)")]
    NonConvexPolygon,
    #[error("segment {index} endpoint lies outside the domain polygon")]
    SegmentOutsideDomain { index: usize },
    #[error("interfaces pass within snap tolerance without intersecting near ({x}, {y})")]
    CloseInterfaces { x: f64, y: f64 },
    #[error("triangulation failed: {0}")]
    Meshing(String),
    #[error("non-positive coefficient on {kind} element {index}")]
    NonPositiveCoefficient { kind: &'static str, index: usize },
    #[error("system has no free degrees of freedom")]
    EmptySystem,
    #[error("Cholesky factorization broke down in bulk region {region}")]
    FactorizationBreakdown { region: usize },
    #[error("matrix is not positive definite: {0}")]
    NotSpd(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dense Schur matrix of size {n1} exceeds the memory cap {cap}; use the per-subspace assembly path")]
    SchurMemoryCap { n1: usize, cap: usize },
    #[error("coarse patch {node} has interface dofs but a singular Galerkin matrix")]
    SingularPatch { node: usize },
    #[error("inadmissible corner angle {omega}")]
    InadmissibleAngle { omega: f64 },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
