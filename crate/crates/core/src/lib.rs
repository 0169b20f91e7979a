//! Triangle mesh extraction from unsigned distance fields.
//!
//! The pipeline has four stages:
//!
//! 1. [`octree`] adaptively subdivides the domain and prunes cells whose
//!    center distance proves they cannot touch the surface.
//! 2. [`vertexer`] samples every surviving leaf on a shared lattice, filters
//!    unreliable samples and solves a per-cell quadratic error function for a
//!    single surface point, classified as corner, edge or plane.
//! 3. [`mesher`] connects the points of every grid edge whose four incident
//!    cells are occupied, rejects faces whose normals disagree with the
//!    classification, and optionally derives manifold connectivity from the
//!    outer envelope of a blocky proxy model.
//! 4. [`metrics`] compares a result against a reference mesh.
//!
//! Distance sources live in [`field`]; [`pipeline`] wires the stages together.

pub mod field;
pub mod field_spec;
pub mod grid;
pub mod io;
pub mod mesh;
pub mod mesher;
pub mod metrics;
pub mod octree;
pub mod pipeline;
pub mod shapes;
pub mod vertexer;

pub use field::{FieldError, FieldResponse, ScalarField};
pub use grid::{CellIndex, Domain};
pub use mesh::IndexedMesh;
pub use pipeline::{extract, ExtractConfig, ExtractReport, Extraction};

/// Points and vectors are always double precision.
pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
