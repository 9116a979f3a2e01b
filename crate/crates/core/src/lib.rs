//! Conforming/nonconforming virtual elements for linear elasticity on polyhedral meshes.
//!
//! Every boundary face of an element is either conforming (vertex, edge and
//! moment DoFs shared with the neighbour) or nonconforming (only moments up to
//! degree `k - 1`). Faces lying on a cylinder are handled through their exact
//! parametrization.
//!
//! The numerical core is generic over [`scalar::Real`]. The aliases below fix
//! the scalar for the common cases.
//!
//! ```
//! use cnc_vem::harness::{compute_errors, solve_case, Case, MeshSpec, RunOptions};
//!
//! let mesh = MeshSpec::Box(2).build().unwrap();
//! let sol = solve_case(Case::Patch, mesh, &RunOptions::new(1)).unwrap();
//! let (e_l2, e_h1) = compute_errors(&sol.disc, &sol.u, sol.exact.as_ref()).unwrap();
//! assert!(e_l2 < 1e-10 && e_h1 < 1e-10);
//! ```

pub mod curved;
pub mod elasticity;
pub mod element_space;
pub mod face_space;
pub mod geometry;
pub mod harness;
pub mod mesh;
pub mod polybasis;
pub mod quadrature;
pub mod scalar;
pub mod sparse;

pub use elasticity::{BoundaryCondition, Discretization, Material, NeumannMode, Problem};
pub use mesh::{FaceKind, KindRule, Mesh, MeshError};
pub use scalar::Real;
pub use sparse::SolverKind;

pub type Mesh64 = mesh::Mesh<f64>;
pub type Mesh32 = mesh::Mesh<f32>;
pub type Discretization64 = elasticity::Discretization<f64>;
pub type Discretization32 = elasticity::Discretization<f32>;
pub type Problem64 = elasticity::Problem<f64>;
pub type Material64 = elasticity::Material<f64>;
pub type ElementSpace64 = element_space::ElementSpace<f64>;
pub type FaceSpace64 = face_space::FaceSpace<f64>;
pub type MonomialBasis64 = polybasis::MonomialBasis<f64>;
pub type Vec3f = geometry::Vec3<f64>;
