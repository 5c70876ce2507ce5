//! Nonlinear Craig-Bampton (NL-CB) reduced-order modelling of geometrically
//! nonlinear beam assemblies.
//!
//! The pipeline is:
//!
//! 1. [`fe`]: planar von Kármán beam kernel (with optional shallow initial
//!    curvature), global operators and exact element force tensors.
//! 2. [`partition`]: substructures, compatibility and localization operators,
//!    primal assembly.
//! 3. [`basis`]: fixed-interface modes, static modes and interface bases.
//! 4. [`manifold`]: quadratic substructure manifold obtained by statically
//!    condensing the high-frequency fixed-interface modes.
//! 5. [`rom`]: Galerkin projection on the manifold tangent space, truncated at
//!    cubic order, and primal assembly of the reduced model.
//! 6. [`tint`]: Newmark-β / Newton-Raphson integration shared by the full and
//!    reduced systems.
//! 7. [`verify`]: brute-force oracles used by the test suites.

pub mod basis;
pub mod error;
pub mod fe;
pub mod linalg;
pub mod manifold;
pub mod partition;
pub mod rom;
pub mod tensor;
pub mod tint;
pub mod verify;

pub use error::{Error, Result};
