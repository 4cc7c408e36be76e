//! Topology optimization of contact-aided thermo-mechanical regulators.
//!
//! The crate solves the fully coupled, geometrically nonlinear steady
//! thermo-mechanical problem on structured quadrilateral meshes, models
//! internal contact through a compressible third medium, computes adjoint
//! design sensitivities and updates the design with the Method of Moving
//! Asymptotes.

pub mod assembly;
pub mod error;
pub mod material;
pub mod mesh;
pub mod mma;
pub mod nlsolve;
pub mod oracle1d;
pub mod persist;
pub mod problems;
pub mod regularize;
pub mod sensitivity;
pub mod vtk;

pub use error::{DofBlock, Error, Result};
