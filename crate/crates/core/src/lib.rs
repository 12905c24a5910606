//! Stencil-based incomplete factorizations on block-structured tetrahedral grids.

pub mod dofs;
pub mod error;
pub mod assembly;
pub mod geometry;
pub mod ilu;
pub mod lfa;
pub mod mesh;
pub mod multigrid;
pub mod par;
pub mod scenario;
pub mod schur;
pub mod sparse;
pub mod surrogate;

pub use error::{Error, Result};
