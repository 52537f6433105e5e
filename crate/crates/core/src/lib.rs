//! Discretized magnetic Schrödinger operators `½ d_α* d_α + V` on model geometries, their
//! separation-of-variables reductions, Bloch–Floquet band structure over abelian covers, and
//! Mañé critical values of the associated classical Lagrangians.

pub mod assembly;
pub mod bloch;
pub mod closedform;
pub mod eigensolve;
pub mod error;
pub mod geometry;
pub mod mane;
pub mod reduction;
pub mod sparse;

pub use error::{Error, Result};
