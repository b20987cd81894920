//! Finite-volume solver and verification toolkit for scalar conservation
//! laws on the unit sphere.

pub mod cli;
pub mod diagnostics;
pub mod expr;
pub mod flux;
pub mod fvm;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
