//! Mimetic summation-by-parts finite difference operators (discrete de Rham
//! complexes built from standard SBP operators) and a structure-preserving
//! solver for the 2D transverse-electric Maxwell equations.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod maxwell;
pub mod mesh;
pub mod mimetic;
pub mod operators_2d;
pub mod sbp_operators;
pub mod time_integration;

pub use error::{Error, Result};
