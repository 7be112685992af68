//! Finite element spaces of the finest level.

pub mod local;
pub mod sequence;

pub use sequence::{interpolate, Coefficient, LocalMatrix, SequenceLevel};
