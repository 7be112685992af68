//! Element-agglomeration algebraic multigrid (AMGe) for de Rham sequences.
//!
//! The crate builds a hierarchy of coarse de Rham sequences
//! (H1 -> H(curl) -> H(div) -> L2) on agglomerated tetrahedral meshes and uses
//! it to precondition H(curl) and H(div) systems: hybrid smoothers on every
//! level, an auxiliary-space preconditioner on the coarsest one, all wrapped
//! in a V-cycle driven by preconditioned conjugate gradients.

pub mod agglomeration;
pub mod coarsen;
pub mod error;
pub mod fem;
pub mod hierarchy;
pub mod la;
pub mod mesh;
pub mod solvers;
pub mod topology;
pub mod verify;

pub use error::{Error, Result};
