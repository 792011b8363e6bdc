//! Online portfolio selection with a volumetric-barrier FTRL learner.
//!
//! Modules are layered bottom-up: [`geometry`] (simplex chart),
//! [`barrier`] (potentials and leverage scores), [`solver`] (self-concordant
//! Newton machinery), [`strategies`], [`markets`] and [`harness`] (game loop,
//! regret accounting and the per-round auditor).

pub mod barrier;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod markets;
pub mod solver;
pub mod strategies;

pub use error::{Error, Result};
