//! Mixed discontinuous Galerkin discretization of coupled Stokes-Darcy flow:
//! stress-velocity DG in the fluid, staggered DG in the porous medium,
//! Beavers-Joseph-Saffman interface coupling and a Robin-Robin domain
//! decomposition iteration.

pub mod assembly;
pub mod basis;
pub mod case;
pub mod cli;
pub mod error;
pub mod harness;
pub mod mesh;
pub mod quadrature;
pub mod solve;
pub mod spaces;

pub use error::{Error, Result};
