//! Solvation free energy engine: a smooth solute-solvent boundary evolved by
//! geometric flow, coupled self-consistently to grid Poisson-Boltzmann
//! electrostatics, with stability-constrained convex fitting of the model
//! parameters against experimental data.

pub mod electrostatics;
pub mod error;
pub mod fit;
pub mod grid;
pub mod harness;
pub mod mol;
pub mod nonpolar;
pub mod scf;
pub mod surface;

pub use error::{Error, Result};
