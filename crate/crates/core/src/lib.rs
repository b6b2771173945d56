//! Simulation of a single trapped ion coupled to a two-mode (σ⁺/σ⁻) fiber
//! cavity on the 935 nm D₃/₂ ↔ ³D[3/2]₁/₂ transition of ¹⁷⁴Yb⁺.
//!
//! The crate is layered bottom-up: [`hilbert`] builds the composite space and
//! sparse operators, [`model`] assembles Lindblad models, [`solver`] evolves
//! them, [`observables`] turns trajectories and density matrices into
//! measured quantities, [`budget`] holds the closed-form efficiency algebra,
//! and [`experiments`] ties everything to configuration files and output.

pub mod budget;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod model;
pub mod observables;
pub mod solver;
pub mod units;

pub use error::{Error, Result};
