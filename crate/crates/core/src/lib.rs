//! Quasi-static phase-field fracture with the Ambrosio-Tortorelli energy.
//!
//! The crate discretizes the antiplane (scalar) model on structured 1D and 2D
//! grids and evolves the pair `(u, v)` through a time-discrete sequence of
//! constrained minimizations: at each step the phase field may only decrease,
//! so cracks never heal. Around the solver sits an analysis layer with
//! sharp-interface reference solutions, crack extraction and `eps`-sweeps.

// `!(x > 0.0)` also rejects NaN, which is the point of writing it that way.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod audit;
pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod evolution;
pub mod form;
pub mod grid;
pub mod output;
pub mod solve;
pub mod sparse;

pub use energy::{ATParams, EnergyParts, EnergyRecord};
pub use error::{Error, Result};
pub use grid::{Face, Field, Grid};
