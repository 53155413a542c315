//! Mixed-integer formulations for disjunctive constraints `x ∈ ⋃ᵢ Cⁱ` over closed
//! convex sets, plus numerical and exact checks of their strength.
//!
//! The crate is layered bottom-up:
//! - [`set_core`]: convex set expressions with support, membership, gauge and
//!   recession oracles.
//! - [`gauge_calculus`]: constraint atoms and the epigraph of a gauge as a block.
//! - [`formulation_builders`]: the formulation families built from a problem spec.
//! - [`model_ir_emit`]: flattening to a model IR, JSON and LP output, instance parsing.
//! - [`analysis`]: cutting-plane optimizer, vertex enumeration, strength checks.

pub mod analysis;
pub mod error;
pub mod fixtures;
pub mod formulation_builders;
pub mod gauge_calculus;
pub mod linalg;
pub mod model_ir_emit;
pub mod sampling;
pub mod set_core;

pub use error::{DfcError, Result};
