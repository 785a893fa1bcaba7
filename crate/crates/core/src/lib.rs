//! Non-classicality toolkit for bosonic states.
//!
//! * [`fock`]: truncated multimode Fock-space operators.
//! * [`quasiprob`]: characteristic functions and exact regularised P distributions.
//! * [`state`]: states that combine a Fock part with analytic P components.
//! * [`depth`]: non-classicality depth, Bochner cross-check, non-positivity certificates.
//! * [`scaling`]: the phase-space scaling map, its dual, detection and witnesses.
//! * [`entanglement`]: PPT/negativity and the entanglement depth pipeline.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod depth;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod io;
pub mod quasiprob;
pub mod scaling;
pub mod state;
mod util;

pub use error::{Error, Result};
pub use fock::{coherent_expectation, coherent_vector, CoherentPoint, FockOperator, Spectrum, C64};
pub use quasiprob::{char_normal, q_function, regularize, CharFunction, CharPoly, Density, PolyGaussian, Regularize};
pub use state::{BosonicState, PComponent};
