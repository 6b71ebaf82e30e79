//! Finite-range Markov approximations to Gibbs measures of one-dimensional
//! lattice chains with long-range pair interactions.
//!
//! The range-`r` truncation of the potential defines a transfer matrix on
//! words of length `r`; its Perron data give an `r`-step Markov measure whose
//! cylinder probabilities, correlations, pressure and entropy can be compared
//! against periodic-point measures and against the analytic bounds on the
//! approximation, mixing and entropy errors.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod interactions;
pub mod lattice;
pub mod measures;
mod series;
pub mod thermo;
pub mod transfer;

pub use error::{Error, Result};
pub use interactions::{GrowthSpec, InteractionConstants, InteractionKind, PairInteraction};
pub use lattice::{Alphabet, CylinderSpec, Word};
pub use measures::{CylinderMeasure, MarkovMeasure, PeriodicMeasure};
pub use series::Summed;
pub use transfer::{perron, PerronOptions, SpectralData, TransferMatrix};
