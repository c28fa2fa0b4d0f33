//! Random subjective expected utility over Anscombe–Aumann acts: finite static and
//! dynamic representations, exact forward evaluation, axiom probes, identification
//! from choice oracles, menu preferences, and comparative statics.
//!
//! All probabilities are exact rationals ([`rational::Q`]).

pub mod acts;
pub mod axioms;
pub mod comparative;
pub mod dynamic;
pub mod error;
pub mod fixtures;
pub mod history_axioms;
pub mod identify;
pub mod io;
pub mod lp;
pub mod preferences;
pub mod rational;
pub mod separation;
pub mod static_model;

pub use error::{Error, Result};
