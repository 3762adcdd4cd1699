//! Finite-dimensional toolkit for quantum states over time.
//!
//! A state over time packs a state and its evolution under a channel into a
//! single bipartite operator whose marginals recover the input state and the
//! channel output. This crate implements the operator/tensor arithmetic, the
//! channel and channel-state machinery, the star-product families that realize
//! states over time, a numerical axiom-verification suite over seeded
//! ensembles, and the acausal conditioning layer (conditional states and
//! belief propagation) built on the symmetric-bloom inverse.

pub mod axioms;
pub mod channel;
pub mod error;
pub mod inference;
pub mod json;
pub mod operator;
pub mod star;
pub mod superop;

// re-exports below
pub use error::{Error, Result};
pub use operator::{DimsSpec, EigenSystem, Operator};

