//! Classifies utterances in city-council meeting transcripts as public
//! comments, public-hearing remarks or other speech.
//!
//! Meetings are featurized into observed atoms, grounded against a set of
//! weighted Łukasiewicz rules into a hinge-loss Markov random field, and
//! solved for the MAP assignment with consensus ADMM.

pub mod baseline;
pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod featurize;
pub mod learn;
pub mod logic;
pub mod pipeline;
pub mod solve;
pub mod synth;

pub use error::{Error, Result};
