//! Bias auditing for acoustic joint-health classifiers.
//!
//! The crate synthesizes multi-source recordings from an explicit causal
//! world ([`sigsynth`]), turns recordings into per-repetition features
//! ([`dsp`], [`dataset`]), classifies them with leave-one-subject-out
//! validation ([`learn`]), and runs a battery of shortcut-learning audits
//! ([`audit`]) assembled into reports by [`cli`].

pub mod audit;
pub mod cli;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod labels;
pub mod learn;
pub mod rng;
pub mod sigsynth;

pub use error::{Error, Result};
pub use labels::{Health, Side};
