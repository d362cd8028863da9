//! Deterministic federated-learning simulation.
//!
//! The crate is organised bottom-up:
//!
//! - [`numcore`]: dense matrices, flat parameter vectors with named segments,
//!   and a one-hidden-layer MLP with hand-written backpropagation.
//! - [`datagen`]: synthetic and IDX datasets, label-skew and feature-shift
//!   partitioners, and the on-disk scenario format.
//! - [`engine`]: the round-based server/client state machine.
//! - [`algorithms`]: the plugin trait and the concrete tFL/pFL algorithms.
//! - [`privacy`]: Gaussian DP noising, closed-form gradient inversion, PSNR.
//!
//! Every random draw flows from an explicit seed, so a scenario plus a run
//! configuration fully determines the produced metrics.

pub mod algorithms;
pub mod datagen;
pub mod engine;
mod error;
pub mod numcore;
pub mod privacy;
pub mod rng;

pub use error::{Error, Result};
