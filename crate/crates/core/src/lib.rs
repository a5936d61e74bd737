//! Parkinson's disease screening from irregularly sampled, multimodal
//! smartphone tests.
//!
//! The crate covers the whole pipeline: signal cleanup, synchronization of
//! tests into observation sequences, per-modality convolutional encoders, an
//! ODE-RNN with modal and temporal attention, training with cross-validation,
//! metrics, a synthetic cohort generator and the command-line front end.

pub mod attention;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod export;
pub mod metrics;
pub mod model;
pub mod ode;
pub mod optim;
pub mod signal;
pub mod sync;
pub mod synth;
pub mod train;

pub use error::{Error, Result};

/// Derives an independent seed for a named component from a root seed.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = root ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
