//! Gradient-only inexact line search (GOLS-I) for mini-batch sub-sampled
//! neural network losses, together with the pieces needed to study it:
//! datasets, seeded batch samplers, fully connected networks with exact
//! backpropagation, univariate directional probes, LS-SGD training loops
//! and the localization analysis of sign changes versus minimizers.
//!
//! The line search itself lives in [`gols`]; everything else feeds it or
//! measures it.

pub mod analyze;
pub mod data;
pub mod error;
pub mod gols;
pub mod model;
pub mod oracles;
pub mod presets;
pub mod probe;
pub mod rng;
pub mod sampler;
pub mod train;

pub use error::{Error, Result};
