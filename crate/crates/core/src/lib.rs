//! Score-based generative diffusion with passive (white) and active
//! (exponentially time-correlated) noise.

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod format;
pub mod process;
pub mod metrics;
pub mod mixture;
pub mod net;
pub mod rng;
pub mod samplers;
pub mod scores;
mod special;

pub use error::{Error, Result};
pub use process::{DiffusionParams, JointState, KernelMoments, ProcessKind};
