//! Sensible adversarial training at desk scale.
//!
//! The crate is organized bottom-up:
//!
//! - [`autodiff`]: `f64` tensors, a per-computation tape and SGD.
//! - [`nn`]: linear, MLP and capacity-`d` CNN classifiers.
//! - [`attacks`]: FGSM, PGD, norm-ball projection and restart evaluation.
//! - [`sense`]: sensible adversarial examples, truncated losses and the
//!   natural / regular-adversarial / sensible training loops.
//! - [`oracles`]: closed-form Bayes risks, Monte-Carlo and grid oracles.
//! - [`data`]: synthetic samplers, MNIST IDX loading and batching.
//! - [`harness`]: configuration, experiment runs and CSV emission.

// Negated float comparisons are how NaN gets rejected along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod harness;
pub mod nn;
pub mod oracles;
mod par;
pub mod sense;

pub use error::{Error, Result};
