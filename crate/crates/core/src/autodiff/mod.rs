//! Dense `f64` tensors with tape-based reverse-mode differentiation.

mod gradcheck;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, GradReport};
pub use optim::{sgd_step, sgd_updated};
pub use tape::{Gradients, PrimitiveKind, Tape, TapeMode, Var};
pub use tensor::{argmax, cross_entropy, cross_entropy_logits, softmax_probs, Tensor};

pub(crate) use tensor::{ce_from_logits, softmax_unchecked};
