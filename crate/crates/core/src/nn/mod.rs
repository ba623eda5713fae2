//! Minimal differentiable substrate with hand-written backward passes.
//!
//! Forward functions read a [`Params`] view and return caches; backward
//! functions consume those caches and accumulate into [`Grads`]. The two
//! halves of a [`ParameterStore`] are separate fields so a backward pass can
//! read weights while writing gradients.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
mod store;
mod tensor;

pub use layers::{attention, attention_backward, log_softmax, softmax, softmax_xent, Attention, Gru, GruCache, Linear};
pub use store::{AdamW, Grads, Group, ParamId, Params, ParameterStore};
pub use tensor::{add_into, axpy, check_finite, dot, matvec, matvec_t_acc, outer_acc, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("unknown parameter '{0}'")]
    UnknownParam(String),
    #[error("duplicate parameter '{0}'")]
    DuplicateParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
