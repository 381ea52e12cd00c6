//! Small fully connected networks with analytic gradients and Adam.

mod adam;
mod mlp;
mod weights;

pub use adam::{Adam, AdamConfig};
pub use mlp::{gemm_acc, param_count, tanh_in_place, Activation, ForwardCache, Mlp};
pub use weights::{decode_f64s, decode_weights, encode_f64s, encode_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("non-finite gradient {value} at parameter {index}")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("weight layout mismatch: file has widths {found:?}, expected {expected:?}")]
    Layout { expected: alloc::vec::Vec<usize>, found: alloc::vec::Vec<usize> },
    #[error("corrupt weight data: {0}")]
    Corrupt(&'static str),
}
