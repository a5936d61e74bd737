//! Dense `f64` tensors with define-by-run reverse-mode differentiation.
//!
//! ```
//! use odernn_autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]).unwrap());
//! let sq = tape.mul(x, x).unwrap();
//! let f = tape.sum(sq).unwrap();
//! let grads = tape.backward(f).unwrap();
//! assert_eq!(grads.get(x).data(), &[2.0, 4.0]);
//! ```

mod check;
mod error;
mod tape;
mod tensor;

pub use check::grad_check;
pub use error::{AutodiffError, Result};
pub use tape::{Gradients, OpKind, Tape, Var};
pub use tensor::Tensor;
