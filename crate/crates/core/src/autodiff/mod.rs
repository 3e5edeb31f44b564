//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.

mod gradcheck;
mod optim;
mod tape;

pub use gradcheck::grad_check;
pub use optim::{sgd_step, Sgd};
pub use tape::{softmax_rows, Tape, Var, PROB_EPS};

pub(crate) use tape::{column_stats, Segment};
