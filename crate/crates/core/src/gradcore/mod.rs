//! Dense `f64` matrices, a reverse-mode tape, and the Adam optimizer.

mod adam;
mod matrix;
mod mlp;
mod param;
mod tape;

pub use adam::Adam;
pub use matrix::Matrix;
pub use mlp::{BoundMlp, Mlp};
pub use param::{Param, Parameters};
pub use tape::{concat_rows, softmax_rows, Tape, Var};
