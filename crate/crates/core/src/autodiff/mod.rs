//! Minimal reverse-mode automatic differentiation and SGD.

pub mod check;
pub mod checkpoint;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use check::{gradient_check, gradient_check_params, GradCheckReport};
pub use optim::{sgd_step, SgdReport};
pub use params::{Bindings, ParamSet};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
