//! Minimal reverse-mode differentiation over dense `f64` matrices and graph
//! segment operations.

mod activation;
mod gradcheck;
mod matrix;
mod segments;
mod tape;

pub use activation::{Activation, DEFAULT_LEAKY_SLOPE};
pub use gradcheck::{fd_resolution, grad_check, require_deterministic, GradCheckReport, MAX_CHECKED_ENTRIES};
pub use matrix::Matrix;
pub use segments::EdgeSegments;
pub use tape::{Gradients, Tape, Var};

#[cfg(test)]
mod tests;
