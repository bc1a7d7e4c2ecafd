//! Dense matrices, reverse-mode differentiation, Adam and seeded randomness.

pub mod adam;
pub mod gradcheck;
pub mod mat;
pub mod rng;
pub mod tape;

pub use adam::{adam_step, AdamState};
pub use mat::Mat;
pub use rng::{Purpose, Rng};
pub use tape::{sigmoid, Ew, Gradients, Param, ParamId, ParamStore, Tape, Var, EPS_NORM};
