//! Training machinery: the autodiff tape, losses with quadrature,
//! optimizers, loss balancing, incremental-mode scheduling, physics
//! residuals, and the training/rollout loops.

pub mod balance;
pub mod ifno;
pub mod loss;
pub mod optim;
pub mod physics;
pub mod tape;
pub mod trainer;

pub use tape::{Tape, ValueId};
