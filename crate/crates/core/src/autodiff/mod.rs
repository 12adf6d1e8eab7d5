//! Reverse-mode differentiation and its finite-difference oracle.

pub mod fdcheck;
mod ops;
pub mod tape;

pub use fdcheck::{fd_check, FdConfig, FdEntry, FdReport, FdStatus, Probe};
pub use ops::FAULTABLE_OPS;
pub(crate) use ops::{sigmoid, softplus};
pub use tape::{value_and_grad, value_and_grad_on, BackwardFn, Fault, Tape, Var};
