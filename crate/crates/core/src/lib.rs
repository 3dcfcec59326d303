//! Lockdown control of a SIR epidemic.
//!
//! The crate simulates the SIR model with a lockdown that scales transmission
//! by `(1 - theta L)^2`, evaluates two feedback lockdown policies (holding the
//! reproduction number or the infected fraction at a target) both by
//! simulation and in closed form, computes a lower bound on the cost of any
//! control that stops locking down after herd immunity, and solves the
//! lockdown optimal control problem numerically.
//!
//! Time is measured in days throughout.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod bound;
pub mod control;
pub mod error;
pub mod export;
pub mod numerics;
pub mod policies;
pub mod sir;

pub use error::{Error, Result};
