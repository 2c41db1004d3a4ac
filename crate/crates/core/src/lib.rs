//! Numerical laboratory for regularizing effects in first-order
//! Hamilton-Jacobi equations `u_t + H(x, t, Du) = 0`.

// `!(a > b)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coeffs;
pub mod conditions;
pub mod config;
pub mod error;
pub mod hamiltonians;
pub mod quadrature;
pub mod sampling;
pub mod scenario;
pub mod solver;
pub mod structure;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};
