//! Numerical laboratory for the quasilinear Keller-Segel system with a
//! logistic-type source.

// `!(x < y)` is used on purpose so that NaN inputs fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod exponents;
pub mod grid;
pub mod harness;
pub mod kinetics;
pub mod optimize;
pub mod stepper;
