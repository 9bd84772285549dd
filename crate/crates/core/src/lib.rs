//! Eigenvalue tracking for parameterized matrix pencils `s E(p) - A(p)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dae;
pub mod error;
pub mod linalg;
pub mod models;
pub mod spectrum;
pub mod tracker;

pub use error::{Error, Result};
