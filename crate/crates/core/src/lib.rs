#![no_std]
extern crate alloc;

pub mod diagnostics;
pub mod distribution;
pub mod error;
pub mod estimation;
pub mod inference;
pub mod kernel;
pub mod linalg;
pub mod math;
pub mod models;
pub mod montecarlo;
pub mod quadrature;
pub mod stats;

pub use error::{Error, Result};
