#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod baselines;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod ode;
pub mod problems;
pub mod solvers;
pub mod synthdata;
pub mod training;

pub use error::{Error, Result};
