#![no_std]
#[cfg(test)]
extern crate std;
extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod replica;
pub mod rmt;
pub mod roots;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
