//! Time-uniform concentration boundaries for products of i.i.d. random PSD
//! matrices `Z_n = (I + η_n X_n) ⋯ (I + η_1 X_1)`, with the simulation and
//! exact-enumeration machinery used to check them.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod boundary;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod oja;
pub mod oracle;
pub mod streams;

pub use error::{Error, Result};
