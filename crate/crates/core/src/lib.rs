//! Numerical laboratory for stochastic scalar conservation laws with
//! oscillatory coefficients and their homogenized limits.

pub mod brownian;
pub mod effective;
pub mod error;
pub mod fv;
pub mod interp;
pub mod kinetic;
pub mod lab;
pub mod model;
pub mod verify;

pub use error::{Error, Result};
