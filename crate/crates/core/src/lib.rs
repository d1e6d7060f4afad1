//! Controlled K-g-frames for Hilbert modules over the matrix algebra `M_n(ℂ)`.
//!
//! The crate assembles controlled frame operators from operator families over
//! discretised measure spaces, certifies or falsifies Loewner-order frame
//! inequalities, computes optimal frame bounds and checks structural theorems
//! about such frames on concrete instances.

pub mod algebra;
pub mod certify;
pub mod cli;
pub mod error;
pub mod frame;
pub mod generate;
pub mod instance;
pub mod json;
pub mod linalg;
pub mod module_space;
pub mod quadrature;
pub mod theorems;
pub mod verdict;

pub use error::{Error, Result};
