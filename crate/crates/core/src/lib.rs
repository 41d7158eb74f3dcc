pub mod arith;
pub mod error;
pub mod fp_poly;
pub mod numberfield;
pub mod poly;

pub use error::{Error, Result};
pub mod harness;
pub mod localdensity;
pub mod nilsequence;
pub mod repfn;
pub mod wtrick;
