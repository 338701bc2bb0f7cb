#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod curve;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod measure;
pub mod metrics;
pub mod quadrature;
pub mod sampler;
pub mod sum;

pub use error::{Error, Result};
