#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod lm;
pub mod photon;
pub mod photophysics;
pub mod spectral;
pub mod spectrum;
pub mod transport;
pub mod units;

pub use error::{Error, Result};
