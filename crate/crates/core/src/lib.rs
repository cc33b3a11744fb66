//! Construction and certification of generating sets of PGL₂(ℤ/pℤ) with
//! simultaneous spectral gap and large girth, of the inductive tower of free
//! sets inside products of such groups, and of the resulting non-atomic
//! symmetric probability measure carried by the tower — together with
//! Monte-Carlo and exhaustive verification of the quantitative bounds behind
//! the construction.

pub mod cert;
pub mod config;
pub mod error;
pub mod measure;
pub mod montecarlo;
pub mod pgl;
pub mod rng;
pub mod spectral;
pub mod tower;
pub mod words;

pub use config::Limits;
pub use error::{Error, Result};
