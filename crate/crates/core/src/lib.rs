//! PAM4 link simulator with a linear-SVM decision-feedback equalizer and an
//! LMS FFE&DFE baseline, plus BER sweep drivers.

pub mod channel;
pub mod cli;
pub mod equalizers;
pub mod error;
pub mod filter;
pub mod metrics;
pub mod txgen;

pub use error::{Error, Result};
