//! Distributed nonconvex optimization with matrix stepsizes and compressed
//! communication: det-MARINA, det-DASHA, det-CGD, det-CGD2-VR and their
//! scalar counterparts, plus the experiment harness that drives them.

pub mod algorithms;
pub mod compression;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod problem;
pub mod stepsize;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
