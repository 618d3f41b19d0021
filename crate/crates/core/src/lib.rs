//! Coupled annual model of a tourism economy with policy search,
//! sensitivity analysis, budget scenarios and multi-site visitor flows.

pub mod dataio;
pub mod error;
pub mod flow;
pub mod gsa;
pub mod moea;
pub mod scenario;
pub mod sd;

pub use error::{Error, Result};
