//! Retrospective (Phase I) analysis of wind-turbine SCADA data.
//!
//! The pipeline filters raw 10-minute SCADA records, fits a MARS power curve,
//! whitens the autocorrelated residuals by iterative feasible generalized
//! least squares, and runs a distribution-free recursive segmentation and
//! permutation control chart on the whitened residuals, removing
//! out-of-control segments until the chart no longer signals.

pub mod error;
pub mod ingest;
pub mod linalg;
pub mod ifgls;
pub mod mars;
pub mod report;
pub mod rsp;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
