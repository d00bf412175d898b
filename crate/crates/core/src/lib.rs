//! Log-periodic power law (LPPL) bubble diagnostics for daily price series.
//!
//! The pipeline runs ingestion ([`timeseries`]), windowed multi-start fitting
//! ([`scanner`], [`fitter`]), residual-bootstrap forecasts of the critical
//! time ([`ensemble`]), post-forecast metrics ([`postanalysis`]) and sealing
//! of forecast documents with SHA-2 fingerprints ([`commitment`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commitment;
pub mod ensemble;
pub mod fitter;
mod linalg;
pub mod lppl;
pub mod postanalysis;
pub mod rng;
pub mod scanner;
pub mod timeseries;
