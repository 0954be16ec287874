//! Std companion to `seedpure-core`: file formats, dataset loading, the
//! experiment grid and reporting.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod grid;
pub mod report;
pub mod synth;

pub use error::{Error, FormatError, Result};
