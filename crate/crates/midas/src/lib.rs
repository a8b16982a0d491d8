//! File formats, corpus ingest, the annotation service and the `midas`
//! command line, on top of [`midas_core`].

pub mod cli;
pub mod formats;
pub mod ingest;
pub mod service;

pub use midas_core as core;
