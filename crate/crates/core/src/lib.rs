//! Dialog-act annotation and prediction primitives for human-machine
//! conversation.
//!
//! Everything here is pure computation over in-memory data and builds with
//! `no_std` + `alloc`. File formats, the annotation service and the command
//! line live in the `midas` crate.

#![no_std]

extern crate alloc;

pub mod classifier;
pub mod context;
pub mod corpus;
pub mod fixtures;
pub mod math;
pub mod metrics;
pub mod segmenter;
pub mod swda;
pub mod taxonomy;
pub mod text;

pub use taxonomy::{LabelSet, Taxonomy};
