//! Core engine for community epidemic portraits: ingest and validation,
//! time-span bucketing with intervention phases, crown-glyph geometry,
//! collision-free layout and read-only analytics queries.

pub mod analytics;
pub mod domain;
pub mod geometry;
pub mod ingest;
pub mod json;
pub mod layout;
pub mod temporal;

pub use domain::{Level, StudyWindow};
