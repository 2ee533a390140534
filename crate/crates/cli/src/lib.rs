//! Command-line front end: CSV ingestion, the `test`, `cluster` and
//! `simulate` commands, JSON reports and SVG plots.

pub mod cache;
pub mod commands;
pub mod ingest;
pub mod report;
pub mod svg;
