//! File formats, CLI and HTTP service for the `create_core` engine.

pub mod api;
pub mod cli;
pub mod formats;
pub mod judgments;
pub mod report;
