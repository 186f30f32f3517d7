//! Text model format, DOT rendering and JSON reports.

pub mod dot;
pub mod format;
pub mod report;

pub use dot::{export_dot, DotOptions};
pub use format::{parse_document, parse_model, write_model, ModelDocument};
pub use report::{Report, StrategyTable, SCHEMA};
