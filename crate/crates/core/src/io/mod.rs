//! Datasets, bundled example data and report files.

pub mod bundled;
mod dataset;
pub mod grid;
pub mod report;

pub use dataset::{Column, ColumnData, Dataset, SchemaHints};
