//! Problem files, the builtin catalog and machine-readable run reports.

pub mod catalog;
pub mod format;
pub mod problem_file;
pub mod report;

pub use catalog::{CatalogEntry, CATALOG_NAMES};
pub use problem_file::{FileError, ProblemFile};
pub use report::{exit_code, RunReport};
