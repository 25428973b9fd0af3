//! Instance files, check suites and report emission for the `bvdual` tool.

pub mod report;
pub mod schema;
pub mod suites;

pub use report::{CheckRow, Report, TABLE_HEADER};
pub use schema::{load_instance, InstanceFile, Loaded, VERSION};
pub use suites::{run, Settings, Suite};
