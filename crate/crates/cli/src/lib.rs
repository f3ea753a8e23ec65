//! Benchmark harness for the three pipelined query engines: a named query
//! catalog, engine selection, oracle-verified runs, and counter/timing
//! reports. The `trifuse` binary is a thin argument layer over this crate.

pub mod catalog;
pub mod report;
pub mod runner;

pub use catalog::{build_plan, CatalogParams, QueryName};
pub use report::{report_emit, ReportFormat, RunReport, Verdict};
pub use runner::{
    execute, result_digest, run, sweep_selectivity, CliError, DataSource, EngineId, RunConfig,
};
