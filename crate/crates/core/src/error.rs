//! Error types shared across the data model, planner, executors, and data loader.

use thiserror::Error;

/// Errors raised by the row/value data model.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    /// Comparison or arithmetic across different value variants.
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    /// Row shape or value variants do not match the schema, or schemas disagree.
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    /// Duplicate column name in a schema.
    #[error("duplicate column name: {0}")]
    DuplicateColumn(String),
    /// Duplicate rowid within a relation.
    #[error("duplicate rowid: {0}")]
    DuplicateRowId(i64),
    /// `sorted_on` was claimed but the rows are not non-decreasing on that column.
    #[error("relation is not sorted on column {0}")]
    NotSorted(String),
    /// Malformed "YYYY-MM-DD" date text.
    #[error("invalid date literal: {0}")]
    InvalidDate(String),
}

/// Errors raised by plan validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("unknown relation: {0}")]
    UnknownRelation(String),
    #[error("unknown column: {0}")]
    UnknownColumn(String),
    /// A merge-join child does not advertise sortedness on its join key.
    #[error("merge join input not sorted on join key {0}")]
    UnsortedMergeInput(String),
    /// Scalar aggregation is only allowed at the plan root.
    #[error("aggregate operator below the plan root")]
    NonRootAgg,
}

/// Errors raised while executing a checked plan.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    /// Checked Int64 aggregation or multiplication overflowed.
    #[error("int64 arithmetic overflow")]
    ArithmeticOverflow,
    /// A merge-join input regressed on its join key at runtime.
    #[error("unsorted merge join input: {0}")]
    UnsortedInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors raised by the table generator and .tbl reader/writer.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid generator config: {0}")]
    ConfigInvalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// Line and column are 1-based; column is the field index within the line.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}
