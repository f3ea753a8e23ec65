//! The result of executing a plan: rows, or one scalar for aggregate roots.

use crate::schema::Relation;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum QueryOutput {
    Rows(Relation),
    Scalar(Value),
}

impl QueryOutput {
    /// Number of result rows; a scalar counts as one.
    pub fn row_count(&self) -> u64 {
        match self {
            QueryOutput::Rows(rel) => rel.len() as u64,
            QueryOutput::Scalar(_) => 1,
        }
    }
}
