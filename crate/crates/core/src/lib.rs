//! In-memory analytical query execution with three pipelined engine
//! architectures and their collection-programming counterparts.
//!
//! The crate provides:
//!
//! - a typed row store and physical plan vocabulary ([`schema`], [`plan`]),
//! - a naive materializing reference executor ([`oracle`]),
//! - three pipelined engines over the same plans: pull/iterator
//!   ([`engine::pull`]), push/visitor ([`engine::push`]), and stream fusion
//!   over `Yield | Skip | Done` steps ([`engine::stream`]),
//! - a loop-fusion lab with fold-, unfold-, and stream-fusion collection
//!   backends ([`fusion`]),
//! - a deterministic TPC-H-style generator and `.tbl` reader/writer
//!   ([`data`]),
//! - per-operator instrumentation counters ([`stats`]) that make the
//!   pipeline behaviors of each engine observable and testable.

pub mod data;
pub mod engine;
pub mod error;
pub mod expr;
pub mod fusion;
pub mod oracle;
pub mod output;
pub mod plan;
pub mod schema;
pub mod stats;
pub mod value;

pub use error::{DataError, ExecError, ModelError, PlanError};
pub use output::QueryOutput;
pub use schema::{Database, Relation, Row, Schema};
pub use stats::ExecStats;
pub use value::{Value, ValueKind};
