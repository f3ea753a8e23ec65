//! Physical plans and their validation.
//!
//! A [`QueryPlan`] is the engine-agnostic plan vocabulary: scan, select,
//! project, sort, limit, scalar aggregation, and three join operators.
//! [`validate_plan`] checks the structural invariants (root-only aggregation,
//! merge inputs sorted on their keys), resolves every column name to an
//! index, derives per-node output schemas and sortedness, and assigns each
//! operator a stable id used by the instrumentation counters.

use crate::error::PlanError;
use crate::expr::{AggKind, ColumnRef, Predicate, Projector, ScalarExpr};
use crate::schema::{Database, Schema};
use std::collections::BTreeMap;

/// Catalog entry used by validation: the schema of a named relation plus the
/// column it is known to be sorted on, if any.
#[derive(Debug, Clone)]
pub struct TableMeta {
    pub schema: Schema,
    pub sorted_on: Option<String>,
}

/// Name → table metadata, the planning-time view of a database.
pub type Catalog = BTreeMap<String, TableMeta>;

/// Builds a catalog from loaded relations.
pub fn catalog_of(db: &Database) -> Catalog {
    db.names()
        .map(|name| {
            let rel = db.get(name).expect("name comes from db");
            (
                name.to_string(),
                TableMeta {
                    schema: rel.schema().clone(),
                    sorted_on: rel.sorted_on().map(str::to_string),
                },
            )
        })
        .collect()
}

/// An unvalidated plan tree. Column references are by name.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryPlan {
    Scan(String),
    Select {
        input: Box<QueryPlan>,
        pred: Predicate,
    },
    Project {
        input: Box<QueryPlan>,
        proj: Projector,
    },
    Sort {
        input: Box<QueryPlan>,
        key: String,
        ascending: bool,
    },
    Limit {
        input: Box<QueryPlan>,
        n: u64,
    },
    Agg {
        input: Box<QueryPlan>,
        agg: AggKind,
    },
    HashJoin {
        left: Box<QueryPlan>,
        right: Box<QueryPlan>,
        left_key: String,
        right_key: String,
        /// Extra residual condition over the concatenated row, if any. Key
        /// equality is always enforced.
        cond: Option<Predicate>,
    },
    MergeJoin {
        left: Box<QueryPlan>,
        right: Box<QueryPlan>,
        left_key: String,
        right_key: String,
    },
    SemiHashJoin {
        left: Box<QueryPlan>,
        right: Box<QueryPlan>,
        left_key: String,
        right_key: String,
    },
}

impl QueryPlan {
    pub fn scan(name: impl Into<String>) -> QueryPlan {
        QueryPlan::Scan(name.into())
    }

    pub fn select(self, pred: Predicate) -> QueryPlan {
        QueryPlan::Select {
            input: Box::new(self),
            pred,
        }
    }

    pub fn project(self, proj: Projector) -> QueryPlan {
        QueryPlan::Project {
            input: Box::new(self),
            proj,
        }
    }

    pub fn sort(self, key: impl Into<String>, ascending: bool) -> QueryPlan {
        QueryPlan::Sort {
            input: Box::new(self),
            key: key.into(),
            ascending,
        }
    }

    pub fn limit(self, n: u64) -> QueryPlan {
        QueryPlan::Limit {
            input: Box::new(self),
            n,
        }
    }

    pub fn agg(self, agg: AggKind) -> QueryPlan {
        QueryPlan::Agg {
            input: Box::new(self),
            agg,
        }
    }
}

/// A validated, index-resolved plan node.
#[derive(Debug, Clone)]
pub struct CheckedNode {
    pub op: CheckedOp,
    /// Output schema of this node. For the root aggregate this is a
    /// single-column schema describing the scalar.
    pub schema: Schema,
    /// Column index this node's output is known to be non-decreasing on.
    pub sorted_on: Option<usize>,
    /// Stable operator id, e.g. "select#1", keying the per-operator counters.
    pub id: String,
}

#[derive(Debug, Clone)]
pub enum CheckedOp {
    Scan {
        relation: String,
    },
    Select {
        input: Box<CheckedNode>,
        pred: Predicate,
    },
    Project {
        input: Box<CheckedNode>,
        proj: Projector,
    },
    Sort {
        input: Box<CheckedNode>,
        key: usize,
        ascending: bool,
    },
    Limit {
        input: Box<CheckedNode>,
        n: u64,
    },
    Agg {
        input: Box<CheckedNode>,
        agg: AggKind,
    },
    HashJoin {
        left: Box<CheckedNode>,
        right: Box<CheckedNode>,
        left_key: usize,
        right_key: usize,
        cond: Option<Predicate>,
    },
    MergeJoin {
        left: Box<CheckedNode>,
        right: Box<CheckedNode>,
        left_key: usize,
        right_key: usize,
    },
    SemiHashJoin {
        left: Box<CheckedNode>,
        right: Box<CheckedNode>,
        left_key: usize,
        right_key: usize,
    },
}

/// A validated plan. Execution entry points take this type, so unvalidated
/// plans cannot reach an engine.
#[derive(Debug, Clone)]
pub struct CheckedPlan {
    pub root: CheckedNode,
}

impl CheckedPlan {
    /// True when the root produces a scalar rather than rows.
    pub fn is_scalar(&self) -> bool {
        matches!(self.root.op, CheckedOp::Agg { .. })
    }

    /// Operator ids in pre-order (root first).
    pub fn operator_ids(&self) -> Vec<String> {
        fn walk(node: &CheckedNode, out: &mut Vec<String>) {
            out.push(node.id.clone());
            match &node.op {
                CheckedOp::Scan { .. } => {}
                CheckedOp::Select { input, .. }
                | CheckedOp::Project { input, .. }
                | CheckedOp::Sort { input, .. }
                | CheckedOp::Limit { input, .. }
                | CheckedOp::Agg { input, .. } => walk(input, out),
                CheckedOp::HashJoin { left, right, .. }
                | CheckedOp::MergeJoin { left, right, .. }
                | CheckedOp::SemiHashJoin { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

/// Validates a plan against a catalog: checks invariants, resolves names to
/// indexes, and returns the index-resolved plan.
pub fn validate_plan(plan: &QueryPlan, catalog: &Catalog) -> Result<CheckedPlan, PlanError> {
    let mut counter = 0usize;
    let root = check(plan, catalog, true, &mut counter)?;
    Ok(CheckedPlan { root })
}

fn next_id(kind: &str, counter: &mut usize) -> String {
    let id = format!("{kind}#{counter}");
    *counter += 1;
    id
}

fn check(
    plan: &QueryPlan,
    catalog: &Catalog,
    is_root: bool,
    counter: &mut usize,
) -> Result<CheckedNode, PlanError> {
    match plan {
        QueryPlan::Scan(name) => {
            let meta = catalog
                .get(name)
                .ok_or_else(|| PlanError::UnknownRelation(name.clone()))?;
            let sorted_on = match &meta.sorted_on {
                Some(col) => Some(
                    meta.schema
                        .index_of(col)
                        .ok_or_else(|| PlanError::UnknownColumn(col.clone()))?,
                ),
                None => None,
            };
            Ok(CheckedNode {
                op: CheckedOp::Scan {
                    relation: name.clone(),
                },
                schema: meta.schema.clone(),
                sorted_on,
                id: next_id("scan", counter),
            })
        }
        QueryPlan::Select { input, pred } => {
            let id = next_id("select", counter);
            let child = check(input, catalog, false, counter)?;
            let pred = pred.resolve(&child.schema)?;
            Ok(CheckedNode {
                schema: child.schema.clone(),
                sorted_on: child.sorted_on,
                op: CheckedOp::Select {
                    input: Box::new(child),
                    pred,
                },
                id,
            })
        }
        QueryPlan::Project { input, proj } => {
            let id = next_id("project", counter);
            let child = check(input, catalog, false, counter)?;
            let proj = proj.resolve(&child.schema)?;
            let schema = proj.output_schema(&child.schema)?;
            // Sortedness survives projection only when the sorted column
            // passes through as a bare column reference.
            let sorted_on = child.sorted_on.and_then(|src| {
                proj.outputs
                    .iter()
                    .position(|(_, e)| matches!(e, ScalarExpr::Column(ColumnRef::Index(i)) if *i == src))
            });
            Ok(CheckedNode {
                schema,
                sorted_on,
                op: CheckedOp::Project {
                    input: Box::new(child),
                    proj,
                },
                id,
            })
        }
        QueryPlan::Sort { input, key, ascending } => {
            let id = next_id("sort", counter);
            let child = check(input, catalog, false, counter)?;
            let key_idx = child
                .schema
                .index_of(key)
                .ok_or_else(|| PlanError::UnknownColumn(key.clone()))?;
            Ok(CheckedNode {
                schema: child.schema.clone(),
                sorted_on: ascending.then_some(key_idx),
                op: CheckedOp::Sort {
                    input: Box::new(child),
                    key: key_idx,
                    ascending: *ascending,
                },
                id,
            })
        }
        QueryPlan::Limit { input, n } => {
            let id = next_id("limit", counter);
            let child = check(input, catalog, false, counter)?;
            Ok(CheckedNode {
                schema: child.schema.clone(),
                sorted_on: child.sorted_on,
                op: CheckedOp::Limit {
                    input: Box::new(child),
                    n: *n,
                },
                id,
            })
        }
        QueryPlan::Agg { input, agg } => {
            if !is_root {
                return Err(PlanError::NonRootAgg);
            }
            let id = next_id("agg", counter);
            let child = check(input, catalog, false, counter)?;
            let agg = agg.resolve(&child.schema)?;
            let (name, kind) = match &agg {
                AggKind::Count => ("count", crate::value::ValueKind::Int64),
                AggKind::Sum(e) => ("sum", e.kind(&child.schema)?),
            };
            let schema = Schema::new(vec![(name, kind)]).expect("single column");
            Ok(CheckedNode {
                schema,
                sorted_on: None,
                op: CheckedOp::Agg {
                    input: Box::new(child),
                    agg,
                },
                id,
            })
        }
        QueryPlan::HashJoin {
            left,
            right,
            left_key,
            right_key,
            cond,
        } => {
            let id = next_id("hash_join", counter);
            let l = check(left, catalog, false, counter)?;
            let r = check(right, catalog, false, counter)?;
            let lk = resolve_key(&l, left_key)?;
            let rk = resolve_key(&r, right_key)?;
            let schema = l.schema.concat(&r.schema);
            let cond = match cond {
                Some(p) => Some(p.resolve(&schema)?),
                None => None,
            };
            Ok(CheckedNode {
                schema,
                sorted_on: None,
                op: CheckedOp::HashJoin {
                    left: Box::new(l),
                    right: Box::new(r),
                    left_key: lk,
                    right_key: rk,
                    cond,
                },
                id,
            })
        }
        QueryPlan::MergeJoin {
            left,
            right,
            left_key,
            right_key,
        } => {
            let id = next_id("merge_join", counter);
            let l = check(left, catalog, false, counter)?;
            let r = check(right, catalog, false, counter)?;
            let lk = resolve_key(&l, left_key)?;
            let rk = resolve_key(&r, right_key)?;
            if l.sorted_on != Some(lk) {
                return Err(PlanError::UnsortedMergeInput(left_key.clone()));
            }
            if r.sorted_on != Some(rk) {
                return Err(PlanError::UnsortedMergeInput(right_key.clone()));
            }
            let schema = l.schema.concat(&r.schema);
            Ok(CheckedNode {
                schema,
                // Output is ordered by the join key.
                sorted_on: Some(lk),
                op: CheckedOp::MergeJoin {
                    left: Box::new(l),
                    right: Box::new(r),
                    left_key: lk,
                    right_key: rk,
                },
                id,
            })
        }
        QueryPlan::SemiHashJoin {
            left,
            right,
            left_key,
            right_key,
        } => {
            let id = next_id("semi_hash_join", counter);
            let l = check(left, catalog, false, counter)?;
            let r = check(right, catalog, false, counter)?;
            let lk = resolve_key(&l, left_key)?;
            let rk = resolve_key(&r, right_key)?;
            let schema = l.schema.clone();
            Ok(CheckedNode {
                schema,
                sorted_on: None,
                op: CheckedOp::SemiHashJoin {
                    left: Box::new(l),
                    right: Box::new(r),
                    left_key: lk,
                    right_key: rk,
                },
                id,
            })
        }
    }
}

fn resolve_key(node: &CheckedNode, key: &str) -> Result<usize, PlanError> {
    node.schema
        .index_of(key)
        .ok_or_else(|| PlanError::UnknownColumn(key.to_string()))
}
