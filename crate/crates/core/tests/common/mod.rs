#![allow(dead_code)]

//! Shared fuzzing machinery for the integration tests: a deterministic plan
//! and relation generator, plus brute-force operator re-implementations that
//! are independent of both the oracle and the engines (nested-loop joins,
//! insertion sort, straight-line folds).

use std::cmp::Ordering;
use trifuse_core::data::SplitMix64;
use trifuse_core::expr::{AggKind, CmpOp, Predicate, Projector, ScalarExpr};
use trifuse_core::output::QueryOutput;
use trifuse_core::plan::{CheckedNode, CheckedOp, CheckedPlan, QueryPlan};
use trifuse_core::schema::{Database, Relation, Row, Schema};
use trifuse_core::value::{compare_values, Value, ValueKind};
use trifuse_core::{ExecError, ModelError};

pub const LEFT_TABLE: &str = "r_lines";
pub const RIGHT_TABLE: &str = "r_orders";

fn fuzz_schema(prefix: &str) -> Schema {
    Schema::new(vec![
        (format!("{prefix}K"), ValueKind::Int64),
        (format!("{prefix}V"), ValueKind::Float64),
        (format!("{prefix}D"), ValueKind::Date),
    ])
    .unwrap()
}

/// Two key-sorted relations with a 1-to-n key relationship: the left side
/// repeats keys (bounded multiplicity), the right side's keys are unique.
pub fn fuzz_database(rng: &mut SplitMix64, max_rows: usize) -> Database {
    let right_rows = rng.below(max_rows as u64 / 2 + 1) as usize;
    let mut right = Vec::new();
    for i in 0..right_rows {
        right.push(Row::new(
            vec![
                Value::Int64(i as i64 + 1),
                Value::Float64(rng.below(100) as f64 / 4.0),
                Value::Date(rng.below(50) as i32),
            ],
            i as i64,
        ));
    }
    let mut left = Vec::new();
    if right_rows > 0 {
        for key in 1..=right_rows {
            let lines = rng.below(4) as usize;
            for _ in 0..lines {
                if left.len() >= max_rows {
                    break;
                }
                let rowid = left.len() as i64;
                left.push(Row::new(
                    vec![
                        Value::Int64(key as i64),
                        Value::Float64(rng.below(100) as f64 / 4.0),
                        Value::Date(rng.below(50) as i32),
                    ],
                    rowid,
                ));
            }
        }
    }
    let mut db = Database::new();
    db.insert(
        LEFT_TABLE,
        Relation::new_sorted(fuzz_schema("L"), left, "LK").unwrap(),
    );
    db.insert(
        RIGHT_TABLE,
        Relation::new_sorted(fuzz_schema("R"), right, "RK").unwrap(),
    );
    db
}

pub fn fuzz_predicate(rng: &mut SplitMix64, prefix: &str) -> Predicate {
    let column = match rng.below(3) {
        0 => format!("{prefix}K"),
        1 => format!("{prefix}V"),
        _ => format!("{prefix}D"),
    };
    let literal = if column.ends_with('K') {
        Value::Int64(rng.below(20) as i64)
    } else if column.ends_with('V') {
        Value::Float64(rng.below(100) as f64 / 4.0)
    } else {
        Value::Date(rng.below(50) as i32)
    };
    let op = match rng.below(6) {
        0 => CmpOp::Lt,
        1 => CmpOp::Le,
        2 => CmpOp::Gt,
        3 => CmpOp::Ge,
        4 => CmpOp::Eq,
        _ => CmpOp::Ne,
    };
    let base = Predicate::compare(ScalarExpr::column(column), op, ScalarExpr::literal(literal));
    match rng.below(8) {
        0 => Predicate::and(base, fuzz_leaf_predicate(rng, prefix)),
        1 => Predicate::Not(Box::new(base)),
        _ => base,
    }
}

fn fuzz_leaf_predicate(rng: &mut SplitMix64, prefix: &str) -> Predicate {
    let column = format!("{prefix}K");
    Predicate::compare(
        ScalarExpr::column(column),
        CmpOp::Ge,
        ScalarExpr::literal(Value::Int64(rng.below(20) as i64)),
    )
}

/// A random linear pipeline over the left table, depth ≤ 4, optionally
/// rooted by an aggregate.
pub fn fuzz_linear_plan(rng: &mut SplitMix64) -> QueryPlan {
    let mut plan = QueryPlan::scan(LEFT_TABLE);
    let depth = rng.below(4) as usize;
    for _ in 0..depth {
        plan = match rng.below(4) {
            0 => plan.select(fuzz_predicate(rng, "L")),
            1 => plan.project(Projector::columns(vec!["LK", "LV", "LD"])),
            2 => plan.sort(
                match rng.below(3) {
                    0 => "LK",
                    1 => "LV",
                    _ => "LD",
                },
                rng.below(2) == 0,
            ),
            _ => plan.limit(rng.below(12)),
        };
    }
    match rng.below(3) {
        0 => plan.agg(AggKind::Count),
        1 => plan.agg(AggKind::Sum(ScalarExpr::column("LV"))),
        _ => plan,
    }
}

/// A random plan over the fuzz grammar: linear, or a join of two filtered
/// scans, optionally aggregated.
pub fn fuzz_plan(rng: &mut SplitMix64) -> QueryPlan {
    if rng.below(2) == 0 {
        return fuzz_linear_plan(rng);
    }
    let left: QueryPlan = if rng.below(2) == 0 {
        QueryPlan::scan(LEFT_TABLE)
    } else {
        QueryPlan::scan(LEFT_TABLE).select(fuzz_predicate(rng, "L"))
    };
    let right: QueryPlan = if rng.below(2) == 0 {
        QueryPlan::scan(RIGHT_TABLE)
    } else {
        QueryPlan::scan(RIGHT_TABLE).select(fuzz_predicate(rng, "R"))
    };
    let join = match rng.below(3) {
        0 => QueryPlan::HashJoin {
            left: Box::new(left),
            right: Box::new(right),
            left_key: "LK".into(),
            right_key: "RK".into(),
            cond: None,
        },
        1 => QueryPlan::MergeJoin {
            left: Box::new(left),
            right: Box::new(right),
            left_key: "LK".into(),
            right_key: "RK".into(),
        },
        _ => QueryPlan::SemiHashJoin {
            left: Box::new(left),
            right: Box::new(right),
            left_key: "LK".into(),
            right_key: "RK".into(),
        },
    };
    let semi = matches!(join, QueryPlan::SemiHashJoin { .. });
    match rng.below(3) {
        0 => join.agg(AggKind::Count),
        1 => join.agg(AggKind::Sum(ScalarExpr::column(if semi {
            "LV"
        } else {
            "RV"
        }))),
        _ => join,
    }
}

/// True when engine outputs for this plan can be compared as sequences:
/// sorted output whose tie-break rowids come from base tables (no joins).
pub fn ordered_comparable(plan: &QueryPlan) -> bool {
    fn has(plan: &QueryPlan, sort: &mut bool, join: &mut bool) {
        match plan {
            QueryPlan::Scan(_) => {}
            QueryPlan::Select { input, .. }
            | QueryPlan::Project { input, .. }
            | QueryPlan::Limit { input, .. }
            | QueryPlan::Agg { input, .. } => has(input, sort, join),
            QueryPlan::Sort { input, .. } => {
                *sort = true;
                has(input, sort, join);
            }
            QueryPlan::HashJoin { left, right, .. }
            | QueryPlan::MergeJoin { left, right, .. }
            | QueryPlan::SemiHashJoin { left, right, .. } => {
                *join = true;
                has(left, sort, join);
                has(right, sort, join);
            }
        }
    }
    let (mut sort, mut join) = (false, false);
    has(plan, &mut sort, &mut join);
    sort && !join
}

// ---------------------------------------------------------------------------
// Brute-force re-implementations. If these disagree with the oracle, the
// oracle is wrong.
// ---------------------------------------------------------------------------

fn cmp_or_err(a: &Value, b: &Value) -> Result<Ordering, ExecError> {
    compare_values(a, b).map_err(ExecError::Model)
}

fn insertion_sort(rows: &mut [Row], key: usize, ascending: bool) -> Result<(), ExecError> {
    for i in 1..rows.len() {
        let mut j = i;
        while j > 0 {
            let ord = cmp_or_err(rows[j - 1].value(key), rows[j].value(key))?;
            let ord = if ascending { ord } else { ord.reverse() };
            let after = match ord {
                Ordering::Greater => true,
                Ordering::Equal => rows[j - 1].rowid > rows[j].rowid,
                Ordering::Less => false,
            };
            if after {
                rows.swap(j - 1, j);
                j -= 1;
            } else {
                break;
            }
        }
    }
    Ok(())
}

fn brute_rows(node: &CheckedNode, db: &Database) -> Result<Vec<Row>, ExecError> {
    match &node.op {
        CheckedOp::Scan { relation } => Ok(db.get(relation).unwrap().rows().to_vec()),
        CheckedOp::Select { input, pred } => {
            let mut out = Vec::new();
            for row in brute_rows(input, db)? {
                if pred.eval(&row)? {
                    out.push(row);
                }
            }
            Ok(out)
        }
        CheckedOp::Project { input, proj } => {
            let mut out = Vec::new();
            for row in brute_rows(input, db)? {
                out.push(proj.apply(&row)?);
            }
            Ok(out)
        }
        CheckedOp::Sort { input, key, ascending } => {
            let mut rows = brute_rows(input, db)?;
            insertion_sort(&mut rows, *key, *ascending)?;
            Ok(rows)
        }
        CheckedOp::Limit { input, n } => {
            let mut out = Vec::new();
            for row in brute_rows(input, db)? {
                if out.len() as u64 == *n {
                    break;
                }
                out.push(row);
            }
            Ok(out)
        }
        CheckedOp::Agg { .. } => unreachable!("handled at the root"),
        CheckedOp::HashJoin {
            left,
            right,
            left_key,
            right_key,
            cond,
        } => {
            let lrows = brute_rows(left, db)?;
            let rrows = brute_rows(right, db)?;
            let mut out = Vec::new();
            let mut rowid = 0i64;
            for r in &rrows {
                for l in &lrows {
                    if cmp_or_err(l.value(*left_key), r.value(*right_key))? == Ordering::Equal {
                        let joined = trifuse_core::schema::row_concat(l, r, rowid);
                        if let Some(p) = cond {
                            if !p.eval(&joined)? {
                                continue;
                            }
                        }
                        rowid += 1;
                        out.push(joined);
                    }
                }
            }
            Ok(out)
        }
        CheckedOp::MergeJoin {
            left,
            right,
            left_key,
            right_key,
        } => {
            // Equi-join semantics via nested loops; sortedness is an input
            // invariant, not part of the result.
            let lrows = brute_rows(left, db)?;
            let rrows = brute_rows(right, db)?;
            let mut out = Vec::new();
            let mut rowid = 0i64;
            for r in &rrows {
                for l in &lrows {
                    if cmp_or_err(l.value(*left_key), r.value(*right_key))? == Ordering::Equal {
                        out.push(trifuse_core::schema::row_concat(l, r, rowid));
                        rowid += 1;
                    }
                }
            }
            Ok(out)
        }
        CheckedOp::SemiHashJoin {
            left,
            right,
            left_key,
            right_key,
        } => {
            let lrows = brute_rows(left, db)?;
            let rrows = brute_rows(right, db)?;
            let mut out = Vec::new();
            for l in lrows {
                let mut any = false;
                for r in &rrows {
                    if cmp_or_err(l.value(*left_key), r.value(*right_key))? == Ordering::Equal {
                        any = true;
                        break;
                    }
                }
                if any {
                    out.push(l);
                }
            }
            Ok(out)
        }
    }
}

/// Brute-force evaluation of a checked plan.
pub fn brute_eval(plan: &CheckedPlan, db: &Database) -> Result<QueryOutput, ExecError> {
    if let CheckedOp::Agg { input, agg } = &plan.root.op {
        let rows = brute_rows(input, db)?;
        let mut acc = agg
            .zero(&input.schema)
            .map_err(|e| ModelError::SchemaMismatch(e.to_string()))?;
        for row in &rows {
            acc = agg.step(row, acc)?;
        }
        return Ok(QueryOutput::Scalar(acc));
    }
    let rows = brute_rows(&plan.root, db)?;
    Ok(QueryOutput::Rows(
        Relation::new(plan.root.schema.clone(), rows).map_err(ExecError::Model)?,
    ))
}
