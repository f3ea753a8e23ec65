//! The push engine: the visitor model.
//!
//! Control flow is reversed relative to the pull engine: sources drive the
//! loop and push each tuple into the consume entry point of their
//! destination. The engine is a *pure* push engine — no operator can signal
//! upstream termination:
//!
//! - a scan always pushes its whole relation (`source_rows_read` equals the
//!   sum of scanned relation sizes on every plan),
//! - limit drops rows beyond its budget but cannot stop the producer,
//! - merge join cannot steer two producers, so the whole right input is
//!   materialized and the left side streams against that buffer,
//! - sort buffers during consumption and re-pushes sorted rows after the
//!   end-of-production signal.
//!
//! A plan compiles into a tree of [`PushPipeline`]s: a source (scan or join)
//! plus the 1-in/≤1-out stages between it and the sink. Consume chains are
//! wired when the pipeline runs; stage state (sort buffers, limit counters)
//! lives in the compiled pipeline.

use super::joinmap::JoinMultiMap;
use super::{sort_rows_stable, values_equal};
use crate::error::{ExecError, ModelError};
use crate::expr::{Predicate, Projector};
use crate::output::QueryOutput;
use crate::plan::{CheckedNode, CheckedOp, CheckedPlan};
use crate::schema::{row_concat, Database, Relation, Row};
use crate::stats::ExecStats;
use crate::value::{compare_values, Value};
use std::cmp::Ordering;
use std::collections::HashSet;
use std::sync::Arc;

/// The destination callback a pipeline delivers its output rows to.
type Deliver<'a> = &'a mut dyn FnMut(&mut ExecStats, Row) -> Result<(), ExecError>;

/// A 1-in/≤1-out operator sitting between a source and a sink.
enum PushStage {
    Select {
        pred: Predicate,
        id: String,
    },
    Project {
        proj: Projector,
        id: String,
    },
    /// Buffers everything it consumes; flushes sorted on end-of-production.
    Sort {
        key: usize,
        ascending: bool,
        buf: Vec<Row>,
        id: String,
    },
    /// Drops rows beyond `n`. Cannot stop the producer.
    Limit {
        n: u64,
        count: u64,
        id: String,
    },
}

/// A pipeline source: either a scan loop or a join over two sub-pipelines.
enum PushSource {
    Scan {
        rel: Arc<Relation>,
    },
    HashJoin {
        left: Box<PushPipeline>,
        right: Box<PushPipeline>,
        left_key: usize,
        right_key: usize,
        cond: Option<Predicate>,
        semi: bool,
        id: String,
    },
    MergeJoin {
        left: Box<PushPipeline>,
        right: Box<PushPipeline>,
        left_key: usize,
        right_key: usize,
        id: String,
    },
}

pub struct PushPipeline {
    source: PushSource,
    stages: Vec<PushStage>,
}

/// Compiles the non-aggregate part of a plan into a pipeline tree.
fn compile(node: &CheckedNode, db: &Database) -> Result<PushPipeline, ExecError> {
    Ok(match &node.op {
        CheckedOp::Scan { relation } => {
            let rel = db.get(relation).ok_or_else(|| {
                ExecError::Model(ModelError::SchemaMismatch(format!(
                    "relation {relation} not loaded"
                )))
            })?;
            PushPipeline {
                source: PushSource::Scan {
                    rel: Arc::clone(rel),
                },
                stages: Vec::new(),
            }
        }
        CheckedOp::Select { input, pred } => {
            let mut p = compile(input, db)?;
            p.stages.push(PushStage::Select {
                pred: pred.clone(),
                id: node.id.clone(),
            });
            p
        }
        CheckedOp::Project { input, proj } => {
            let mut p = compile(input, db)?;
            p.stages.push(PushStage::Project {
                proj: proj.clone(),
                id: node.id.clone(),
            });
            p
        }
        CheckedOp::Sort { input, key, ascending } => {
            let mut p = compile(input, db)?;
            p.stages.push(PushStage::Sort {
                key: *key,
                ascending: *ascending,
                buf: Vec::new(),
                id: node.id.clone(),
            });
            p
        }
        CheckedOp::Limit { input, n } => {
            let mut p = compile(input, db)?;
            p.stages.push(PushStage::Limit {
                n: *n,
                count: 0,
                id: node.id.clone(),
            });
            p
        }
        CheckedOp::Agg { .. } => {
            unreachable!("aggregate below root survived validation")
        }
        CheckedOp::HashJoin {
            left,
            right,
            left_key,
            right_key,
            cond,
        } => PushPipeline {
            source: PushSource::HashJoin {
                left: Box::new(compile(left, db)?),
                right: Box::new(compile(right, db)?),
                left_key: *left_key,
                right_key: *right_key,
                cond: cond.clone(),
                semi: false,
                id: node.id.clone(),
            },
            stages: Vec::new(),
        },
        CheckedOp::SemiHashJoin {
            left,
            right,
            left_key,
            right_key,
        } => PushPipeline {
            source: PushSource::HashJoin {
                left: Box::new(compile(left, db)?),
                right: Box::new(compile(right, db)?),
                left_key: *left_key,
                right_key: *right_key,
                cond: None,
                semi: true,
                id: node.id.clone(),
            },
            stages: Vec::new(),
        },
        CheckedOp::MergeJoin {
            left,
            right,
            left_key,
            right_key,
        } => PushPipeline {
            source: PushSource::MergeJoin {
                left: Box::new(compile(left, db)?),
                right: Box::new(compile(right, db)?),
                left_key: *left_key,
                right_key: *right_key,
                id: node.id.clone(),
            },
            stages: Vec::new(),
        },
    })
}

/// Pushes one row through the stage chain into `deliver`.
fn consume(
    stages: &mut [PushStage],
    stats: &mut ExecStats,
    row: Row,
    deliver: Deliver,
) -> Result<(), ExecError> {
    match stages.split_first_mut() {
        None => deliver(stats, row),
        Some((stage, rest)) => match stage {
            PushStage::Select { pred, id } => {
                stats.op(id).push_consume_calls += 1;
                if pred.eval(&row)? {
                    consume(rest, stats, row, deliver)
                } else {
                    // Non-qualifying rows are a no-op branch: skipping is
                    // just not forwarding.
                    Ok(())
                }
            }
            PushStage::Project { proj, id } => {
                stats.op(id).push_consume_calls += 1;
                let out = proj.apply(&row)?;
                consume(rest, stats, out, deliver)
            }
            PushStage::Sort { buf, id, .. } => {
                stats.op(id).push_consume_calls += 1;
                stats.buffer_grow(1);
                buf.push(row);
                Ok(())
            }
            PushStage::Limit { n, count, id } => {
                stats.op(id).push_consume_calls += 1;
                if *count < *n {
                    *count += 1;
                    consume(rest, stats, row, deliver)
                } else {
                    Ok(())
                }
            }
        },
    }
}

/// Propagates end-of-production down the chain. Sort flushes here.
fn end_production(
    stages: &mut [PushStage],
    stats: &mut ExecStats,
    deliver: Deliver,
) -> Result<(), ExecError> {
    match stages.split_first_mut() {
        None => Ok(()),
        Some((stage, rest)) => {
            if let PushStage::Sort { key, ascending, buf, .. } = stage {
                let mut rows = std::mem::take(buf);
                sort_rows_stable(&mut rows, *key, *ascending)?;
                stats.buffer_shrink(rows.len() as u64);
                for row in rows {
                    consume(rest, stats, row, deliver)?;
                }
            }
            end_production(rest, stats, deliver)
        }
    }
}

fn run_pipeline(
    pipeline: &mut PushPipeline,
    stats: &mut ExecStats,
    deliver: Deliver,
) -> Result<(), ExecError> {
    let PushPipeline { source, stages } = pipeline;
    run_source(source, stages, stats, deliver)
}

fn run_source(
    source: &mut PushSource,
    stages: &mut [PushStage],
    stats: &mut ExecStats,
    deliver: Deliver,
) -> Result<(), ExecError> {
    match source {
        PushSource::Scan { rel } => {
            // The producer loop: pushes every row, no early exit.
            for row in rel.rows() {
                stats.source_rows_read += 1;
                consume(stages, stats, row.clone(), deliver)?;
            }
            end_production(stages, stats, deliver)
        }
        PushSource::HashJoin {
            left,
            right,
            left_key,
            right_key,
            cond,
            semi,
            id,
        } => {
            let (left_key, right_key, semi) = (*left_key, *right_key, *semi);
            let mut map = JoinMultiMap::new();
            run_pipeline(left, stats, &mut |stats, lrow| {
                // consumeLeft: build.
                stats.op(id).push_consume_calls += 1;
                stats.buffer_grow(1);
                let key = lrow.value(left_key).clone();
                map.insert(&key, lrow);
                Ok(())
            })?;
            let mut emitted: HashSet<i64> = HashSet::new();
            let mut next_rowid = 0i64;
            run_pipeline(right, stats, &mut |stats, rrow| {
                // consumeRight: probe and forward.
                stats.op(id).push_consume_calls += 1;
                let rkey = rrow.value(right_key).clone();
                for lrow in map.bucket(&rkey) {
                    if !values_equal(lrow.value(left_key), &rkey)? {
                        continue;
                    }
                    if semi {
                        if emitted.insert(lrow.rowid) {
                            consume(stages, stats, lrow.clone(), deliver)?;
                        }
                        continue;
                    }
                    let joined = row_concat(lrow, &rrow, next_rowid);
                    if let Some(p) = &cond {
                        if !p.eval(&joined)? {
                            continue;
                        }
                    }
                    next_rowid += 1;
                    consume(stages, stats, joined, deliver)?;
                }
                Ok(())
            })?;
            end_production(stages, stats, deliver)
        }
        PushSource::MergeJoin {
            left,
            right,
            left_key,
            right_key,
            id,
        } => {
            let (left_key, right_key) = (*left_key, *right_key);
            // One input cannot be steered, so its pipeline breaks: the whole
            // right (unique-key) side lands in a buffer.
            let mut right_buf: Vec<Row> = Vec::new();
            let mut last_right: Option<Value> = None;
            run_pipeline(right, stats, &mut |stats, rrow| {
                stats.op(id).push_consume_calls += 1;
                let key = rrow.value(right_key).clone();
                if let Some(prev) = &last_right {
                    if compare_values(prev, &key)? == Ordering::Greater {
                        return Err(ExecError::UnsortedInput("right".to_string()));
                    }
                }
                last_right = Some(key);
                stats.buffer_grow(1);
                right_buf.push(rrow);
                Ok(())
            })?;
            // The left side stays pipelined, merging against the buffer.
            let mut cursor = 0usize;
            let mut last_left: Option<Value> = None;
            let mut next_rowid = 0i64;
            run_pipeline(left, stats, &mut |stats, lrow| {
                stats.op(id).push_consume_calls += 1;
                let lkey = lrow.value(left_key).clone();
                if let Some(prev) = &last_left {
                    if compare_values(prev, &lkey)? == Ordering::Greater {
                        return Err(ExecError::UnsortedInput("left".to_string()));
                    }
                }
                last_left = Some(lkey.clone());
                while cursor < right_buf.len()
                    && compare_values(right_buf[cursor].value(right_key), &lkey)?
                        == Ordering::Less
                {
                    cursor += 1;
                }
                let mut j = cursor;
                while j < right_buf.len()
                    && values_equal(right_buf[j].value(right_key), &lkey)?
                {
                    let joined = row_concat(&lrow, &right_buf[j], next_rowid);
                    next_rowid += 1;
                    consume(stages, stats, joined, deliver)?;
                    j += 1;
                }
                Ok(())
            })?;
            stats.buffer_shrink(right_buf.len() as u64);
            end_production(stages, stats, deliver)
        }
    }
}

/// Runs a checked plan on the push engine.
pub fn run_push(
    plan: &CheckedPlan,
    db: &Database,
    stats: &mut ExecStats,
) -> Result<QueryOutput, ExecError> {
    if let CheckedOp::Agg { input, agg } = &plan.root.op {
        let mut pipeline = compile(input, db)?;
        let agg_id = plan.root.id.clone();
        let zero = agg
            .zero(&input.schema)
            .map_err(|e| ModelError::SchemaMismatch(e.to_string()))?;
        let mut acc = Some(zero);
        run_pipeline(&mut pipeline, stats, &mut |stats, row| {
            stats.op(&agg_id).push_consume_calls += 1;
            let a = acc.take().expect("accumulator present");
            acc = Some(agg.step(&row, a)?);
            Ok(())
        })?;
        stats.output_rows = 1;
        return Ok(QueryOutput::Scalar(acc.expect("accumulator present")));
    }
    let mut pipeline = compile(&plan.root, db)?;
    let mut rows = Vec::new();
    run_pipeline(&mut pipeline, stats, &mut |_stats, row| {
        rows.push(row);
        Ok(())
    })?;
    stats.output_rows = rows.len() as u64;
    let mut rel = Relation::new(plan.root.schema.clone(), rows)?;
    if let Some(idx) = plan.root.sorted_on {
        let name = plan.root.schema.column_name(idx).to_string();
        rel = rel.with_sorted_on(&name)?;
    }
    Ok(QueryOutput::Rows(rel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{AggKind, ScalarExpr};
    use crate::plan::{catalog_of, validate_plan, QueryPlan};
    use crate::schema::Schema;
    use crate::value::ValueKind;

    fn db_from(rows: &[(i64, f64)]) -> Database {
        let schema =
            Schema::new(vec![("A", ValueKind::Int64), ("B", ValueKind::Float64)]).unwrap();
        let rows = rows
            .iter()
            .enumerate()
            .map(|(i, (a, b))| Row::new(vec![Value::Int64(*a), Value::Float64(*b)], i as i64))
            .collect();
        let mut db = Database::new();
        db.insert("r", Relation::new(schema, rows).unwrap());
        db
    }

    fn checked(plan: QueryPlan, db: &Database) -> CheckedPlan {
        validate_plan(&plan, &catalog_of(db)).unwrap()
    }

    #[test]
    fn filter_sum_matches_hand_fold() {
        let db = db_from(&[(5, 10.0), (12, 20.0), (3, 30.0)]);
        let plan = checked(
            QueryPlan::scan("r")
                .select(Predicate::col_lt("A", Value::Int64(10)))
                .agg(AggKind::Sum(ScalarExpr::column("B"))),
            &db,
        );
        let mut stats = ExecStats::new();
        let out = run_push(&plan, &db, &mut stats).unwrap();
        assert_eq!(out, QueryOutput::Scalar(Value::Float64(40.0)));
        assert_eq!(stats.source_rows_read, 3);
    }

    #[test]
    fn limit_cannot_stop_the_producer() {
        let rows: Vec<(i64, f64)> = (0..1000).map(|i| (i, 0.0)).collect();
        let db = db_from(&rows);
        let plan = checked(QueryPlan::scan("r").limit(2), &db);
        let mut stats = ExecStats::new();
        let out = run_push(&plan, &db, &mut stats).unwrap();
        assert_eq!(out.row_count(), 2);
        // The producer pushed every row regardless of the limit.
        assert_eq!(stats.source_rows_read, 1000);
    }

    #[test]
    fn select_forwards_exactly_qualifying_rows() {
        let db = db_from(&[(1, 0.0), (2, 0.0), (3, 0.0), (4, 0.0)]);
        let passing = checked(
            QueryPlan::scan("r")
                .select(Predicate::Const(true))
                .agg(AggKind::Count),
            &db,
        );
        let mut stats = ExecStats::new();
        run_push(&passing, &db, &mut stats).unwrap();
        assert_eq!(stats.op_counters("select#1").push_consume_calls, 4);
        assert_eq!(stats.op_counters("agg#0").push_consume_calls, 4);

        let rejecting = checked(
            QueryPlan::scan("r")
                .select(Predicate::Const(false))
                .agg(AggKind::Count),
            &db,
        );
        let mut stats = ExecStats::new();
        let out = run_push(&rejecting, &db, &mut stats).unwrap();
        assert_eq!(out, QueryOutput::Scalar(Value::Int64(0)));
        assert_eq!(stats.op_counters("select#1").push_consume_calls, 4);
        assert_eq!(stats.op_counters("agg#0").push_consume_calls, 0);
    }

    #[test]
    fn stacked_selects_flatten_to_conjunction() {
        let rows: Vec<(i64, f64)> = (0..100).map(|i| (i, i as f64)).collect();
        let db = db_from(&rows);
        let preds = [
            Predicate::col_ge("A", Value::Int64(10)),
            Predicate::col_lt("A", Value::Int64(80)),
            Predicate::col_ge("A", Value::Int64(20)),
            Predicate::col_lt("A", Value::Int64(60)),
        ];
        for k in 2..=4usize {
            let mut stacked_plan = QueryPlan::scan("r");
            let mut conjunction = preds[0].clone();
            for (i, p) in preds.iter().take(k).enumerate() {
                stacked_plan = stacked_plan.select(p.clone());
                if i > 0 {
                    conjunction = Predicate::and(conjunction, p.clone());
                }
            }
            let stacked = checked(stacked_plan.agg(AggKind::Count), &db);
            let flat = checked(
                QueryPlan::scan("r").select(conjunction).agg(AggKind::Count),
                &db,
            );
            let mut s1 = ExecStats::new();
            let r1 = run_push(&stacked, &db, &mut s1).unwrap();
            let mut s2 = ExecStats::new();
            let r2 = run_push(&flat, &db, &mut s2).unwrap();
            assert_eq!(r1, r2, "k = {k}");
            // The aggregate consumed the same rows either way.
            assert_eq!(
                s1.op_counters("agg#0").push_consume_calls,
                s2.op_counters("agg#0").push_consume_calls,
                "k = {k}"
            );
        }
    }

    #[test]
    fn sort_flushes_after_end_of_production() {
        let db = db_from(&[(3, 0.0), (1, 0.0), (2, 0.0)]);
        let plan = checked(QueryPlan::scan("r").sort("A", true), &db);
        let mut stats = ExecStats::new();
        let out = run_push(&plan, &db, &mut stats).unwrap();
        let QueryOutput::Rows(rel) = out else { panic!() };
        let keys: Vec<&Value> = rel.rows().iter().map(|r| r.value(0)).collect();
        assert_eq!(keys, vec![&Value::Int64(1), &Value::Int64(2), &Value::Int64(3)]);
        assert_eq!(stats.materialized_rows(), 3);
    }
}
