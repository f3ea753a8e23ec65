//! The naive, fully materializing reference executor.
//!
//! Every operator materializes its full input and output. This is the
//! ground-truth semantics the three pipelined engines are differentially
//! tested against: deliberately simple, deterministic, and order-pinned.
//!
//! Pinned orders: hash joins emit, for each right (probe) row in input
//! order, all matching left rows in left order; merge joins emit per key
//! group, for each right row, the left group in left order; semi joins keep
//! qualifying left rows in left order; sorts are stable with an ascending
//! rowid tie-break.

use crate::error::{ExecError, ModelError};
use crate::expr::Predicate;
use crate::output::QueryOutput;
use crate::plan::{CheckedNode, CheckedOp, CheckedPlan};
use crate::schema::{row_concat, Database, Relation, Row};
use crate::stats::ExecStats;
use crate::value::{compare_values, Value};
use std::cmp::Ordering;
use std::collections::HashMap;

/// Evaluates a checked plan bottom-up, materializing every intermediate.
pub fn eval_oracle(plan: &CheckedPlan, db: &Database) -> Result<QueryOutput, ExecError> {
    let mut stats = ExecStats::new();
    eval_oracle_with_stats(plan, db, &mut stats)
}

/// Like [`eval_oracle`] but fills basic counters (rows read, intermediate
/// materializations) so harness reports have something to show for the
/// reference engine.
pub fn eval_oracle_with_stats(
    plan: &CheckedPlan,
    db: &Database,
    stats: &mut ExecStats,
) -> Result<QueryOutput, ExecError> {
    if let CheckedOp::Agg { input, agg } = &plan.root.op {
        let rows = eval_rows(input, db, stats)?;
        let mut acc = agg
            .zero(&input.schema)
            .map_err(|e| ModelError::SchemaMismatch(e.to_string()))?;
        for row in &rows {
            acc = agg.step(row, acc)?;
        }
        stats.output_rows = 1;
        return Ok(QueryOutput::Scalar(acc));
    }
    let rows = eval_rows(&plan.root, db, stats)?;
    stats.output_rows = rows.len() as u64;
    let mut rel = Relation::new(plan.root.schema.clone(), rows)?;
    if let Some(idx) = plan.root.sorted_on {
        let name = plan.root.schema.column_name(idx).to_string();
        rel = rel.with_sorted_on(&name)?;
    }
    Ok(QueryOutput::Rows(rel))
}

fn eval_rows(
    node: &CheckedNode,
    db: &Database,
    stats: &mut ExecStats,
) -> Result<Vec<Row>, ExecError> {
    let rows = match &node.op {
        CheckedOp::Scan { relation } => {
            let rel = db.get(relation).ok_or_else(|| {
                ExecError::Model(ModelError::SchemaMismatch(format!(
                    "relation {relation} not loaded"
                )))
            })?;
            stats.source_rows_read += rel.len() as u64;
            rel.rows().to_vec()
        }
        CheckedOp::Select { input, pred } => {
            let input_rows = eval_rows(input, db, stats)?;
            let mut out = Vec::new();
            for row in input_rows {
                if pred.eval(&row)? {
                    out.push(row);
                }
            }
            out
        }
        CheckedOp::Project { input, proj } => {
            let input_rows = eval_rows(input, db, stats)?;
            input_rows
                .iter()
                .map(|r| proj.apply(r))
                .collect::<Result<Vec<_>, _>>()?
        }
        CheckedOp::Sort { input, key, ascending } => {
            let mut rows = eval_rows(input, db, stats)?;
            sort_rows(&mut rows, *key, *ascending)?;
            rows
        }
        CheckedOp::Limit { input, n } => {
            let mut rows = eval_rows(input, db, stats)?;
            rows.truncate(*n as usize);
            rows
        }
        CheckedOp::Agg { .. } => {
            // validate_plan admits aggregation only at the root, which
            // eval_oracle_with_stats handles before recursing.
            unreachable!("aggregate below root survived validation")
        }
        CheckedOp::HashJoin {
            left,
            right,
            left_key,
            right_key,
            cond,
        } => {
            let lrows = eval_rows(left, db, stats)?;
            let rrows = eval_rows(right, db, stats)?;
            hash_join(&lrows, &rrows, *left_key, *right_key, cond.as_ref())?
        }
        CheckedOp::MergeJoin {
            left,
            right,
            left_key,
            right_key,
        } => {
            let lrows = eval_rows(left, db, stats)?;
            let rrows = eval_rows(right, db, stats)?;
            merge_join(&lrows, &rrows, *left_key, *right_key)?
        }
        CheckedOp::SemiHashJoin {
            left,
            right,
            left_key,
            right_key,
        } => {
            let lrows = eval_rows(left, db, stats)?;
            let rrows = eval_rows(right, db, stats)?;
            semi_hash_join(lrows, &rrows, *left_key, *right_key)?
        }
    };
    if !matches!(node.op, CheckedOp::Scan { .. }) {
        stats.buffer_grow(rows.len() as u64);
    }
    Ok(rows)
}

/// Stable sort on one key with an ascending rowid tie-break, making the
/// result order a total function of the input multiset.
pub(crate) fn sort_rows(rows: &mut [Row], key: usize, ascending: bool) -> Result<(), ExecError> {
    let mut err = None;
    rows.sort_by(|a, b| {
        let ord = match compare_values(a.value(key), b.value(key)) {
            Ok(o) => o,
            Err(e) => {
                err.get_or_insert(e);
                Ordering::Equal
            }
        };
        let ord = if ascending { ord } else { ord.reverse() };
        ord.then(a.rowid.cmp(&b.rowid))
    });
    match err {
        Some(e) => Err(ExecError::Model(e)),
        None => Ok(()),
    }
}

/// Exact grouping of row indexes by the canonical bytes of their key value;
/// bucket order follows first occurrence, contents follow input order.
fn group_by_key(rows: &[Row], key: usize) -> HashMap<Vec<u8>, Vec<usize>> {
    let mut groups: HashMap<Vec<u8>, Vec<usize>> = HashMap::new();
    for (i, row) in rows.iter().enumerate() {
        let mut bytes = Vec::with_capacity(16);
        row.value(key).canonical_bytes(&mut bytes);
        groups.entry(bytes).or_default().push(i);
    }
    groups
}

fn hash_join(
    lrows: &[Row],
    rrows: &[Row],
    left_key: usize,
    right_key: usize,
    cond: Option<&Predicate>,
) -> Result<Vec<Row>, ExecError> {
    let groups = group_by_key(lrows, left_key);
    let mut out = Vec::new();
    let mut next_rowid = 0i64;
    for rrow in rrows {
        let mut bytes = Vec::with_capacity(16);
        rrow.value(right_key).canonical_bytes(&mut bytes);
        if let Some(matches) = groups.get(&bytes) {
            for &li in matches {
                let joined = row_concat(&lrows[li], rrow, next_rowid);
                if let Some(p) = cond {
                    if !p.eval(&joined)? {
                        continue;
                    }
                }
                next_rowid += 1;
                out.push(joined);
            }
        }
    }
    Ok(out)
}

fn semi_hash_join(
    lrows: Vec<Row>,
    rrows: &[Row],
    left_key: usize,
    right_key: usize,
) -> Result<Vec<Row>, ExecError> {
    let right_keys: std::collections::HashSet<Vec<u8>> = rrows
        .iter()
        .map(|r| {
            let mut bytes = Vec::with_capacity(16);
            r.value(right_key).canonical_bytes(&mut bytes);
            bytes
        })
        .collect();
    Ok(lrows
        .into_iter()
        .filter(|l| {
            let mut bytes = Vec::with_capacity(16);
            l.value(left_key).canonical_bytes(&mut bytes);
            right_keys.contains(&bytes)
        })
        .collect())
}

/// Sort-merge of two key-sorted inputs (1-to-n, n on the left). Per key
/// group the probe order is right-major: each right row pairs with the whole
/// left group in left order.
fn merge_join(
    lrows: &[Row],
    rrows: &[Row],
    left_key: usize,
    right_key: usize,
) -> Result<Vec<Row>, ExecError> {
    let mut out = Vec::new();
    let mut next_rowid = 0i64;
    let mut li = 0usize;
    let mut ri = 0usize;
    while li < lrows.len() && ri < rrows.len() {
        let lkey = lrows[li].value(left_key);
        let rkey = rrows[ri].value(right_key);
        match compare_values(lkey, rkey)? {
            Ordering::Less => li += 1,
            Ordering::Greater => ri += 1,
            Ordering::Equal => {
                let mut lend = li;
                while lend < lrows.len()
                    && compare_values(lrows[lend].value(left_key), lkey)? == Ordering::Equal
                {
                    lend += 1;
                }
                // Emit for every right row sharing this key.
                while ri < rrows.len()
                    && compare_values(rrows[ri].value(right_key), lkey)? == Ordering::Equal
                {
                    for lrow in &lrows[li..lend] {
                        out.push(row_concat(lrow, &rrows[ri], next_rowid));
                        next_rowid += 1;
                    }
                    ri += 1;
                }
                li = lend;
            }
        }
    }
    Ok(out)
}

/// Relative tolerance for Float64 result comparison.
pub const FLOAT_REL_TOLERANCE: f64 = 1e-9;

fn float_close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= FLOAT_REL_TOLERANCE * a.abs().max(b.abs()) || (a.is_nan() && b.is_nan())
}

fn value_close(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Float64(x), Value::Float64(y)) => float_close(*x, *y),
        _ => a == b,
    }
}

fn row_values_close(a: &Row, b: &Row) -> bool {
    a.values.len() == b.values.len()
        && a.values.iter().zip(&b.values).all(|(x, y)| value_close(x, y))
}

/// Canonical value order over whole rows, ignoring rowids. Used to align two
/// multisets before tolerant comparison.
fn canonical_row_cmp(a: &Row, b: &Row) -> Ordering {
    for (x, y) in a.values.iter().zip(&b.values) {
        // Same schema on both sides, so same variants per column.
        match compare_values(x, y).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Compares two query results.
///
/// `ordered = true` demands sequence equality of the row values (rowids are
/// provenance, not data, and are ignored); `ordered = false` compares the
/// results as bags. Float64 fields compare at [`FLOAT_REL_TOLERANCE`]
/// relative tolerance. Differing schemas (or rows vs scalar) are a
/// `SchemaMismatch` error, not inequality.
pub fn multiset_equal(
    a: &QueryOutput,
    b: &QueryOutput,
    ordered: bool,
) -> Result<bool, ModelError> {
    match (a, b) {
        (QueryOutput::Scalar(x), QueryOutput::Scalar(y)) => {
            if x.kind() != y.kind() {
                return Err(ModelError::SchemaMismatch(format!(
                    "scalar kinds differ: {} vs {}",
                    x.kind(),
                    y.kind()
                )));
            }
            Ok(value_close(x, y))
        }
        (QueryOutput::Rows(ra), QueryOutput::Rows(rb)) => {
            if ra.schema() != rb.schema() {
                return Err(ModelError::SchemaMismatch(
                    "relation schemas differ".to_string(),
                ));
            }
            if ra.len() != rb.len() {
                return Ok(false);
            }
            if ordered {
                Ok(ra
                    .rows()
                    .iter()
                    .zip(rb.rows())
                    .all(|(x, y)| row_values_close(x, y)))
            } else {
                let mut xs: Vec<&Row> = ra.rows().iter().collect();
                let mut ys: Vec<&Row> = rb.rows().iter().collect();
                xs.sort_by(|p, q| canonical_row_cmp(p, q));
                ys.sort_by(|p, q| canonical_row_cmp(p, q));
                Ok(xs
                    .iter()
                    .zip(&ys)
                    .all(|(x, y)| row_values_close(x, y)))
            }
        }
        _ => Err(ModelError::SchemaMismatch(
            "rows compared with scalar".to_string(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{AggKind, Predicate, ScalarExpr};
    use crate::plan::{catalog_of, validate_plan, QueryPlan};
    use crate::schema::{Database, Schema};
    use crate::value::ValueKind;

    fn ab_db(rows: &[(i64, f64)]) -> Database {
        let schema = Schema::new(vec![("A", ValueKind::Int64), ("B", ValueKind::Float64)]).unwrap();
        let rows = rows
            .iter()
            .enumerate()
            .map(|(i, (a, b))| Row::new(vec![Value::Int64(*a), Value::Float64(*b)], i as i64))
            .collect();
        let mut db = Database::new();
        db.insert("r", Relation::new(schema, rows).unwrap());
        db
    }

    fn run(plan: QueryPlan, db: &Database) -> QueryOutput {
        let checked = validate_plan(&plan, &catalog_of(db)).unwrap();
        eval_oracle(&checked, db).unwrap()
    }

    #[test]
    fn select_then_sum() {
        // Hand fold: rows with A < 10 contribute 10 + 30 = 40.
        let db = ab_db(&[(5, 10.0), (12, 20.0), (3, 30.0)]);
        let plan = QueryPlan::scan("r")
            .select(Predicate::col_lt("A", Value::Int64(10)))
            .agg(AggKind::Sum(ScalarExpr::column("B")));
        assert_eq!(run(plan, &db), QueryOutput::Scalar(Value::Float64(40.0)));
    }

    #[test]
    fn empty_relation_zero_elements() {
        let db = ab_db(&[]);
        let count = QueryPlan::scan("r").agg(AggKind::Count);
        assert_eq!(run(count, &db), QueryOutput::Scalar(Value::Int64(0)));
        let sum = QueryPlan::scan("r").agg(AggKind::Sum(ScalarExpr::column("B")));
        assert_eq!(run(sum, &db), QueryOutput::Scalar(Value::Float64(0.0)));
        let rows = QueryPlan::scan("r").select(Predicate::Const(true));
        assert_eq!(run(rows, &db).row_count(), 0);
    }

    #[test]
    fn int_sum_overflow_surfaces() {
        let schema = Schema::new(vec![("A", ValueKind::Int64)]).unwrap();
        let rows = vec![
            Row::new(vec![Value::Int64(i64::MAX)], 0),
            Row::new(vec![Value::Int64(1)], 1),
        ];
        let mut db = Database::new();
        db.insert("r", Relation::new(schema, rows).unwrap());
        let plan = QueryPlan::scan("r").agg(AggKind::Sum(ScalarExpr::column("A")));
        let checked = validate_plan(&plan, &catalog_of(&db)).unwrap();
        assert_eq!(
            eval_oracle(&checked, &db).unwrap_err(),
            ExecError::ArithmeticOverflow
        );
    }

    #[test]
    fn bag_vs_sequence_equality() {
        let schema = Schema::new(vec![("A", ValueKind::Int64)]).unwrap();
        let rel = |vals: &[i64]| {
            Relation::new(
                schema.clone(),
                vals.iter()
                    .enumerate()
                    .map(|(i, v)| Row::new(vec![Value::Int64(*v)], i as i64))
                    .collect(),
            )
            .unwrap()
        };
        let a = QueryOutput::Rows(rel(&[1, 2]));
        let b = QueryOutput::Rows(rel(&[2, 1]));
        assert!(multiset_equal(&a, &b, false).unwrap());
        assert!(!multiset_equal(&a, &b, true).unwrap());
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let a = QueryOutput::Scalar(Value::Int64(1));
        let b = QueryOutput::Scalar(Value::Float64(1.0));
        assert!(multiset_equal(&a, &b, false).is_err());
    }

    #[test]
    fn determinism_two_runs_identical() {
        let db = ab_db(&[(5, 10.0), (12, 20.0), (3, 30.0), (3, 40.0)]);
        let plan = QueryPlan::scan("r").sort("A", true).limit(3);
        let checked = validate_plan(&plan, &catalog_of(&db)).unwrap();
        let one = eval_oracle(&checked, &db).unwrap();
        let two = eval_oracle(&checked, &db).unwrap();
        assert_eq!(one, two);
    }
}
