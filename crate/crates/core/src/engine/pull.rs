//! The pull engine: the iterator model.
//!
//! Each operator exposes `open`/`next` and requests tuples from its source on
//! demand. End-of-stream is an absent result rather than an in-band sentinel.
//! The selection operator comes in two observably-equivalent variants: the
//! inline-aware one has a single textual `source.next()` call site, the naive
//! one has two (initialization plus loop step). Each operator reports its
//! call-site count so the structural difference is checkable.

use super::joinmap::JoinMultiMap;
use super::{sort_rows_stable, values_equal};
use crate::error::{ExecError, ModelError};
use crate::expr::{AggKind, Predicate, Projector};
use crate::output::QueryOutput;
use crate::plan::{CheckedNode, CheckedOp, CheckedPlan};
use crate::schema::{row_concat, Database, Relation, Row};
use crate::stats::ExecStats;
use crate::value::Value;
use std::collections::HashSet;
use std::sync::Arc;

/// Which selection implementation to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectVariant {
    /// Single textual call site to the source (do/while shape).
    InlineAware,
    /// Two textual call sites: one before the loop, one inside it.
    Naive,
}

/// The iterator-model operator interface.
///
/// After `next` returns `None` once, every later call returns `None`
/// (fuse-closed). `next` must only be called after `open`.
pub trait PullOperator {
    fn open(&mut self);
    fn next(&mut self, stats: &mut ExecStats) -> Result<Option<Row>, ExecError>;
    /// Number of textual `source.next()` call sites in this operator's
    /// `next` implementation.
    fn source_call_sites(&self) -> u32;
}

struct PullScan {
    rel: Arc<Relation>,
    cursor: usize,
    id: String,
}

impl PullOperator for PullScan {
    fn open(&mut self) {
        self.cursor = 0;
    }

    fn next(&mut self, stats: &mut ExecStats) -> Result<Option<Row>, ExecError> {
        stats.op(&self.id).pull_next_calls += 1;
        if self.cursor < self.rel.len() {
            let row = self.rel.rows()[self.cursor].clone();
            self.cursor += 1;
            stats.source_rows_read += 1;
            Ok(Some(row))
        } else {
            Ok(None)
        }
    }

    fn source_call_sites(&self) -> u32 {
        0
    }
}

struct PullSelectInlineAware {
    source: Box<dyn PullOperator>,
    pred: Predicate,
    id: String,
}

impl PullOperator for PullSelectInlineAware {
    fn open(&mut self) {
        self.source.open();
    }

    fn next(&mut self, stats: &mut ExecStats) -> Result<Option<Row>, ExecError> {
        stats.op(&self.id).pull_next_calls += 1;
        loop {
            let elem = self.source.next(stats)?; // the single call site
            match elem {
                None => return Ok(None),
                Some(row) => {
                    if self.pred.eval(&row)? {
                        return Ok(Some(row));
                    }
                }
            }
        }
    }

    fn source_call_sites(&self) -> u32 {
        1
    }
}

struct PullSelectNaive {
    source: Box<dyn PullOperator>,
    pred: Predicate,
    id: String,
}

impl PullOperator for PullSelectNaive {
    fn open(&mut self) {
        self.source.open();
    }

    fn next(&mut self, stats: &mut ExecStats) -> Result<Option<Row>, ExecError> {
        stats.op(&self.id).pull_next_calls += 1;
        let mut elem = self.source.next(stats)?; // call site one
        while let Some(row) = &elem {
            if self.pred.eval(row)? {
                break;
            }
            elem = self.source.next(stats)?; // call site two
        }
        Ok(elem)
    }

    fn source_call_sites(&self) -> u32 {
        2
    }
}

struct PullProject {
    source: Box<dyn PullOperator>,
    proj: Projector,
    id: String,
}

impl PullOperator for PullProject {
    fn open(&mut self) {
        self.source.open();
    }

    fn next(&mut self, stats: &mut ExecStats) -> Result<Option<Row>, ExecError> {
        stats.op(&self.id).pull_next_calls += 1;
        match self.source.next(stats)? {
            Some(row) => Ok(Some(self.proj.apply(&row)?)),
            None => Ok(None),
        }
    }

    fn source_call_sites(&self) -> u32 {
        1
    }
}

struct PullLimit {
    source: Box<dyn PullOperator>,
    n: u64,
    count: u64,
    id: String,
}

impl PullOperator for PullLimit {
    fn open(&mut self) {
        self.count = 0;
        self.source.open();
    }

    fn next(&mut self, stats: &mut ExecStats) -> Result<Option<Row>, ExecError> {
        stats.op(&self.id).pull_next_calls += 1;
        if self.count < self.n {
            self.count += 1;
            self.source.next(stats)
        } else {
            Ok(None)
        }
    }

    fn source_call_sites(&self) -> u32 {
        1
    }
}

struct PullSort {
    source: Box<dyn PullOperator>,
    key: usize,
    ascending: bool,
    buffer: Vec<Row>,
    pos: usize,
    built: bool,
    id: String,
}

impl PullOperator for PullSort {
    fn open(&mut self) {
        self.buffer.clear();
        self.pos = 0;
        self.built = false;
        self.source.open();
    }

    fn next(&mut self, stats: &mut ExecStats) -> Result<Option<Row>, ExecError> {
        stats.op(&self.id).pull_next_calls += 1;
        if !self.built {
            while let Some(row) = self.source.next(stats)? {
                stats.buffer_grow(1);
                self.buffer.push(row);
            }
            sort_rows_stable(&mut self.buffer, self.key, self.ascending)?;
            self.built = true;
        }
        if self.pos < self.buffer.len() {
            let row = self.buffer[self.pos].clone();
            self.pos += 1;
            stats.buffer_shrink(1);
            Ok(Some(row))
        } else {
            Ok(None)
        }
    }

    fn source_call_sites(&self) -> u32 {
        1
    }
}

/// Hash join and semi hash join share the build/probe machinery: the left
/// child is drained into the multi-map on the first `next`, then the right
/// child streams through with at most one right pull per returned result (or
/// per exhausted probe group).
struct PullHashJoin {
    left: Box<dyn PullOperator>,
    right: Box<dyn PullOperator>,
    left_key: usize,
    right_key: usize,
    cond: Option<Predicate>,
    semi: bool,
    map: JoinMultiMap,
    built: bool,
    /// Probe cursor: current right row plus the next bucket index to visit.
    probe: Option<(Row, usize)>,
    emitted: HashSet<i64>,
    next_rowid: i64,
    id: String,
}

impl PullHashJoin {
    fn scan_bucket(&mut self) -> Result<Option<Row>, ExecError> {
        let Some((rrow, pos)) = &mut self.probe else {
            return Ok(None);
        };
        let rkey = rrow.value(self.right_key).clone();
        let bucket = self.map.bucket(&rkey);
        while *pos < bucket.len() {
            let lrow = &bucket[*pos];
            *pos += 1;
            if !values_equal(lrow.value(self.left_key), &rkey)? {
                continue;
            }
            if self.semi {
                if self.emitted.insert(lrow.rowid) {
                    return Ok(Some(lrow.clone()));
                }
                continue;
            }
            let joined = row_concat(lrow, rrow, self.next_rowid);
            if let Some(p) = &self.cond {
                if !p.eval(&joined)? {
                    continue;
                }
            }
            self.next_rowid += 1;
            return Ok(Some(joined));
        }
        self.probe = None;
        Ok(None)
    }
}

impl PullOperator for PullHashJoin {
    fn open(&mut self) {
        self.map = JoinMultiMap::new();
        self.built = false;
        self.probe = None;
        self.emitted.clear();
        self.next_rowid = 0;
        self.left.open();
        self.right.open();
    }

    fn next(&mut self, stats: &mut ExecStats) -> Result<Option<Row>, ExecError> {
        stats.op(&self.id).pull_next_calls += 1;
        if !self.built {
            while let Some(lrow) = self.left.next(stats)? {
                stats.buffer_grow(1);
                let key = lrow.value(self.left_key).clone();
                self.map.insert(&key, lrow);
            }
            self.built = true;
        }
        loop {
            if let Some(row) = self.scan_bucket()? {
                return Ok(Some(row));
            }
            match self.right.next(stats)? {
                Some(rrow) => self.probe = Some((rrow, 0)),
                None => return Ok(None),
            }
        }
    }

    fn source_call_sites(&self) -> u32 {
        1
    }
}

/// Sort-merge join over two key-sorted inputs, 1-to-n with n on the left.
/// Both inputs stay pipelined; only the current left key group is buffered
/// (see [`MergeGroupJoin`]).
struct PullMergeJoin {
    left: Box<dyn PullOperator>,
    right: Box<dyn PullOperator>,
    state: super::MergeGroupJoin,
    id: String,
}

impl PullOperator for PullMergeJoin {
    fn open(&mut self) {
        self.state.reset();
        self.left.open();
        self.right.open();
    }

    fn next(&mut self, stats: &mut ExecStats) -> Result<Option<Row>, ExecError> {
        stats.op(&self.id).pull_next_calls += 1;
        let PullMergeJoin { left, right, state, .. } = self;
        state.next_pair(
            stats,
            &mut |stats| left.next(stats),
            &mut |stats| right.next(stats),
        )
    }

    fn source_call_sites(&self) -> u32 {
        1
    }
}

/// Root-only scalar aggregation. Drains its source on the first call and
/// returns the folded scalar exactly once; absent thereafter.
pub struct PullAggRoot {
    source: Box<dyn PullOperator>,
    agg: AggKind,
    zero: Value,
    done: bool,
    id: String,
}

impl PullAggRoot {
    pub fn open(&mut self) {
        self.done = false;
        self.source.open();
    }

    pub fn next_scalar(&mut self, stats: &mut ExecStats) -> Result<Option<Value>, ExecError> {
        stats.op(&self.id).pull_next_calls += 1;
        if self.done {
            return Ok(None);
        }
        let mut acc = self.zero.clone();
        while let Some(row) = self.source.next(stats)? {
            acc = self.agg.step(&row, acc)?;
        }
        self.done = true;
        Ok(Some(acc))
    }
}

/// Compiles a checked plan (minus a root aggregate) into a pull operator tree.
pub fn build_pull(
    node: &CheckedNode,
    db: &Database,
    variant: SelectVariant,
) -> Result<Box<dyn PullOperator>, ExecError> {
    let id = node.id.clone();
    Ok(match &node.op {
        CheckedOp::Scan { relation } => {
            let rel = db.get(relation).ok_or_else(|| {
                ExecError::Model(ModelError::SchemaMismatch(format!(
                    "relation {relation} not loaded"
                )))
            })?;
            Box::new(PullScan {
                rel: Arc::clone(rel),
                cursor: 0,
                id,
            })
        }
        CheckedOp::Select { input, pred } => {
            let source = build_pull(input, db, variant)?;
            match variant {
                SelectVariant::InlineAware => Box::new(PullSelectInlineAware {
                    source,
                    pred: pred.clone(),
                    id,
                }),
                SelectVariant::Naive => Box::new(PullSelectNaive {
                    source,
                    pred: pred.clone(),
                    id,
                }),
            }
        }
        CheckedOp::Project { input, proj } => Box::new(PullProject {
            source: build_pull(input, db, variant)?,
            proj: proj.clone(),
            id,
        }),
        CheckedOp::Sort { input, key, ascending } => Box::new(PullSort {
            source: build_pull(input, db, variant)?,
            key: *key,
            ascending: *ascending,
            buffer: Vec::new(),
            pos: 0,
            built: false,
            id,
        }),
        CheckedOp::Limit { input, n } => Box::new(PullLimit {
            source: build_pull(input, db, variant)?,
            n: *n,
            count: 0,
            id,
        }),
        CheckedOp::Agg { .. } => {
            unreachable!("aggregate below root survived validation")
        }
        CheckedOp::HashJoin {
            left,
            right,
            left_key,
            right_key,
            cond,
        } => Box::new(PullHashJoin {
            left: build_pull(left, db, variant)?,
            right: build_pull(right, db, variant)?,
            left_key: *left_key,
            right_key: *right_key,
            cond: cond.clone(),
            semi: false,
            map: JoinMultiMap::new(),
            built: false,
            probe: None,
            emitted: HashSet::new(),
            next_rowid: 0,
            id,
        }),
        CheckedOp::SemiHashJoin {
            left,
            right,
            left_key,
            right_key,
        } => Box::new(PullHashJoin {
            left: build_pull(left, db, variant)?,
            right: build_pull(right, db, variant)?,
            left_key: *left_key,
            right_key: *right_key,
            cond: None,
            semi: true,
            map: JoinMultiMap::new(),
            built: false,
            probe: None,
            emitted: HashSet::new(),
            next_rowid: 0,
            id,
        }),
        CheckedOp::MergeJoin {
            left,
            right,
            left_key,
            right_key,
        } => Box::new(PullMergeJoin {
            left: build_pull(left, db, variant)?,
            right: build_pull(right, db, variant)?,
            state: super::MergeGroupJoin::new(*left_key, *right_key),
            id,
        }),
    })
}

/// Builds the root aggregation driver for an aggregate plan.
pub fn build_pull_agg(
    plan: &CheckedPlan,
    db: &Database,
    variant: SelectVariant,
) -> Result<PullAggRoot, ExecError> {
    let CheckedOp::Agg { input, agg } = &plan.root.op else {
        return Err(ExecError::Model(ModelError::SchemaMismatch(
            "plan root is not an aggregate".to_string(),
        )));
    };
    let zero = agg
        .zero(&input.schema)
        .map_err(|e| ModelError::SchemaMismatch(e.to_string()))?;
    Ok(PullAggRoot {
        source: build_pull(input, db, variant)?,
        agg: agg.clone(),
        zero,
        done: false,
        id: plan.root.id.clone(),
    })
}

/// Runs a checked plan on the pull engine.
pub fn run_pull(
    plan: &CheckedPlan,
    db: &Database,
    variant: SelectVariant,
    stats: &mut ExecStats,
) -> Result<QueryOutput, ExecError> {
    if plan.is_scalar() {
        let mut root = build_pull_agg(plan, db, variant)?;
        root.open();
        let value = root
            .next_scalar(stats)?
            .expect("first aggregate call yields the scalar");
        stats.output_rows = 1;
        return Ok(QueryOutput::Scalar(value));
    }
    let mut root = build_pull(&plan.root, db, variant)?;
    root.open();
    let mut rows = Vec::new();
    while let Some(row) = root.next(stats)? {
        rows.push(row);
    }
    stats.output_rows = rows.len() as u64;
    let mut rel = Relation::new(plan.root.schema.clone(), rows)?;
    if let Some(idx) = plan.root.sorted_on {
        let name = plan.root.schema.column_name(idx).to_string();
        rel = rel.with_sorted_on(&name)?;
    }
    Ok(QueryOutput::Rows(rel))
}
