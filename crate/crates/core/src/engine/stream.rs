//! The stream-fusion engine.
//!
//! Pull-based at the operator level: instead of an optional row, each
//! `stream()` call returns a [`Step`]. A selection never loops — a
//! non-qualifying row surfaces as `Skip` to the caller, so a filter is one
//! `source.stream()` call plus a `Step::filter`. `Done` plays the role of
//! the pull engine's end-of-stream sentinel.
//!
//! Every operator is implemented twice, once per step encoding:
//!
//! - `stream()` works over sum-typed [`Step`] values (run either unboxed, or
//!   in a diagnostic "boxed" mode that heap-allocates every produced step
//!   and counts it, modeling the intermediate-object cost),
//! - `stream_visit()` is the visitor (Church) encoding: the operators push
//!   each round's outcome through composed [`RowStepVisitor`] continuations
//!   without constructing step values at all.
//!
//! Both paths maintain identical yield/skip/done counters; only
//! `boxed_step_allocs` distinguishes the modes.

use super::joinmap::JoinMultiMap;
use super::step::Step;
use super::{sort_rows_stable, values_equal, MergeGroupJoin};
use crate::error::{ExecError, ModelError};
use crate::expr::{AggKind, Predicate, Projector};
use crate::output::QueryOutput;
use crate::plan::{CheckedNode, CheckedOp, CheckedPlan};
use crate::schema::{row_concat, Database, Relation, Row};
use crate::stats::ExecStats;
use crate::value::Value;
use std::collections::HashSet;
use std::sync::Arc;

/// How step values are built and accounted during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    /// Sum-typed steps passed by value on the stack.
    Sum,
    /// Sum-typed steps heap-allocated per step, with each allocation
    /// counted — the naive object-per-step regime.
    Boxed,
    /// Visitor/Church encoding: continuations compose, no step values.
    Visitor,
}

/// The visitor-path consumer interface. One continuation fires per round.
pub trait RowStepVisitor {
    fn yld(&mut self, stats: &mut ExecStats, row: Row) -> Result<(), ExecError>;
    fn skip(&mut self, stats: &mut ExecStats);
    fn done(&mut self, stats: &mut ExecStats);
}

/// The stream-fusion operator interface. After a `Done` the operator keeps
/// answering `Done` (fuse-closed).
pub trait StreamOperator {
    fn open(&mut self);
    /// Sum/boxed encoding: one step per call.
    fn stream(&mut self, stats: &mut ExecStats) -> Result<Step<Row>, ExecError>;
    /// Visitor encoding: dispatches exactly one continuation per call.
    fn stream_visit(
        &mut self,
        stats: &mut ExecStats,
        v: &mut dyn RowStepVisitor,
    ) -> Result<(), ExecError>;
}

fn note_yield(stats: &mut ExecStats, id: &str) {
    stats.op(id).steps_yield += 1;
}

fn note_skip(stats: &mut ExecStats, id: &str) {
    stats.op(id).steps_skip += 1;
}

fn note_done(stats: &mut ExecStats, id: &str) {
    stats.op(id).steps_done += 1;
}

/// Books the step an operator is about to return. In boxed mode the step is
/// round-tripped through a real heap allocation and the allocation counted.
fn finish_step(stats: &mut ExecStats, id: &str, step: Step<Row>, mode: StepMode) -> Step<Row> {
    let counters = stats.op(id);
    match &step {
        Step::Yield(_) => counters.steps_yield += 1,
        Step::Skip => counters.steps_skip += 1,
        Step::Done => counters.steps_done += 1,
    }
    if mode == StepMode::Boxed {
        counters.boxed_step_allocs += 1;
        let boxed = Box::new(step);
        *boxed
    } else {
        step
    }
}

/// Captures a visitor round back into a step value. Used by blocking
/// operators (sort, joins) whose build loops consume their sources
/// internally regardless of encoding.
#[derive(Default)]
struct CaptureRound {
    step: Option<Step<Row>>,
}

impl RowStepVisitor for CaptureRound {
    fn yld(&mut self, _stats: &mut ExecStats, row: Row) -> Result<(), ExecError> {
        self.step = Some(Step::Yield(row));
        Ok(())
    }
    fn skip(&mut self, _stats: &mut ExecStats) {
        self.step = Some(Step::Skip);
    }
    fn done(&mut self, _stats: &mut ExecStats) {
        self.step = Some(Step::Done);
    }
}

/// One round of the source in whichever encoding the run uses.
fn pull_round(
    op: &mut dyn StreamOperator,
    stats: &mut ExecStats,
    mode: StepMode,
) -> Result<Step<Row>, ExecError> {
    if mode == StepMode::Visitor {
        let mut cap = CaptureRound::default();
        op.stream_visit(stats, &mut cap)?;
        Ok(cap.step.expect("visitor dispatches exactly once per round"))
    } else {
        op.stream(stats)
    }
}

/// Tight loop advancing past Skips: used where an operator consumes a side
/// internally (sort and join builds, merge-join inputs) rather than
/// surfacing its skips.
fn pull_row(
    op: &mut dyn StreamOperator,
    stats: &mut ExecStats,
    mode: StepMode,
) -> Result<Option<Row>, ExecError> {
    loop {
        match pull_round(op, stats, mode)? {
            Step::Yield(row) => return Ok(Some(row)),
            Step::Skip => continue,
            Step::Done => return Ok(None),
        }
    }
}

struct StreamScan {
    rel: Arc<Relation>,
    cursor: usize,
    id: String,
    mode: StepMode,
}

impl StreamOperator for StreamScan {
    fn open(&mut self) {
        self.cursor = 0;
    }

    fn stream(&mut self, stats: &mut ExecStats) -> Result<Step<Row>, ExecError> {
        stats.op(&self.id).stream_calls += 1;
        let step = if self.cursor < self.rel.len() {
            let row = self.rel.rows()[self.cursor].clone();
            self.cursor += 1;
            stats.source_rows_read += 1;
            Step::Yield(row)
        } else {
            Step::Done
        };
        Ok(finish_step(stats, &self.id, step, self.mode))
    }

    fn stream_visit(
        &mut self,
        stats: &mut ExecStats,
        v: &mut dyn RowStepVisitor,
    ) -> Result<(), ExecError> {
        stats.op(&self.id).stream_calls += 1;
        if self.cursor < self.rel.len() {
            let row = self.rel.rows()[self.cursor].clone();
            self.cursor += 1;
            stats.source_rows_read += 1;
            note_yield(stats, &self.id);
            v.yld(stats, row)
        } else {
            note_done(stats, &self.id);
            v.done(stats);
            Ok(())
        }
    }
}

struct StreamSelect {
    source: Box<dyn StreamOperator>,
    pred: Predicate,
    id: String,
    mode: StepMode,
}

struct SelectVisitor<'a> {
    pred: &'a Predicate,
    id: &'a str,
    out: &'a mut dyn RowStepVisitor,
}

impl RowStepVisitor for SelectVisitor<'_> {
    fn yld(&mut self, stats: &mut ExecStats, row: Row) -> Result<(), ExecError> {
        if self.pred.eval(&row)? {
            note_yield(stats, self.id);
            self.out.yld(stats, row)
        } else {
            note_skip(stats, self.id);
            self.out.skip(stats);
            Ok(())
        }
    }
    fn skip(&mut self, stats: &mut ExecStats) {
        note_skip(stats, self.id);
        self.out.skip(stats);
    }
    fn done(&mut self, stats: &mut ExecStats) {
        note_done(stats, self.id);
        self.out.done(stats);
    }
}

impl StreamOperator for StreamSelect {
    fn open(&mut self) {
        self.source.open();
    }

    fn stream(&mut self, stats: &mut ExecStats) -> Result<Step<Row>, ExecError> {
        stats.op(&self.id).stream_calls += 1;
        // Exactly one source round, no loop: a rejected row becomes a Skip
        // for the caller.
        let step = self.source.stream(stats)?;
        let mut err = None;
        let pred = &self.pred;
        let out = step.filter(|row| match pred.eval(row) {
            Ok(keep) => keep,
            Err(e) => {
                err = Some(e);
                false
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        Ok(finish_step(stats, &self.id, out, self.mode))
    }

    fn stream_visit(
        &mut self,
        stats: &mut ExecStats,
        v: &mut dyn RowStepVisitor,
    ) -> Result<(), ExecError> {
        stats.op(&self.id).stream_calls += 1;
        let StreamSelect { source, pred, id, .. } = self;
        source.stream_visit(stats, &mut SelectVisitor { pred, id, out: v })
    }
}

struct StreamProject {
    source: Box<dyn StreamOperator>,
    proj: Projector,
    id: String,
    mode: StepMode,
}

struct ProjectVisitor<'a> {
    proj: &'a Projector,
    id: &'a str,
    out: &'a mut dyn RowStepVisitor,
}

impl RowStepVisitor for ProjectVisitor<'_> {
    fn yld(&mut self, stats: &mut ExecStats, row: Row) -> Result<(), ExecError> {
        let out = self.proj.apply(&row)?;
        note_yield(stats, self.id);
        self.out.yld(stats, out)
    }
    fn skip(&mut self, stats: &mut ExecStats) {
        note_skip(stats, self.id);
        self.out.skip(stats);
    }
    fn done(&mut self, stats: &mut ExecStats) {
        note_done(stats, self.id);
        self.out.done(stats);
    }
}

impl StreamOperator for StreamProject {
    fn open(&mut self) {
        self.source.open();
    }

    fn stream(&mut self, stats: &mut ExecStats) -> Result<Step<Row>, ExecError> {
        stats.op(&self.id).stream_calls += 1;
        let step = self.source.stream(stats)?;
        let mut err = None;
        let proj = &self.proj;
        // The projector runs only on Yield: Skips map to Skips untouched.
        let out = step.map(|row| match proj.apply(&row) {
            Ok(mapped) => mapped,
            Err(e) => {
                err = Some(e);
                row
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        Ok(finish_step(stats, &self.id, out, self.mode))
    }

    fn stream_visit(
        &mut self,
        stats: &mut ExecStats,
        v: &mut dyn RowStepVisitor,
    ) -> Result<(), ExecError> {
        stats.op(&self.id).stream_calls += 1;
        let StreamProject { source, proj, id, .. } = self;
        source.stream_visit(stats, &mut ProjectVisitor { proj, id, out: v })
    }
}

struct StreamLimit {
    source: Box<dyn StreamOperator>,
    n: u64,
    count: u64,
    id: String,
    mode: StepMode,
}

struct LimitVisitor<'a> {
    count: &'a mut u64,
    id: &'a str,
    out: &'a mut dyn RowStepVisitor,
}

impl RowStepVisitor for LimitVisitor<'_> {
    fn yld(&mut self, stats: &mut ExecStats, row: Row) -> Result<(), ExecError> {
        *self.count += 1;
        note_yield(stats, self.id);
        self.out.yld(stats, row)
    }
    fn skip(&mut self, stats: &mut ExecStats) {
        note_skip(stats, self.id);
        self.out.skip(stats);
    }
    fn done(&mut self, stats: &mut ExecStats) {
        note_done(stats, self.id);
        self.out.done(stats);
    }
}

impl StreamOperator for StreamLimit {
    fn open(&mut self) {
        self.count = 0;
        self.source.open();
    }

    fn stream(&mut self, stats: &mut ExecStats) -> Result<Step<Row>, ExecError> {
        stats.op(&self.id).stream_calls += 1;
        if self.count == self.n {
            // Budget exhausted: Done without touching the source.
            return Ok(finish_step(stats, &self.id, Step::Done, self.mode));
        }
        let StreamLimit { source, count, .. } = self;
        let step = source.stream(stats)?;
        // The counter lives inside map, so only Yields consume budget;
        // Skips pass through without counting.
        let out = step.map(|row| {
            *count += 1;
            row
        });
        Ok(finish_step(stats, &self.id, out, self.mode))
    }

    fn stream_visit(
        &mut self,
        stats: &mut ExecStats,
        v: &mut dyn RowStepVisitor,
    ) -> Result<(), ExecError> {
        stats.op(&self.id).stream_calls += 1;
        if self.count == self.n {
            note_done(stats, &self.id);
            v.done(stats);
            return Ok(());
        }
        let StreamLimit { source, count, id, .. } = self;
        source.stream_visit(stats, &mut LimitVisitor { count, id, out: v })
    }
}

/// Sort: the build phase drives the source to Done (materializing, counted),
/// then the buffer streams out.
struct StreamSort {
    source: Box<dyn StreamOperator>,
    key: usize,
    ascending: bool,
    buf: Vec<Row>,
    pos: usize,
    built: bool,
    id: String,
    mode: StepMode,
}

impl StreamSort {
    fn build(&mut self, stats: &mut ExecStats) -> Result<(), ExecError> {
        if self.built {
            return Ok(());
        }
        while let Some(row) = pull_row(self.source.as_mut(), stats, self.mode)? {
            stats.buffer_grow(1);
            self.buf.push(row);
        }
        sort_rows_stable(&mut self.buf, self.key, self.ascending)?;
        self.built = true;
        Ok(())
    }

    fn next_emission(&mut self, stats: &mut ExecStats) -> Step<Row> {
        if self.pos < self.buf.len() {
            let row = self.buf[self.pos].clone();
            self.pos += 1;
            stats.buffer_shrink(1);
            Step::Yield(row)
        } else {
            Step::Done
        }
    }
}

impl StreamOperator for StreamSort {
    fn open(&mut self) {
        self.buf.clear();
        self.pos = 0;
        self.built = false;
        self.source.open();
    }

    fn stream(&mut self, stats: &mut ExecStats) -> Result<Step<Row>, ExecError> {
        stats.op(&self.id).stream_calls += 1;
        self.build(stats)?;
        let step = self.next_emission(stats);
        Ok(finish_step(stats, &self.id, step, self.mode))
    }

    fn stream_visit(
        &mut self,
        stats: &mut ExecStats,
        v: &mut dyn RowStepVisitor,
    ) -> Result<(), ExecError> {
        stats.op(&self.id).stream_calls += 1;
        self.build(stats)?;
        match self.next_emission(stats) {
            Step::Yield(row) => {
                note_yield(stats, &self.id);
                v.yld(stats, row)
            }
            _ => {
                note_done(stats, &self.id);
                v.done(stats);
                Ok(())
            }
        }
    }
}

/// Hash join / semi hash join: the build phase drains the left side to Done
/// into the multi-map; probing pulls at most one right round per call, and a
/// right row without matches surfaces as a Skip.
struct StreamHashJoin {
    left: Box<dyn StreamOperator>,
    right: Box<dyn StreamOperator>,
    left_key: usize,
    right_key: usize,
    cond: Option<Predicate>,
    semi: bool,
    map: JoinMultiMap,
    built: bool,
    probe: Option<(Row, usize)>,
    emitted: HashSet<i64>,
    next_rowid: i64,
    id: String,
    mode: StepMode,
}

impl StreamHashJoin {
    fn build(&mut self, stats: &mut ExecStats) -> Result<(), ExecError> {
        if self.built {
            return Ok(());
        }
        while let Some(lrow) = pull_row(self.left.as_mut(), stats, self.mode)? {
            stats.buffer_grow(1);
            let key = lrow.value(self.left_key).clone();
            self.map.insert(&key, lrow);
        }
        self.built = true;
        Ok(())
    }

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

    fn next_emission(&mut self, stats: &mut ExecStats) -> Result<Step<Row>, ExecError> {
        self.build(stats)?;
        if let Some(row) = self.scan_bucket()? {
            return Ok(Step::Yield(row));
        }
        match pull_round(self.right.as_mut(), stats, self.mode)? {
            Step::Yield(rrow) => {
                self.probe = Some((rrow, 0));
                match self.scan_bucket()? {
                    Some(row) => Ok(Step::Yield(row)),
                    // A right row with no matches is this round's Skip.
                    None => Ok(Step::Skip),
                }
            }
            Step::Skip => Ok(Step::Skip),
            Step::Done => Ok(Step::Done),
        }
    }
}

impl StreamOperator for StreamHashJoin {
    fn open(&mut self) {
        self.map = JoinMultiMap::new();
        self.built = false;
        self.probe = None;
        self.emitted.clear();
        self.next_rowid = 0;
        self.left.open();
        self.right.open();
    }

    fn stream(&mut self, stats: &mut ExecStats) -> Result<Step<Row>, ExecError> {
        stats.op(&self.id).stream_calls += 1;
        let step = self.next_emission(stats)?;
        Ok(finish_step(stats, &self.id, step, self.mode))
    }

    fn stream_visit(
        &mut self,
        stats: &mut ExecStats,
        v: &mut dyn RowStepVisitor,
    ) -> Result<(), ExecError> {
        stats.op(&self.id).stream_calls += 1;
        match self.next_emission(stats)? {
            Step::Yield(row) => {
                note_yield(stats, &self.id);
                v.yld(stats, row)
            }
            Step::Skip => {
                note_skip(stats, &self.id);
                v.skip(stats);
                Ok(())
            }
            Step::Done => {
                note_done(stats, &self.id);
                v.done(stats);
                Ok(())
            }
        }
    }
}

/// Merge join: pipelines both sorted inputs, buffering one left key group.
/// Skips of the inputs are consumed in a tight internal loop instead of
/// being surfaced one round at a time.
struct StreamMergeJoin {
    left: Box<dyn StreamOperator>,
    right: Box<dyn StreamOperator>,
    state: MergeGroupJoin,
    id: String,
    mode: StepMode,
}

impl StreamOperator for StreamMergeJoin {
    fn open(&mut self) {
        self.state.reset();
        self.left.open();
        self.right.open();
    }

    fn stream(&mut self, stats: &mut ExecStats) -> Result<Step<Row>, ExecError> {
        stats.op(&self.id).stream_calls += 1;
        let StreamMergeJoin { left, right, state, mode, .. } = self;
        let step = match state.next_pair(
            stats,
            &mut |stats| pull_row(left.as_mut(), stats, *mode),
            &mut |stats| pull_row(right.as_mut(), stats, *mode),
        )? {
            Some(row) => Step::Yield(row),
            None => Step::Done,
        };
        Ok(finish_step(stats, &self.id, step, self.mode))
    }

    fn stream_visit(
        &mut self,
        stats: &mut ExecStats,
        v: &mut dyn RowStepVisitor,
    ) -> Result<(), ExecError> {
        stats.op(&self.id).stream_calls += 1;
        let StreamMergeJoin { left, right, state, mode, id } = self;
        match state.next_pair(
            stats,
            &mut |stats| pull_row(left.as_mut(), stats, *mode),
            &mut |stats| pull_row(right.as_mut(), stats, *mode),
        )? {
            Some(row) => {
                note_yield(stats, id);
                v.yld(stats, row)
            }
            None => {
                note_done(stats, id);
                v.done(stats);
                Ok(())
            }
        }
    }
}

/// Root-only scalar aggregation: a driver loop folding its source's steps,
/// with yield accumulating, skip a no-op, and done ending the loop.
pub struct StreamAggRoot {
    source: Box<dyn StreamOperator>,
    agg: AggKind,
    zero: Value,
    id: String,
    mode: StepMode,
}

struct AggRound<'a> {
    agg: &'a AggKind,
    acc: &'a mut Option<Value>,
    done: &'a mut bool,
}

impl RowStepVisitor for AggRound<'_> {
    fn yld(&mut self, _stats: &mut ExecStats, row: Row) -> Result<(), ExecError> {
        let a = self.acc.take().expect("accumulator present");
        *self.acc = Some(self.agg.step(&row, a)?);
        Ok(())
    }
    fn skip(&mut self, _stats: &mut ExecStats) {}
    fn done(&mut self, _stats: &mut ExecStats) {
        *self.done = true;
    }
}

impl StreamAggRoot {
    pub fn open(&mut self) {
        self.source.open();
    }

    /// Drives the pipeline to Done and returns the folded scalar.
    pub fn drive(&mut self, stats: &mut ExecStats) -> Result<Value, ExecError> {
        let mut acc = Some(self.zero.clone());
        let mut done = false;
        while !done {
            stats.op(&self.id).stream_calls += 1;
            if self.mode == StepMode::Visitor {
                let StreamAggRoot { source, agg, .. } = self;
                let mut round = AggRound {
                    agg,
                    acc: &mut acc,
                    done: &mut done,
                };
                source.stream_visit(stats, &mut round)?;
            } else {
                let step = self.source.stream(stats)?;
                let mut err = None;
                let agg = &self.agg;
                let acc_slot = &mut acc;
                step.fold(
                    |row| {
                        let a = acc_slot.take().expect("accumulator present");
                        match agg.step(&row, a) {
                            Ok(v) => *acc_slot = Some(v),
                            Err(e) => err = Some(e),
                        }
                    },
                    || {},
                    || done = true,
                );
                if let Some(e) = err {
                    return Err(e);
                }
            }
        }
        Ok(acc.expect("accumulator present"))
    }
}

/// Compiles the non-aggregate part of a plan into a stream operator tree.
pub fn build_stream(
    node: &CheckedNode,
    db: &Database,
    mode: StepMode,
) -> Result<Box<dyn StreamOperator>, ExecError> {
    let id = node.id.clone();
    Ok(match &node.op {
        CheckedOp::Scan { relation } => {
            let rel = db.get(relation).ok_or_else(|| {
                ExecError::Model(ModelError::SchemaMismatch(format!(
                    "relation {relation} not loaded"
                )))
            })?;
            Box::new(StreamScan {
                rel: Arc::clone(rel),
                cursor: 0,
                id,
                mode,
            })
        }
        CheckedOp::Select { input, pred } => Box::new(StreamSelect {
            source: build_stream(input, db, mode)?,
            pred: pred.clone(),
            id,
            mode,
        }),
        CheckedOp::Project { input, proj } => Box::new(StreamProject {
            source: build_stream(input, db, mode)?,
            proj: proj.clone(),
            id,
            mode,
        }),
        CheckedOp::Sort { input, key, ascending } => Box::new(StreamSort {
            source: build_stream(input, db, mode)?,
            key: *key,
            ascending: *ascending,
            buf: Vec::new(),
            pos: 0,
            built: false,
            id,
            mode,
        }),
        CheckedOp::Limit { input, n } => Box::new(StreamLimit {
            source: build_stream(input, db, mode)?,
            n: *n,
            count: 0,
            id,
            mode,
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
        } => Box::new(StreamHashJoin {
            left: build_stream(left, db, mode)?,
            right: build_stream(right, db, mode)?,
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
            mode,
        }),
        CheckedOp::SemiHashJoin {
            left,
            right,
            left_key,
            right_key,
        } => Box::new(StreamHashJoin {
            left: build_stream(left, db, mode)?,
            right: build_stream(right, db, mode)?,
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
            mode,
        }),
        CheckedOp::MergeJoin {
            left,
            right,
            left_key,
            right_key,
        } => Box::new(StreamMergeJoin {
            left: build_stream(left, db, mode)?,
            right: build_stream(right, db, mode)?,
            state: MergeGroupJoin::new(*left_key, *right_key),
            id,
            mode,
        }),
    })
}

/// Builds the root aggregation driver for an aggregate plan.
pub fn build_stream_agg(
    plan: &CheckedPlan,
    db: &Database,
    mode: StepMode,
) -> Result<StreamAggRoot, ExecError> {
    let CheckedOp::Agg { input, agg } = &plan.root.op else {
        return Err(ExecError::Model(ModelError::SchemaMismatch(
            "plan root is not an aggregate".to_string(),
        )));
    };
    let zero = agg
        .zero(&input.schema)
        .map_err(|e| ModelError::SchemaMismatch(e.to_string()))?;
    Ok(StreamAggRoot {
        source: build_stream(input, db, mode)?,
        agg: agg.clone(),
        zero,
        id: plan.root.id.clone(),
        mode,
    })
}

struct CollectRound<'a> {
    rows: &'a mut Vec<Row>,
    done: &'a mut bool,
}

impl RowStepVisitor for CollectRound<'_> {
    fn yld(&mut self, _stats: &mut ExecStats, row: Row) -> Result<(), ExecError> {
        self.rows.push(row);
        Ok(())
    }
    fn skip(&mut self, _stats: &mut ExecStats) {}
    fn done(&mut self, _stats: &mut ExecStats) {
        *self.done = true;
    }
}

/// Runs a checked plan on the stream-fusion engine in the given step mode.
pub fn run_stream(
    plan: &CheckedPlan,
    db: &Database,
    mode: StepMode,
    stats: &mut ExecStats,
) -> Result<QueryOutput, ExecError> {
    if plan.is_scalar() {
        let mut root = build_stream_agg(plan, db, mode)?;
        root.open();
        let value = root.drive(stats)?;
        stats.output_rows = 1;
        return Ok(QueryOutput::Scalar(value));
    }
    let mut root = build_stream(&plan.root, db, mode)?;
    root.open();
    let mut rows = Vec::new();
    if mode == StepMode::Visitor {
        let mut done = false;
        while !done {
            let mut round = CollectRound {
                rows: &mut rows,
                done: &mut done,
            };
            root.stream_visit(stats, &mut round)?;
        }
    } else {
        loop {
            match root.stream(stats)? {
                Step::Yield(row) => rows.push(row),
                Step::Skip => continue,
                Step::Done => break,
            }
        }
    }
    stats.output_rows = rows.len() as u64;
    let mut rel = Relation::new(plan.root.schema.clone(), rows)?;
    if let Some(idx) = plan.root.sorted_on {
        let name = plan.root.schema.column_name(idx).to_string();
        rel = rel.with_sorted_on(&name)?;
    }
    Ok(QueryOutput::Rows(rel))
}
