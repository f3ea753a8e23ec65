//! The loop-fusion lab: one collection API implemented three times via
//! micro-instruction pairs, each making its fusion rule hold definitionally.
//!
//! - [`fold`]: a collection is a continuation of consumers. `build(f1)`
//!   wraps `f1`; `foreach(f2)` applies it. The fold-fusion rule
//!   `build(f1).foreach(f2) ⇝ f1(f2)` is the body of `foreach`.
//! - [`unfold`]: a collection is a generator. `generate(f1)` wraps `f1`;
//!   `destroy(f2)` applies `f2(f1)` — the unfold-fusion rule.
//! - [`stream`]: a collection is a step thunk. `unstream(f1)` wraps;
//!   `stream()` forces — the stream-fusion rule `unstream(() ⇒ e).stream()
//!   ⇝ e`.
//!
//! Pipelines composed through a backend create no intermediate collections;
//! [`FusionStats`] counts materializations (and source/inner-loop
//! iterations) so the fusion claims are checkable rather than asserted.

pub mod fold;
pub mod stream;
pub mod unfold;

use std::cell::Cell;
use std::rc::Rc;

/// Counters shared by every sequence derived from one source.
#[derive(Debug, Default)]
pub struct FusionStats {
    materializations: Cell<u64>,
    producer_iterations: Cell<u64>,
    inner_loop_iterations: Cell<u64>,
}

pub type StatsHandle = Rc<FusionStats>;

impl FusionStats {
    pub fn handle() -> StatsHandle {
        Rc::new(FusionStats::default())
    }

    /// Intermediate collections built (explicit `materialize` calls plus any
    /// buffering a combinator is forced into, like the fold backend's zip).
    pub fn materializations(&self) -> u64 {
        self.materializations.get()
    }

    /// Elements the original source produced.
    pub fn producer_iterations(&self) -> u64 {
        self.producer_iterations.get()
    }

    /// Elements examined by the unfold backend's recursive filter loop.
    pub fn inner_loop_iterations(&self) -> u64 {
        self.inner_loop_iterations.get()
    }

    pub(crate) fn inc_materializations(&self) {
        self.materializations.set(self.materializations.get() + 1);
    }

    pub(crate) fn inc_producer(&self) {
        self.producer_iterations.set(self.producer_iterations.get() + 1);
    }

    pub(crate) fn inc_inner_loop(&self) {
        self.inner_loop_iterations.set(self.inner_loop_iterations.get() + 1);
    }
}

/// The pipeline vocabulary used by the fuzz grammar and the rule checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineOp {
    MapAdd(i64),
    MapMul(i64),
    FilterGt(i64),
    FilterEven,
    Take(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Fold,
    Unfold,
    Stream,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Fold, Backend::Unfold, Backend::Stream];
}

macro_rules! apply_ops {
    ($seq:expr, $ops:expr, $staged:expr) => {{
        let mut seq = $seq;
        let mut remaining = $ops.len();
        for op in $ops {
            seq = match *op {
                PipelineOp::MapAdd(c) => seq.map(move |x| x.wrapping_add(c)),
                PipelineOp::MapMul(c) => seq.map(move |x| x.wrapping_mul(c)),
                PipelineOp::FilterGt(t) => seq.filter(move |x| *x > t),
                PipelineOp::FilterEven => seq.filter(|x| x % 2 == 0),
                PipelineOp::Take(n) => seq.take(n),
            };
            remaining -= 1;
            if $staged && remaining > 0 {
                seq = seq.materialize();
            }
        }
        seq
    }};
}

/// Runs an i64 pipeline on a backend, collecting the resulting sequence.
pub fn run_collect(
    backend: Backend,
    stats: &StatsHandle,
    input: &[i64],
    ops: &[PipelineOp],
) -> Vec<i64> {
    run_pipeline(backend, stats, input, ops, false)
}

/// Runs an i64 pipeline terminated by a sum fold.
pub fn run_sum(
    backend: Backend,
    stats: &StatsHandle,
    input: &[i64],
    ops: &[PipelineOp],
) -> i64 {
    let items = input.to_vec();
    match backend {
        Backend::Fold => apply_ops!(fold::FoldSeq::from_vec(items, stats.clone()), ops, false)
            .fold(0i64, |e, acc| acc.wrapping_add(e)),
        Backend::Unfold => apply_ops!(unfold::GenSeq::from_vec(items, stats.clone()), ops, false)
            .fold(0i64, |e, acc| acc.wrapping_add(e)),
        Backend::Stream => apply_ops!(stream::StreamSeq::from_vec(items, stats.clone()), ops, false)
            .fold(0i64, |e, acc| acc.wrapping_add(e)),
    }
}

fn run_pipeline(
    backend: Backend,
    stats: &StatsHandle,
    input: &[i64],
    ops: &[PipelineOp],
    staged: bool,
) -> Vec<i64> {
    let items = input.to_vec();
    match backend {
        Backend::Fold => {
            apply_ops!(fold::FoldSeq::from_vec(items, stats.clone()), ops, staged).collect()
        }
        Backend::Unfold => {
            apply_ops!(unfold::GenSeq::from_vec(items, stats.clone()), ops, staged).collect()
        }
        Backend::Stream => {
            apply_ops!(stream::StreamSeq::from_vec(items, stats.clone()), ops, staged).collect()
        }
    }
}

/// The outcome of running one pipeline fused and once with explicit
/// materialization between stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusionReport {
    pub stages: usize,
    pub fused_intermediates: u64,
    pub staged_intermediates: u64,
    pub fused_result: Vec<i64>,
    pub staged_result: Vec<i64>,
}

/// Checks the fusion behavior of a backend on one pipeline: composed
/// pipelines build no intermediate collections regardless of depth, while
/// forcing a `materialize()` between stages builds exactly stages − 1.
pub fn fusion_rule_check(backend: Backend, input: &[i64], ops: &[PipelineOp]) -> FusionReport {
    let fused_stats = FusionStats::handle();
    let fused_result = run_pipeline(backend, &fused_stats, input, ops, false);
    let staged_stats = FusionStats::handle();
    let staged_result = run_pipeline(backend, &staged_stats, input, ops, true);
    FusionReport {
        stages: ops.len(),
        fused_intermediates: fused_stats.materializations(),
        staged_intermediates: staged_stats.materializations(),
        fused_result,
        staged_result,
    }
}

/// Positional pairing truncated to the shorter input. The fold backend must
/// materialize one side (`foreach` drives a single collection); the
/// generator and stream backends pipeline both.
pub fn zip_pairs(
    backend: Backend,
    stats: &StatsHandle,
    a: &[i64],
    b: &[i64],
) -> Vec<(i64, i64)> {
    match backend {
        Backend::Fold => {
            let sa = fold::FoldSeq::from_vec(a.to_vec(), stats.clone());
            let sb = fold::FoldSeq::from_vec(b.to_vec(), stats.clone());
            sa.zip(sb).collect()
        }
        Backend::Unfold => {
            let sa = unfold::GenSeq::from_vec(a.to_vec(), stats.clone());
            let sb = unfold::GenSeq::from_vec(b.to_vec(), stats.clone());
            sa.zip(sb).collect()
        }
        Backend::Stream => {
            let sa = stream::StreamSeq::from_vec(a.to_vec(), stats.clone());
            let sb = stream::StreamSeq::from_vec(b.to_vec(), stats.clone());
            sa.zip(sb).collect()
        }
    }
}
