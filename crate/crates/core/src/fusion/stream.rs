//! Stream fusion: a collection is a step thunk.
//!
//! `unstream` wraps a `() -> Step<element>` thunk; `stream()` forces it, so
//! `unstream(() ⇒ e).stream() = e` — the stream-fusion rule by evaluation.
//!
//! `filter` needs no nested loop here: a rejected element becomes a `Skip`
//! step handled by whoever drives the stream, and `take` can stop the source
//! by answering `Done` without forcing it.

use super::StatsHandle;
use crate::engine::step::Step;

/// A step-thunk collection.
pub struct StreamSeq<'a, T> {
    next_step: Box<dyn FnMut() -> Step<T> + 'a>,
    stats: StatsHandle,
}

/// Wraps a step thunk as a collection.
pub fn unstream<'a, T>(next_step: impl FnMut() -> Step<T> + 'a) -> StreamSeq<'a, T> {
    unstream_with(super::FusionStats::handle(), next_step)
}

fn unstream_with<'a, T>(
    stats: StatsHandle,
    next_step: impl FnMut() -> Step<T> + 'a,
) -> StreamSeq<'a, T> {
    StreamSeq {
        next_step: Box::new(next_step),
        stats,
    }
}

impl<'a, T: 'a> StreamSeq<'a, T> {
    pub fn from_vec(items: Vec<T>, stats: StatsHandle) -> StreamSeq<'a, T> {
        let h = stats.clone();
        let mut iter = items.into_iter();
        unstream_with(stats, move || match iter.next() {
            Some(e) => {
                h.inc_producer();
                Step::Yield(e)
            }
            None => Step::Done,
        })
    }

    /// Forces the thunk: `unstream(f1).stream()` evaluates as `f1()`.
    pub fn stream(&mut self) -> Step<T> {
        (self.next_step)()
    }

    pub fn map<S: 'a>(mut self, mut f: impl FnMut(T) -> S + 'a) -> StreamSeq<'a, S> {
        let stats = self.stats.clone();
        unstream_with(stats, move || self.stream().map(&mut f))
    }

    pub fn filter(mut self, mut p: impl FnMut(&T) -> bool + 'a) -> StreamSeq<'a, T> {
        let stats = self.stats.clone();
        unstream_with(stats, move || self.stream().filter(|e| p(e)))
    }

    /// Budget is spent only by Yields (the counter lives inside `map`);
    /// afterwards the source is never forced again.
    pub fn take(mut self, n: usize) -> StreamSeq<'a, T> {
        let stats = self.stats.clone();
        let mut count = 0usize;
        unstream_with(stats, move || {
            if count < n {
                self.stream().map(|e| {
                    count += 1;
                    e
                })
            } else {
                Step::Done
            }
        })
    }

    /// Folds with `(element, acc) -> acc`: yield accumulates, skip is a
    /// no-op, done ends the drive loop.
    pub fn fold<S>(mut self, zero: S, mut f: impl FnMut(T, S) -> S) -> S {
        let mut acc = Some(zero);
        let mut done = false;
        while !done {
            let step = self.stream();
            let slot = &mut acc;
            step.fold(
                |e| {
                    let a = slot.take().expect("accumulator present");
                    *slot = Some(f(e, a));
                },
                || {},
                || done = true,
            );
        }
        acc.expect("accumulator present")
    }

    pub fn collect(mut self) -> Vec<T> {
        let mut out = Vec::new();
        loop {
            match self.stream() {
                Step::Yield(e) => out.push(e),
                Step::Skip => continue,
                Step::Done => break,
            }
        }
        out
    }

    /// Forces an intermediate collection (counted) and rewraps it.
    pub fn materialize(self) -> StreamSeq<'a, T> {
        let stats = self.stats.clone();
        stats.inc_materializations();
        let items = self.collect();
        let mut iter = items.into_iter();
        unstream_with(stats, move || match iter.next() {
            Some(e) => Step::Yield(e),
            None => Step::Done,
        })
    }

    /// Pairs positionally; both streams stay pipelined, with a one-element
    /// hold for the left side while the right skips.
    pub fn zip<U: 'a>(mut self, mut other: StreamSeq<'a, U>) -> StreamSeq<'a, (T, U)> {
        let stats = self.stats.clone();
        let mut pending: Option<T> = None;
        unstream_with(stats, move || {
            if pending.is_none() {
                match self.stream() {
                    Step::Yield(e) => pending = Some(e),
                    Step::Skip => return Step::Skip,
                    Step::Done => return Step::Done,
                }
            }
            match other.stream() {
                Step::Yield(y) => {
                    let x = pending.take().expect("held element");
                    Step::Yield((x, y))
                }
                Step::Skip => Step::Skip,
                Step::Done => Step::Done,
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::FusionStats;

    #[test]
    fn map_map_fuses_to_composition() {
        let stats = FusionStats::handle();
        let out = StreamSeq::from_vec(vec![1, 2, 3], stats.clone())
            .map(|x| x + 1)
            .map(|x| x * 2)
            .collect();
        assert_eq!(out, vec![4, 6, 8]);
        assert_eq!(stats.materializations(), 0);
    }

    #[test]
    fn stream_fusion_rule_is_definitional() {
        // unstream(th).stream() forces exactly th().
        let mut calls = 0;
        let mut seq = unstream(|| {
            calls += 1;
            Step::Yield(42i64)
        });
        assert_eq!(seq.stream(), Step::Yield(42));
        drop(seq);
        assert_eq!(calls, 1);
    }

    #[test]
    fn filter_surfaces_skip_without_looping() {
        let stats = FusionStats::handle();
        let mut seq = StreamSeq::from_vec(vec![1, 2, 3], stats).filter(|x| x % 2 == 1);
        assert_eq!(seq.stream(), Step::Yield(1));
        assert_eq!(seq.stream(), Step::Skip);
        assert_eq!(seq.stream(), Step::Yield(3));
        assert_eq!(seq.stream(), Step::Done);
    }

    #[test]
    fn take_stops_the_producer_early() {
        let stats = FusionStats::handle();
        let out = StreamSeq::from_vec((0..100).collect(), stats.clone())
            .take(5)
            .collect();
        assert_eq!(out, vec![0, 1, 2, 3, 4]);
        assert_eq!(stats.producer_iterations(), 5);
    }

    #[test]
    fn skips_do_not_consume_take_budget() {
        let stats = FusionStats::handle();
        let out = StreamSeq::from_vec((0..10).collect(), stats)
            .filter(|x| x % 2 == 0)
            .take(3)
            .collect();
        assert_eq!(out, vec![0, 2, 4]);
    }

    #[test]
    fn zip_pipelines_both_sides() {
        let stats = FusionStats::handle();
        let a = StreamSeq::from_vec(vec![1, 2, 3], stats.clone());
        let b = StreamSeq::from_vec(vec![10, 20], stats.clone());
        assert_eq!(a.zip(b).collect(), vec![(1, 10), (2, 20)]);
        assert_eq!(stats.materializations(), 0);
    }

    #[test]
    fn zip_with_empty_is_empty() {
        let stats = FusionStats::handle();
        let a = StreamSeq::from_vec(vec![1, 2, 3], stats.clone());
        let b = StreamSeq::from_vec(Vec::<i64>::new(), stats.clone());
        assert!(a.zip(b).collect().is_empty());
    }
}
