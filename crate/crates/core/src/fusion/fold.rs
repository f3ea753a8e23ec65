//! Fold fusion: a collection is a continuation of consumers.
//!
//! `build` wraps a `(consumer) -> ()` continuation; `foreach` applies it.
//! Inlining both definitions yields `build(f1).foreach(f2) = f1(f2)` — the
//! fold-fusion rule holds by evaluation, not by rewrite.
//!
//! The known limits of this style are kept on purpose: `take` cannot stop
//! the driving iteration (it traverses everything and drops the excess), and
//! `zip` must materialize one side because `foreach` iterates exactly one
//! collection.

use super::StatsHandle;

type Cont<'a, T> = Box<dyn FnOnce(&mut dyn FnMut(T)) + 'a>;

/// A consumer-continuation collection. The consumer is higher-ranked so a
/// transformer can hand its own short-lived consumer down the chain.
pub struct FoldSeq<'a, T> {
    cont: Cont<'a, T>,
    stats: StatsHandle,
}

/// Wraps a consumer continuation as a collection.
pub fn build<'a, T>(cont: impl FnOnce(&mut dyn FnMut(T)) + 'a) -> FoldSeq<'a, T> {
    build_with(super::FusionStats::handle(), cont)
}

fn build_with<'a, T>(
    stats: StatsHandle,
    cont: impl FnOnce(&mut dyn FnMut(T)) + 'a,
) -> FoldSeq<'a, T> {
    FoldSeq {
        cont: Box::new(cont),
        stats,
    }
}

impl<'a, T: 'a> FoldSeq<'a, T> {
    pub fn from_vec(items: Vec<T>, stats: StatsHandle) -> FoldSeq<'a, T> {
        let h = stats.clone();
        build_with(stats, move |consume| {
            for item in items {
                h.inc_producer();
                consume(item);
            }
        })
    }

    /// Applies the wrapped continuation: `build(f1).foreach(f2)` evaluates
    /// as `f1(f2)`.
    pub fn foreach(self, f: &mut dyn FnMut(T)) {
        (self.cont)(f)
    }

    pub fn map<S: 'a>(self, mut f: impl FnMut(T) -> S + 'a) -> FoldSeq<'a, S> {
        let stats = self.stats.clone();
        build_with(stats, move |consume| {
            self.foreach(&mut |e| consume(f(e)))
        })
    }

    pub fn filter(self, mut p: impl FnMut(&T) -> bool + 'a) -> FoldSeq<'a, T> {
        let stats = self.stats.clone();
        build_with(stats, move |consume| {
            self.foreach(&mut |e| {
                if p(&e) {
                    consume(e)
                }
            })
        })
    }

    /// There is no way to stop `foreach` halfway: the whole input is
    /// traversed and the excess dropped.
    pub fn take(self, n: usize) -> FoldSeq<'a, T> {
        let stats = self.stats.clone();
        build_with(stats, move |consume| {
            let mut taken = 0usize;
            self.foreach(&mut |e| {
                if taken < n {
                    taken += 1;
                    consume(e);
                }
            })
        })
    }

    /// Folds with `(element, acc) -> acc`.
    pub fn fold<S: 'a>(self, zero: S, mut f: impl FnMut(T, S) -> S + 'a) -> S {
        let mut acc = Some(zero);
        self.foreach(&mut |e| {
            let a = acc.take().expect("accumulator present");
            acc = Some(f(e, a));
        });
        acc.expect("accumulator present")
    }

    pub fn collect(self) -> Vec<T> {
        let mut out = Vec::new();
        self.foreach(&mut |e| out.push(e));
        out
    }

    /// Forces an intermediate collection (counted) and rewraps it.
    pub fn materialize(self) -> FoldSeq<'a, T> {
        let stats = self.stats.clone();
        stats.inc_materializations();
        let items = {
            let mut out = Vec::new();
            self.foreach(&mut |e| out.push(e));
            out
        };
        // Replay without touching the producer counter: the source already
        // iterated once.
        build_with(stats, move |consume| {
            for item in items {
                consume(item);
            }
        })
    }

    /// Pairs positionally, truncating to the shorter side. The driven side
    /// is `self`; the other collection must be materialized first (counted).
    pub fn zip<U: 'a>(self, other: FoldSeq<'a, U>) -> FoldSeq<'a, (T, U)> {
        let stats = self.stats.clone();
        build_with(stats.clone(), move |consume| {
            stats.inc_materializations();
            let mut others = {
                let mut out = Vec::new();
                other.foreach(&mut |e| out.push(e));
                out
            }
            .into_iter();
            self.foreach(&mut |a| {
                if let Some(b) = others.next() {
                    consume((a, b));
                }
            });
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
        let composed = FoldSeq::from_vec(vec![1, 2, 3], stats.clone())
            .map(|x| x + 1)
            .map(|x| x * 2)
            .collect();
        assert_eq!(composed, vec![4, 6, 8]);
        assert_eq!(stats.materializations(), 0);

        let stats2 = FusionStats::handle();
        let single = FoldSeq::from_vec(vec![1, 2, 3], stats2)
            .map(|x| (x + 1) * 2)
            .collect();
        assert_eq!(composed, single);
    }

    #[test]
    fn fold_fusion_rule_is_definitional() {
        // build(f1).foreach(f2) leaves exactly the trace of f1(f2).
        let mut trace_lhs = Vec::new();
        build(|consume: &mut dyn FnMut(i64)| {
            for x in [3, 1, 4] {
                consume(x * 10);
            }
        })
        .foreach(&mut |e| trace_lhs.push(e + 1));

        let mut trace_rhs = Vec::new();
        {
            let f1 = |consume: &mut dyn FnMut(i64)| {
                for x in [3, 1, 4] {
                    consume(x * 10);
                }
            };
            let mut f2 = |e: i64| trace_rhs.push(e + 1);
            f1(&mut f2);
        }
        assert_eq!(trace_lhs, trace_rhs);
    }

    #[test]
    fn take_traverses_everything() {
        let stats = FusionStats::handle();
        let out = FoldSeq::from_vec((0..100).collect(), stats.clone())
            .take(5)
            .collect();
        assert_eq!(out, vec![0, 1, 2, 3, 4]);
        // The producer could not be stopped at five.
        assert_eq!(stats.producer_iterations(), 100);
    }

    #[test]
    fn zip_materializes_one_side() {
        let stats = FusionStats::handle();
        let a = FoldSeq::from_vec(vec![1, 2, 3], stats.clone());
        let b = FoldSeq::from_vec(vec![10, 20], stats.clone());
        assert_eq!(a.zip(b).collect(), vec![(1, 10), (2, 20)]);
        assert_eq!(stats.materializations(), 1);
    }

    #[test]
    fn empty_pipelines() {
        let stats = FusionStats::handle();
        let out = FoldSeq::from_vec(Vec::<i64>::new(), stats.clone())
            .map(|x| x + 1)
            .filter(|x| *x > 0)
            .collect();
        assert!(out.is_empty());
        let sum = FoldSeq::from_vec(Vec::<i64>::new(), stats).fold(0, |e, a| a + e);
        assert_eq!(sum, 0);
    }
}
