//! The `Step` algebra: the per-call unit of the stream-fusion engine.
//!
//! A step is one of three cases: `Yield(e)` carries a tuple, `Skip` means
//! "nothing this round, keep going" (the `continue` analogue), and `Done`
//! ends the stream (the `break` analogue, playing the role the end-of-stream
//! sentinel plays in a plain pull engine).
//!
//! Two encodings are provided. The sum type with `map`/`filter`/`fold` obeys
//! the case laws directly. [`ChurchStep`] is the visitor (Church) encoding:
//! a step is represented by the effect it has on a [`StepVisitor`], and
//! `map`/`filter` compose continuations without ever constructing an
//! intermediate step value.

/// Three-case step: data, skip-this-round, or end-of-stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step<T> {
    Yield(T),
    Skip,
    Done,
}

impl<T> Step<T> {
    /// `Yield(e) → Yield(f(e))`; `Skip`/`Done` pass through. `f` runs only
    /// on `Yield`.
    pub fn map<S>(self, f: impl FnOnce(T) -> S) -> Step<S> {
        match self {
            Step::Yield(e) => Step::Yield(f(e)),
            Step::Skip => Step::Skip,
            Step::Done => Step::Done,
        }
    }

    /// `Yield(e)` stays `Yield(e)` when `p(e)` holds, otherwise becomes
    /// `Skip`; `Skip`/`Done` pass through.
    pub fn filter(self, p: impl FnOnce(&T) -> bool) -> Step<T> {
        match self {
            Step::Yield(e) => {
                if p(&e) {
                    Step::Yield(e)
                } else {
                    Step::Skip
                }
            }
            Step::Skip => Step::Skip,
            Step::Done => Step::Done,
        }
    }

    /// Case analysis: dispatches to exactly one continuation.
    pub fn fold<S>(
        self,
        yld: impl FnOnce(T) -> S,
        skip: impl FnOnce() -> S,
        done: impl FnOnce() -> S,
    ) -> S {
        match self {
            Step::Yield(e) => yld(e),
            Step::Skip => skip(),
            Step::Done => done(),
        }
    }

    pub fn is_done(&self) -> bool {
        matches!(self, Step::Done)
    }
}

/// The three continuations of a step consumer.
pub trait StepVisitor<T> {
    fn yld(&mut self, e: T);
    fn skip(&mut self);
    fn done(&mut self);
}

/// A visitor that records which continuation fired, turning a visitor-encoded
/// step back into a sum-typed one.
pub struct CaptureStep<T>(pub Option<Step<T>>);

impl<T> CaptureStep<T> {
    pub fn new() -> CaptureStep<T> {
        CaptureStep(None)
    }
}

impl<T> Default for CaptureStep<T> {
    fn default() -> Self {
        CaptureStep::new()
    }
}

impl<T> StepVisitor<T> for CaptureStep<T> {
    fn yld(&mut self, e: T) {
        self.0 = Some(Step::Yield(e));
    }
    fn skip(&mut self) {
        self.0 = Some(Step::Skip);
    }
    fn done(&mut self) {
        self.0 = Some(Step::Done);
    }
}

type AcceptFn<'a, T> = Box<dyn FnOnce(&mut dyn StepVisitor<T>) + 'a>;

/// The Church encoding of a step: the value *is* its `accept` function.
/// Pattern matching becomes visitor dispatch, and `map`/`filter` wrap the
/// visitor instead of rebuilding step values.
pub struct ChurchStep<'a, T>(AcceptFn<'a, T>);

impl<'a, T: 'a> ChurchStep<'a, T> {
    pub fn yield_(e: T) -> ChurchStep<'a, T> {
        ChurchStep(Box::new(move |v| v.yld(e)))
    }

    pub fn skip() -> ChurchStep<'a, T> {
        ChurchStep(Box::new(|v| v.skip()))
    }

    pub fn done() -> ChurchStep<'a, T> {
        ChurchStep(Box::new(|v| v.done()))
    }

    pub fn from_step(step: Step<T>) -> ChurchStep<'a, T> {
        match step {
            Step::Yield(e) => ChurchStep::yield_(e),
            Step::Skip => ChurchStep::skip(),
            Step::Done => ChurchStep::done(),
        }
    }

    /// Dispatches to exactly one of the visitor's continuations.
    pub fn accept(self, v: &mut dyn StepVisitor<T>) {
        (self.0)(v)
    }

    /// Collapses the encoding back into the sum type.
    pub fn into_step(self) -> Step<T> {
        let mut cap = CaptureStep::new();
        self.accept(&mut cap);
        cap.0.expect("accept dispatches exactly once")
    }

    pub fn map<S: 'a>(self, f: impl FnOnce(T) -> S + 'a) -> ChurchStep<'a, S> {
        ChurchStep(Box::new(move |v| {
            struct MapVisitor<'v, T, S, F: FnOnce(T) -> S> {
                f: Option<F>,
                out: &'v mut dyn StepVisitor<S>,
                _marker: std::marker::PhantomData<T>,
            }
            impl<T, S, F: FnOnce(T) -> S> StepVisitor<T> for MapVisitor<'_, T, S, F> {
                fn yld(&mut self, e: T) {
                    let f = self.f.take().expect("single dispatch");
                    self.out.yld(f(e));
                }
                fn skip(&mut self) {
                    self.out.skip();
                }
                fn done(&mut self) {
                    self.out.done();
                }
            }
            self.accept(&mut MapVisitor {
                f: Some(f),
                out: v,
                _marker: std::marker::PhantomData,
            });
        }))
    }

    pub fn filter(self, p: impl FnOnce(&T) -> bool + 'a) -> ChurchStep<'a, T> {
        ChurchStep(Box::new(move |v| {
            struct FilterVisitor<'v, T, P: FnOnce(&T) -> bool> {
                p: Option<P>,
                out: &'v mut dyn StepVisitor<T>,
            }
            impl<T, P: FnOnce(&T) -> bool> StepVisitor<T> for FilterVisitor<'_, T, P> {
                fn yld(&mut self, e: T) {
                    let p = self.p.take().expect("single dispatch");
                    if p(&e) {
                        self.out.yld(e)
                    } else {
                        self.out.skip()
                    }
                }
                fn skip(&mut self) {
                    self.out.skip();
                }
                fn done(&mut self) {
                    self.out.done();
                }
            }
            self.accept(&mut FilterVisitor { p: Some(p), out: v });
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_laws_per_case() {
        assert_eq!(Step::Yield(3).map(|x| x + 1), Step::Yield(4));
        assert_eq!(Step::<i64>::Skip.map(|x| x + 1), Step::Skip);
        assert_eq!(Step::<i64>::Done.map(|x| x + 1), Step::Done);
    }

    #[test]
    fn filter_laws_per_case() {
        assert_eq!(Step::Yield(3).filter(|x| *x > 0), Step::Yield(3));
        assert_eq!(Step::Yield(3).filter(|x| *x < 0), Step::Skip);
        assert_eq!(Step::<i64>::Skip.filter(|_| true), Step::Skip);
        assert_eq!(Step::<i64>::Done.filter(|_| false), Step::Done);
    }

    #[test]
    fn fold_dispatches_exactly_one_continuation() {
        let tag = |s: Step<i64>| s.fold(|_| "yield", || "skip", || "done");
        assert_eq!(tag(Step::Yield(1)), "yield");
        assert_eq!(tag(Step::Skip), "skip");
        assert_eq!(tag(Step::Done), "done");
    }

    #[test]
    fn map_fusion_example() {
        let lhs = Step::Yield(3).map(|x| x + 1).map(|x| x * 2);
        let rhs = Step::Yield(3).map(|x| (x + 1) * 2);
        assert_eq!(lhs, Step::Yield(8));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn skip_passes_through_any_chain() {
        let s = Step::<i64>::Skip
            .map(|x| x + 1)
            .filter(|x| *x > 100)
            .map(|x| x * 2);
        assert_eq!(s, Step::Skip);
    }

    #[test]
    fn map_does_not_run_on_skip_or_done() {
        let mut calls = 0;
        let _ = Step::<i64>::Skip.map(|x| {
            calls += 1;
            x
        });
        let _ = Step::<i64>::Done.map(|x| {
            calls += 1;
            x
        });
        assert_eq!(calls, 0);
    }

    #[test]
    fn church_encoding_matches_sum_encoding() {
        for step in [Step::Yield(7i64), Step::Skip, Step::Done] {
            let sum = step.map(|x| x * 3).filter(|x| x % 2 == 1);
            let church = ChurchStep::from_step(step)
                .map(|x| x * 3)
                .filter(|x| x % 2 == 1)
                .into_step();
            assert_eq!(sum, church);
        }
    }
}
