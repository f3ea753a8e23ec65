//! Unfold fusion: a collection is a generator.
//!
//! `generate` wraps a `() -> Option<element>` thunk; `destroy(f)` applies
//! `f` to it. Inlining both yields `generate(f1).destroy(f2) = f2(f1)` — the
//! unfold-fusion rule by evaluation.
//!
//! `filter` is the weak spot of this style: skipping is a nested loop inside
//! the generator (counted via `inner_loop_iterations`), which is exactly the
//! cost signature stream fusion later removes with its Skip case.

use super::StatsHandle;

pub type Gen<'a, T> = Box<dyn FnMut() -> Option<T> + 'a>;

/// A generator-backed collection.
pub struct GenSeq<'a, T> {
    next: Gen<'a, T>,
    stats: StatsHandle,
}

/// Wraps a generator thunk as a collection.
pub fn generate<'a, T>(next: impl FnMut() -> Option<T> + 'a) -> GenSeq<'a, T> {
    generate_with(super::FusionStats::handle(), next)
}

fn generate_with<'a, T>(
    stats: StatsHandle,
    next: impl FnMut() -> Option<T> + 'a,
) -> GenSeq<'a, T> {
    GenSeq {
        next: Box::new(next),
        stats,
    }
}

impl<'a, T: 'a> GenSeq<'a, T> {
    pub fn from_vec(items: Vec<T>, stats: StatsHandle) -> GenSeq<'a, T> {
        let h = stats.clone();
        let mut iter = items.into_iter();
        generate_with(stats, move || {
            let item = iter.next();
            if item.is_some() {
                h.inc_producer();
            }
            item
        })
    }

    /// Hands the generator to the consumer: `generate(f1).destroy(f2)`
    /// evaluates as `f2(f1)`.
    pub fn destroy<S>(self, f: impl FnOnce(Gen<'a, T>) -> S) -> S {
        f(self.next)
    }

    pub fn map<S: 'a>(self, mut f: impl FnMut(T) -> S + 'a) -> GenSeq<'a, S> {
        let stats = self.stats.clone();
        self.destroy(move |mut next| generate_with(stats, move || next().map(&mut f)))
    }

    /// The recursive skip loop: keeps pulling until an element qualifies.
    pub fn filter(self, mut p: impl FnMut(&T) -> bool + 'a) -> GenSeq<'a, T> {
        let stats = self.stats.clone();
        let h = stats.clone();
        self.destroy(move |mut next| {
            generate_with(stats, move || loop {
                match next() {
                    None => return None,
                    Some(e) => {
                        h.inc_inner_loop();
                        if p(&e) {
                            return Some(e);
                        }
                    }
                }
            })
        })
    }

    /// Stops the generator after `n` pulls — early termination works here.
    pub fn take(self, n: usize) -> GenSeq<'a, T> {
        let stats = self.stats.clone();
        let mut count = 0usize;
        self.destroy(move |mut next| {
            generate_with(stats, move || {
                if count < n {
                    count += 1;
                    next()
                } else {
                    None
                }
            })
        })
    }

    /// Folds with `(element, acc) -> acc`.
    pub fn fold<S>(self, zero: S, mut f: impl FnMut(T, S) -> S) -> S {
        self.destroy(move |mut next| {
            let mut acc = zero;
            while let Some(e) = next() {
                acc = f(e, acc);
            }
            acc
        })
    }

    pub fn collect(self) -> Vec<T> {
        self.destroy(move |mut next| {
            let mut out = Vec::new();
            while let Some(e) = next() {
                out.push(e);
            }
            out
        })
    }

    /// Forces an intermediate collection (counted) and rewraps it.
    pub fn materialize(self) -> GenSeq<'a, T> {
        let stats = self.stats.clone();
        stats.inc_materializations();
        let items = self.collect();
        let mut iter = items.into_iter();
        generate_with(stats, move || iter.next())
    }

    /// Pairs positionally; both generators stay pipelined.
    pub fn zip<U: 'a>(self, other: GenSeq<'a, U>) -> GenSeq<'a, (T, U)> {
        let stats = self.stats.clone();
        self.destroy(move |mut a| {
            other.destroy(move |mut b| {
                generate_with(stats, move || {
                    let x = a()?;
                    let y = b()?;
                    Some((x, y))
                })
            })
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
        let out = GenSeq::from_vec(vec![1, 2, 3], stats.clone())
            .map(|x| x + 1)
            .map(|x| x * 2)
            .collect();
        assert_eq!(out, vec![4, 6, 8]);
        assert_eq!(stats.materializations(), 0);
    }

    #[test]
    fn unfold_fusion_rule_is_definitional() {
        // generate(f1).destroy(f2) leaves exactly the trace of f2(f1).
        let mut lhs = Vec::new();
        {
            let mut source = vec![5, 6, 7].into_iter();
            generate(move || source.next()).destroy(|mut next| {
                while let Some(e) = next() {
                    lhs.push(e * 2);
                }
            });
        }
        let mut rhs = Vec::new();
        {
            let mut source = vec![5, 6, 7].into_iter();
            let mut f1 = move || source.next();
            // f2 applied directly to f1.
            while let Some(e) = f1() {
                rhs.push(e * 2);
            }
        }
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn filter_skips_in_a_nested_loop_but_terminates() {
        let stats = FusionStats::handle();
        let out = GenSeq::from_vec((0..1000).collect(), stats.clone())
            .filter(|_| false)
            .collect();
        assert!(out.is_empty());
        assert_eq!(stats.inner_loop_iterations(), 1000);
    }

    #[test]
    fn take_stops_the_producer_early() {
        let stats = FusionStats::handle();
        let out = GenSeq::from_vec((0..100).collect(), stats.clone())
            .take(5)
            .collect();
        assert_eq!(out, vec![0, 1, 2, 3, 4]);
        assert_eq!(stats.producer_iterations(), 5);
    }

    #[test]
    fn zip_pipelines_both_sides() {
        let stats = FusionStats::handle();
        let a = GenSeq::from_vec(vec![1, 2, 3], stats.clone());
        let b = GenSeq::from_vec(vec![10, 20], stats.clone());
        assert_eq!(a.zip(b).collect(), vec![(1, 10), (2, 20)]);
        assert_eq!(stats.materializations(), 0);
    }
}
