//! Fusion-rule laws as effect-trace equalities over randomized
//! continuations, plus tri-backend differential fuzzing against direct list
//! evaluation.

use std::cell::RefCell;
use std::rc::Rc;
use trifuse_core::data::SplitMix64;
use trifuse_core::engine::step::Step;
use trifuse_core::fusion::{
    fold, fusion_rule_check, run_collect, run_sum, stream, unfold, zip_pairs, Backend,
    FusionStats, PipelineOp,
};

type Trace = Rc<RefCell<Vec<(u8, i64)>>>;

fn trace() -> Trace {
    Rc::new(RefCell::new(Vec::new()))
}

/// Direct list evaluation: the independent semantics all backends must
/// match. Plain vector loops, no shared code with the backends.
fn eval_direct(input: &[i64], ops: &[PipelineOp]) -> Vec<i64> {
    let mut current: Vec<i64> = input.to_vec();
    for op in ops {
        current = match *op {
            PipelineOp::MapAdd(c) => current.iter().map(|x| x.wrapping_add(c)).collect(),
            PipelineOp::MapMul(c) => current.iter().map(|x| x.wrapping_mul(c)).collect(),
            PipelineOp::FilterGt(t) => current.into_iter().filter(|x| *x > t).collect(),
            PipelineOp::FilterEven => current.into_iter().filter(|x| x % 2 == 0).collect(),
            PipelineOp::Take(n) => current.into_iter().take(n).collect(),
        };
    }
    current
}

fn random_ops(rng: &mut SplitMix64, max_depth: usize) -> Vec<PipelineOp> {
    let depth = rng.below(max_depth as u64 + 1) as usize;
    (0..depth)
        .map(|_| match rng.below(5) {
            0 => PipelineOp::MapAdd(rng.below(19) as i64 - 9),
            1 => PipelineOp::MapMul(rng.below(5) as i64),
            2 => PipelineOp::FilterGt(rng.below(40) as i64 - 20),
            3 => PipelineOp::FilterEven,
            _ => PipelineOp::Take(rng.below(30) as usize),
        })
        .collect()
}

fn random_input(rng: &mut SplitMix64, max_len: usize) -> Vec<i64> {
    let len = rng.below(max_len as u64 + 1) as usize;
    (0..len).map(|_| rng.below(60) as i64 - 30).collect()
}

// Fold-fusion rule: build(f1).foreach(f2) leaves the same effect trace as
// f1(f2), for randomized producer programs and consumer transforms.
#[test]
fn fold_fusion_rule_trace_equality_randomized() {
    let mut rng = SplitMix64::new(0xAB01);
    for _ in 0..1000 {
        let items = random_input(&mut rng, 30);
        let scale = rng.below(9) as i64 - 4;
        let offset = rng.below(9) as i64 - 4;

        let lhs = trace();
        {
            let log = lhs.clone();
            let items = items.clone();
            fold::build(move |consume: &mut dyn FnMut(i64)| {
                for x in items {
                    log.borrow_mut().push((0, x));
                    consume(x.wrapping_mul(scale));
                }
            })
            .foreach(&mut |e| lhs.borrow_mut().push((1, e.wrapping_add(offset))));
        }

        let rhs = trace();
        {
            let log = rhs.clone();
            let f1 = |consume: &mut dyn FnMut(i64)| {
                for x in items {
                    log.borrow_mut().push((0, x));
                    consume(x.wrapping_mul(scale));
                }
            };
            let mut f2 = |e: i64| rhs.borrow_mut().push((1, e.wrapping_add(offset)));
            f1(&mut f2);
        }
        assert_eq!(lhs.borrow().as_slice(), rhs.borrow().as_slice());
    }
}

// Unfold-fusion rule: generate(f1).destroy(f2) traces exactly like f2(f1).
#[test]
fn unfold_fusion_rule_trace_equality_randomized() {
    let mut rng = SplitMix64::new(0xAB02);
    for _ in 0..1000 {
        let items = random_input(&mut rng, 30);
        let scale = rng.below(9) as i64 - 4;

        let lhs = trace();
        {
            let log = lhs.clone();
            let mut source = items.clone().into_iter();
            unfold::generate(move || {
                let item = source.next();
                if let Some(x) = item {
                    log.borrow_mut().push((0, x));
                }
                item
            })
            .destroy(|mut next| {
                while let Some(e) = next() {
                    lhs.borrow_mut().push((1, e.wrapping_mul(scale)));
                }
            });
        }

        let rhs = trace();
        {
            let log = rhs.clone();
            let mut source = items.into_iter();
            let mut f1 = move || {
                let item = source.next();
                if let Some(x) = item {
                    log.borrow_mut().push((0, x));
                }
                item
            };
            let f2 = |next: &mut dyn FnMut() -> Option<i64>| {
                while let Some(e) = next() {
                    rhs.borrow_mut().push((1, e.wrapping_mul(scale)));
                }
            };
            f2(&mut f1);
        }
        assert_eq!(lhs.borrow().as_slice(), rhs.borrow().as_slice());
    }
}

// Stream-fusion rule: unstream(th).stream() forces exactly th().
#[test]
fn stream_fusion_rule_trace_equality_randomized() {
    let mut rng = SplitMix64::new(0xAB03);
    for _ in 0..1000 {
        let value = rng.below(1000) as i64;
        let case = rng.below(3);

        let lhs = trace();
        {
            let log = lhs.clone();
            let mut seq = stream::unstream(move || {
                log.borrow_mut().push((0, value));
                match case {
                    0 => Step::Yield(value),
                    1 => Step::Skip,
                    _ => Step::Done,
                }
            });
            let got = seq.stream();
            lhs.borrow_mut().push((1, step_tag(&got)));
        }

        let rhs = trace();
        {
            let log = rhs.clone();
            let th = move || {
                log.borrow_mut().push((0, value));
                match case {
                    0 => Step::Yield(value),
                    1 => Step::Skip,
                    _ => Step::Done,
                }
            };
            let got = th();
            rhs.borrow_mut().push((1, step_tag(&got)));
        }
        assert_eq!(lhs.borrow().as_slice(), rhs.borrow().as_slice());
    }
}

fn step_tag(step: &Step<i64>) -> i64 {
    match step {
        Step::Yield(v) => *v,
        Step::Skip => -1,
        Step::Done => -2,
    }
}

// Tri-backend equivalence against direct list semantics over the pipeline
// fuzz grammar.
#[test]
fn backends_match_direct_evaluation_over_fuzzed_pipelines() {
    let mut rng = SplitMix64::new(0xAB04);
    for case in 0..3000 {
        let input = random_input(&mut rng, 100);
        let ops = random_ops(&mut rng, 5);
        let expected = eval_direct(&input, &ops);
        let expected_sum: i64 = expected.iter().fold(0, |a, x| a.wrapping_add(*x));
        for backend in Backend::ALL {
            let stats = FusionStats::handle();
            let got = run_collect(backend, &stats, &input, &ops);
            assert_eq!(got, expected, "case {case} on {backend:?}: {ops:?}");
            let stats = FusionStats::handle();
            let got_sum = run_sum(backend, &stats, &input, &ops);
            assert_eq!(got_sum, expected_sum, "case {case} fold on {backend:?}");
        }
    }
}

#[test]
fn fused_pipelines_build_no_intermediates_staged_build_n_minus_1() {
    let mut rng = SplitMix64::new(0xAB05);
    // The worked example: two maps, fused → zero intermediates.
    for backend in Backend::ALL {
        let report = fusion_rule_check(
            backend,
            &[1, 2, 3],
            &[PipelineOp::MapAdd(1), PipelineOp::MapMul(2)],
        );
        assert_eq!(report.fused_intermediates, 0);
        assert_eq!(report.staged_intermediates, 1);
        assert_eq!(report.fused_result, vec![4, 6, 8]);
        assert_eq!(report.staged_result, vec![4, 6, 8]);
    }
    // Depth four with forced materialization → three intermediates.
    for backend in Backend::ALL {
        let report = fusion_rule_check(
            backend,
            &[5, 10, 15, 20],
            &[
                PipelineOp::MapAdd(2),
                PipelineOp::FilterEven,
                PipelineOp::MapMul(3),
                PipelineOp::Take(2),
            ],
        );
        assert_eq!(report.stages, 4);
        assert_eq!(report.fused_intermediates, 0);
        assert_eq!(report.staged_intermediates, 3);
        assert_eq!(report.fused_result, report.staged_result);
    }
    // Any fuzzed depth: fused stays at zero, staged at stages − 1.
    for _ in 0..200 {
        let input = random_input(&mut rng, 40);
        let ops = random_ops(&mut rng, 5);
        for backend in Backend::ALL {
            let report = fusion_rule_check(backend, &input, &ops);
            assert_eq!(report.fused_intermediates, 0);
            assert_eq!(
                report.staged_intermediates,
                report.stages.saturating_sub(1) as u64
            );
            assert_eq!(report.fused_result, report.staged_result);
        }
    }
}

#[test]
fn fold_take_cannot_stop_early_but_generators_can() {
    let input: Vec<i64> = (0..1000).collect();
    let ops = [PipelineOp::Take(5)];

    let fold_stats = FusionStats::handle();
    run_collect(Backend::Fold, &fold_stats, &input, &ops);
    assert_eq!(fold_stats.producer_iterations(), 1000);

    let unfold_stats = FusionStats::handle();
    run_collect(Backend::Unfold, &unfold_stats, &input, &ops);
    assert_eq!(unfold_stats.producer_iterations(), 5);

    let stream_stats = FusionStats::handle();
    run_collect(Backend::Stream, &stream_stats, &input, &ops);
    assert_eq!(stream_stats.producer_iterations(), 5);

    assert!(fold_stats.producer_iterations() > unfold_stats.producer_iterations());
    assert!(fold_stats.producer_iterations() > stream_stats.producer_iterations());
}

#[test]
fn unfold_filter_skips_recursively_and_terminates() {
    let stats = FusionStats::handle();
    let input: Vec<i64> = (0..1000).collect();
    let out = run_collect(
        Backend::Unfold,
        &stats,
        &input,
        &[PipelineOp::FilterGt(i64::MAX - 1)],
    );
    assert!(out.is_empty());
    assert_eq!(stats.inner_loop_iterations(), 1000);
}

#[test]
fn zip_correspondence_counters() {
    let expected = vec![(1, 10), (2, 20)];
    for backend in Backend::ALL {
        let stats = FusionStats::handle();
        let pairs = zip_pairs(backend, &stats, &[1, 2, 3], &[10, 20]);
        assert_eq!(pairs, expected, "{backend:?}");
        let expected_mats = match backend {
            Backend::Fold => 1,
            _ => 0,
        };
        assert_eq!(stats.materializations(), expected_mats, "{backend:?}");
    }
    // Zip against empty is empty on every backend.
    for backend in Backend::ALL {
        let stats = FusionStats::handle();
        assert!(zip_pairs(backend, &stats, &[1, 2, 3], &[]).is_empty());
    }
}

// The operator↔collection correspondence: a scan/select/project/limit/agg
// plan computes the same answer as fromArray/filter/map/take/fold over the
// same numbers, on every backend.
#[test]
fn query_operators_correspond_to_collection_operators() {
    use trifuse_core::expr::{AggKind, Predicate, ScalarExpr};
    use trifuse_core::oracle::eval_oracle;
    use trifuse_core::plan::{catalog_of, validate_plan, QueryPlan};
    use trifuse_core::schema::{Database, Relation, Row, Schema};
    use trifuse_core::value::{Value, ValueKind};
    use trifuse_core::QueryOutput;

    let mut rng = SplitMix64::new(0xAB07);
    for _ in 0..100 {
        let values: Vec<i64> = (0..rng.below(60)).map(|_| rng.below(100) as i64).collect();
        let threshold = rng.below(100) as i64;
        let take = rng.below(20) as usize;

        let schema = Schema::new(vec![("K", ValueKind::Int64)]).unwrap();
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, v)| Row::new(vec![Value::Int64(*v)], i as i64))
            .collect();
        let mut db = Database::new();
        db.insert("r", Relation::new(schema, rows).unwrap());

        // SELECT SUM(K) FROM r WHERE K >= threshold LIMIT-free aggregate…
        let plan = QueryPlan::scan("r")
            .select(Predicate::col_ge("K", Value::Int64(threshold)))
            .limit(take as u64)
            .agg(AggKind::Sum(ScalarExpr::column("K")));
        let checked = validate_plan(&plan, &catalog_of(&db)).unwrap();
        let QueryOutput::Scalar(Value::Int64(query_sum)) = eval_oracle(&checked, &db).unwrap()
        else {
            panic!("scalar int expected")
        };

        // …equals fromArray.filter.take.fold on each collection backend.
        let ops = [PipelineOp::FilterGt(threshold - 1), PipelineOp::Take(take)];
        for backend in Backend::ALL {
            let stats = FusionStats::handle();
            let collection_sum = run_sum(backend, &stats, &values, &ops);
            assert_eq!(query_sum, collection_sum, "{backend:?}");
        }
    }
}

// Differential zip semantics: positional pairing truncated to min length.
#[test]
fn zip_matches_direct_pairing_randomized() {
    let mut rng = SplitMix64::new(0xAB06);
    for _ in 0..500 {
        let a = random_input(&mut rng, 24);
        let b = random_input(&mut rng, 24);
        let expected: Vec<(i64, i64)> =
            a.iter().copied().zip(b.iter().copied()).collect();
        for backend in Backend::ALL {
            let stats = FusionStats::handle();
            assert_eq!(zip_pairs(backend, &stats, &a, &b), expected, "{backend:?}");
        }
    }
}
