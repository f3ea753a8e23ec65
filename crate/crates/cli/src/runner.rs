//! Engine dispatch, timed runs, differential verification, and the
//! selectivity sweep.

use crate::catalog::{build_plan, CatalogParams, QueryName};
use crate::report::{RunReport, Verdict};
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;
use trifuse_core::data::{
    generate, load_tables, threshold_for_selectivity, GenConfig, Tables, SELECTIVITY_COLUMN,
};
use trifuse_core::engine::pull::{run_pull, SelectVariant};
use trifuse_core::engine::push::run_push;
use trifuse_core::engine::stream::{run_stream, StepMode};
use trifuse_core::oracle::{eval_oracle_with_stats, multiset_equal};
use trifuse_core::plan::{catalog_of, validate_plan, CheckedPlan};
use trifuse_core::value::fnv1a64;
use trifuse_core::{Database, DataError, ExecError, ExecStats, PlanError, QueryOutput, Value};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("plan error: {0}")]
    Plan(#[from] PlanError),
    #[error("execution error: {0}")]
    Exec(#[from] ExecError),
}

/// The seven runnable engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineId {
    Pull,
    PullNaive,
    Push,
    StreamSum,
    StreamBoxed,
    StreamVisitor,
    Oracle,
}

impl EngineId {
    pub const ALL: [EngineId; 7] = [
        EngineId::Pull,
        EngineId::PullNaive,
        EngineId::Push,
        EngineId::StreamSum,
        EngineId::StreamBoxed,
        EngineId::StreamVisitor,
        EngineId::Oracle,
    ];

    /// Engines verified against the oracle (everything but the oracle).
    pub const ENGINES: [EngineId; 6] = [
        EngineId::Pull,
        EngineId::PullNaive,
        EngineId::Push,
        EngineId::StreamSum,
        EngineId::StreamBoxed,
        EngineId::StreamVisitor,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EngineId::Pull => "pull",
            EngineId::PullNaive => "pull-naive",
            EngineId::Push => "push",
            EngineId::StreamSum => "stream-sum",
            EngineId::StreamBoxed => "stream-boxed",
            EngineId::StreamVisitor => "stream-visitor",
            EngineId::Oracle => "oracle",
        }
    }

    pub fn parse(name: &str, step_mode: Option<StepMode>) -> Option<EngineId> {
        match name {
            "pull" => Some(EngineId::Pull),
            "pull-naive" => Some(EngineId::PullNaive),
            "push" => Some(EngineId::Push),
            "stream-sum" => Some(EngineId::StreamSum),
            "stream-boxed" => Some(EngineId::StreamBoxed),
            "stream-visitor" => Some(EngineId::StreamVisitor),
            "stream" => Some(match step_mode.unwrap_or(StepMode::Sum) {
                StepMode::Sum => EngineId::StreamSum,
                StepMode::Boxed => EngineId::StreamBoxed,
                StepMode::Visitor => EngineId::StreamVisitor,
            }),
            "oracle" => Some(EngineId::Oracle),
            _ => None,
        }
    }
}

/// Runs a checked plan on one engine, filling the per-run counters.
pub fn execute(
    engine: EngineId,
    plan: &CheckedPlan,
    db: &Database,
    stats: &mut ExecStats,
) -> Result<QueryOutput, ExecError> {
    match engine {
        EngineId::Pull => run_pull(plan, db, SelectVariant::InlineAware, stats),
        EngineId::PullNaive => run_pull(plan, db, SelectVariant::Naive, stats),
        EngineId::Push => run_push(plan, db, stats),
        EngineId::StreamSum => run_stream(plan, db, StepMode::Sum, stats),
        EngineId::StreamBoxed => run_stream(plan, db, StepMode::Boxed, stats),
        EngineId::StreamVisitor => run_stream(plan, db, StepMode::Visitor, stats),
        EngineId::Oracle => eval_oracle_with_stats(plan, db, stats),
    }
}

/// Where the tables come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Generated {
        seed: u64,
        lineitem_rows: usize,
        orders_rows: usize,
    },
    Files {
        lineitem: PathBuf,
        orders: PathBuf,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<Tables, CliError> {
        match self {
            DataSource::Generated {
                seed,
                lineitem_rows,
                orders_rows,
            } => Ok(generate(&GenConfig::new(*seed, *lineitem_rows, *orders_rows))?),
            DataSource::Files { lineitem, orders } => Ok(load_tables(lineitem, orders)?),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: DataSource,
    pub reps: usize,
    pub verify: bool,
    /// When set, the ship-date threshold is derived from this selectivity
    /// against the actual data instead of the default date.
    pub selectivity: Option<f64>,
    pub limit: u64,
}

impl RunConfig {
    pub fn new(source: DataSource) -> RunConfig {
        RunConfig {
            source,
            reps: 5,
            verify: true,
            selectivity: None,
            limit: 1000,
        }
    }
}

/// Order-insensitive FNV-1a digest of a query output (rowids excluded).
pub fn result_digest(output: &QueryOutput) -> String {
    let mut bytes = Vec::new();
    match output {
        QueryOutput::Scalar(v) => v.canonical_bytes(&mut bytes),
        QueryOutput::Rows(rel) => {
            let mut row_bytes: Vec<Vec<u8>> = rel
                .rows()
                .iter()
                .map(|row| {
                    let mut b = Vec::new();
                    for v in &row.values {
                        v.canonical_bytes(&mut b);
                    }
                    b
                })
                .collect();
            row_bytes.sort();
            for b in row_bytes {
                bytes.extend_from_slice(&b);
                bytes.push(0xFF);
            }
        }
    }
    format!("{:016x}", fnv1a64(&bytes))
}

fn median(sorted: &[u64]) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    sorted[sorted.len() / 2]
}

fn params_for(tables: &Tables, cfg: &RunConfig) -> CatalogParams {
    let mut params = CatalogParams {
        limit: cfg.limit,
        ..CatalogParams::default()
    };
    if let Some(s) = cfg.selectivity {
        params.ship_date = threshold_for_selectivity(s, tables, SELECTIVITY_COLUMN);
    }
    params
}

/// Runs one engine on one catalog query: builds the tables, validates the
/// plan once, executes one warm-up plus `reps` timed repetitions, and
/// verifies each repetition against the oracle.
pub fn run(engine: EngineId, query: QueryName, cfg: &RunConfig) -> Result<RunReport, CliError> {
    let tables = cfg.source.load()?;
    let lineitem_rows = tables.lineitem.len() as u64;
    let params = params_for(&tables, cfg);
    let plan = build_plan(query, &params)
        .ok_or_else(|| CliError::Config(format!("{} is not a runnable plan", query.as_str())))?;
    let db = tables.into_database();
    let checked = validate_plan(&plan, &catalog_of(&db))?;

    let expected = if cfg.verify {
        let mut oracle_stats = ExecStats::new();
        Some(eval_oracle_with_stats(&checked, &db, &mut oracle_stats)?)
    } else {
        None
    };

    // Warm-up repetition, discarded.
    let mut stats = ExecStats::new();
    execute(engine, &checked, &db, &mut stats)?;

    let mut times = Vec::with_capacity(cfg.reps);
    let mut verdict = Verdict::Match;
    let mut last_output = None;
    let mut last_stats = ExecStats::new();
    for _ in 0..cfg.reps.max(1) {
        let mut stats = ExecStats::new();
        let started = Instant::now();
        let output = execute(engine, &checked, &db, &mut stats)?;
        times.push(started.elapsed().as_nanos() as u64);
        if let Some(expected) = &expected {
            let ordered = query.ordered_comparison();
            let equal = multiset_equal(expected, &output, ordered)
                .map_err(|e| CliError::Config(format!("verification failed: {e}")))?;
            if !equal && verdict == Verdict::Match {
                verdict = Verdict::Mismatch(format!(
                    "engine digest {} != oracle digest {}",
                    result_digest(&output),
                    result_digest(expected)
                ));
            }
        }
        last_output = Some(output);
        last_stats = stats;
    }
    times.sort_unstable();

    let output = last_output.expect("at least one repetition");
    Ok(RunReport {
        engine: engine.as_str().to_string(),
        query: query.as_str().to_string(),
        rows: lineitem_rows,
        median_ns: median(&times),
        min_ns: times.first().copied().unwrap_or(0),
        source_rows_read: last_stats.source_rows_read,
        materialized_rows: last_stats.materialized_rows(),
        steps_yield: last_stats.total_steps_yield(),
        steps_skip: last_stats.total_steps_skip(),
        boxed_step_allocs: last_stats.total_boxed_step_allocs(),
        verdict,
        result_digest: result_digest(&output),
        times_ns: times,
    })
}

/// One sweep point: per-engine medians and the counters that explain them.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub selectivity: f64,
    pub threshold: i32,
    pub realized_fraction: f64,
    /// Per engine: (median_ns, total skips, total calls of its style).
    pub cells: Vec<(u64, u64, u64)>,
    pub all_match: bool,
}

/// Sweeps filter.sum over the given selectivities, one row per `s`, one
/// engine per column group.
pub fn sweep_selectivity(
    engines: &[EngineId],
    s_list: &[f64],
    cfg: &RunConfig,
) -> Result<(Vec<SweepRow>, String), CliError> {
    for s in s_list {
        if !(0.0..=1.0).contains(s) {
            return Err(CliError::Config(format!("selectivity {s} outside [0, 1]")));
        }
    }
    let tables = cfg.source.load()?;
    let db = tables.clone().into_database();
    let catalog = catalog_of(&db);
    let lineitem_rows = tables.lineitem.len().max(1) as f64;

    let mut rows = Vec::new();
    for &s in s_list {
        let threshold = threshold_for_selectivity(s, &tables, SELECTIVITY_COLUMN);
        let params = CatalogParams {
            ship_date: threshold,
            ..CatalogParams::default()
        };
        let plan = build_plan(QueryName::FilterSum, &params).expect("filter.sum is concrete");
        let checked = validate_plan(&plan, &catalog)?;
        let expected = eval_oracle_with_stats(&checked, &db, &mut ExecStats::new())?;
        let realized = match trifuse_core::data::lineitem_schema().index_of("L_SHIPDATE") {
            Some(idx) => {
                tables
                    .lineitem
                    .rows()
                    .iter()
                    .filter(|r| matches!(r.value(idx), Value::Date(d) if *d >= threshold))
                    .count() as f64
                    / lineitem_rows
            }
            None => 0.0,
        };

        let mut cells = Vec::new();
        let mut all_match = true;
        for engine in engines {
            // Warm-up, then timed repetitions.
            execute(*engine, &checked, &db, &mut ExecStats::new())?;
            let mut times = Vec::with_capacity(cfg.reps.max(1));
            let mut stats = ExecStats::new();
            for _ in 0..cfg.reps.max(1) {
                stats = ExecStats::new();
                let started = Instant::now();
                let output = execute(*engine, &checked, &db, &mut stats)?;
                times.push(started.elapsed().as_nanos() as u64);
                if cfg.verify {
                    let equal = multiset_equal(&expected, &output, false)
                        .map_err(|e| CliError::Config(format!("verification failed: {e}")))?;
                    all_match &= equal;
                }
            }
            times.sort_unstable();
            let calls = match engine {
                EngineId::Pull | EngineId::PullNaive => stats.total_pull_next_calls(),
                EngineId::Push => stats.total_push_consume_calls(),
                EngineId::StreamSum | EngineId::StreamBoxed | EngineId::StreamVisitor => {
                    stats.total_stream_calls()
                }
                EngineId::Oracle => 0,
            };
            cells.push((median(&times), stats.total_steps_skip(), calls));
        }
        rows.push(SweepRow {
            selectivity: s,
            threshold,
            realized_fraction: realized,
            cells,
            all_match,
        });
    }

    let csv = sweep_csv(engines, &rows);
    Ok((rows, csv))
}

fn sweep_csv(engines: &[EngineId], rows: &[SweepRow]) -> String {
    let mut out = String::from("s,realized_fraction");
    for e in engines {
        let id = e.as_str();
        out.push_str(&format!(",{id}_median_ns,{id}_skips,{id}_calls"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{},{}", row.selectivity, row.realized_fraction));
        for (median_ns, skips, calls) in &row.cells {
            out.push_str(&format!(",{median_ns},{skips},{calls}"));
        }
        out.push('\n');
    }
    out
}
