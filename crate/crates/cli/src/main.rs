//! The trifuse CLI.
//!
//! Exit codes: 0 when every run verified, 2 on any verification mismatch,
//! 1 on usage or config errors.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use trifuse::{
    report_emit, run, sweep_selectivity, CliError, DataSource, EngineId, QueryName, ReportFormat,
    RunConfig, RunReport,
};
use trifuse_core::engine::stream::StepMode;

#[derive(Parser)]
#[command(name = "trifuse", version, about = "Pipelined query engine microbenchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a catalog query (or the selectivity sweep) on one or more engines.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Engine id: pull, pull-naive, push, stream-sum, stream-boxed,
    /// stream-visitor, stream (honors --step-mode), oracle, or "all";
    /// comma-separated lists run sequentially.
    #[arg(long)]
    engine: String,

    /// Catalog query name, e.g. filter.sum or selectivity.sweep.
    #[arg(long)]
    query: String,

    /// Lineitem rows to generate.
    #[arg(long, default_value_t = 100_000)]
    rows: usize,

    /// Orders rows to generate (default: rows / 4).
    #[arg(long)]
    orders: Option<usize>,

    /// Generator seed (TRIFUSE_SEED overrides).
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Load lineitem from a .tbl file instead of generating.
    #[arg(long)]
    lineitem: Option<PathBuf>,

    /// Load orders from a .tbl file instead of generating.
    #[arg(long = "orders-file")]
    orders_file: Option<PathBuf>,

    /// Timed repetitions after one discarded warm-up.
    #[arg(long, default_value_t = 5)]
    reps: usize,

    /// Report format: csv, markdown, or json (sweeps always emit csv).
    #[arg(long, default_value = "markdown")]
    format: String,

    /// Derive the filter threshold from this selectivity in [0, 1].
    #[arg(long)]
    selectivity: Option<f64>,

    /// Selectivity list for the sweep, e.g. 0,0.25,0.5,1.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<f64>>,

    /// Step encoding for --engine stream: sum, boxed, or visitor.
    #[arg(long = "step-mode", default_value = "sum")]
    step_mode: String,

    /// Verify each run against the oracle (default).
    #[arg(long, action = clap::ArgAction::SetTrue)]
    verify: bool,

    /// Skip oracle verification.
    #[arg(long = "no-verify", action = clap::ArgAction::SetTrue)]
    no_verify: bool,

    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_engines(list: &str, step_mode: StepMode) -> Result<Vec<EngineId>, CliError> {
    if list == "all" {
        return Ok(EngineId::ALL.to_vec());
    }
    list.split(',')
        .map(|name| {
            EngineId::parse(name.trim(), Some(step_mode))
                .ok_or_else(|| CliError::Config(format!("unknown engine {name:?}")))
        })
        .collect()
}

fn parse_step_mode(name: &str) -> Result<StepMode, CliError> {
    match name {
        "sum" => Ok(StepMode::Sum),
        "boxed" => Ok(StepMode::Boxed),
        "visitor" => Ok(StepMode::Visitor),
        other => Err(CliError::Config(format!("unknown step mode {other:?}"))),
    }
}

fn data_source(args: &RunArgs) -> Result<DataSource, CliError> {
    match (&args.lineitem, &args.orders_file) {
        (Some(lineitem), Some(orders)) => Ok(DataSource::Files {
            lineitem: lineitem.clone(),
            orders: orders.clone(),
        }),
        (None, None) => {
            let seed = match std::env::var("TRIFUSE_SEED") {
                Ok(text) => text
                    .parse::<u64>()
                    .map_err(|_| CliError::Config(format!("bad TRIFUSE_SEED {text:?}")))?,
                Err(_) => args.seed,
            };
            Ok(DataSource::Generated {
                seed,
                lineitem_rows: args.rows,
                orders_rows: args.orders.unwrap_or_else(|| (args.rows / 4).max(usize::from(args.rows > 0))),
            })
        }
        _ => Err(CliError::Config(
            "--lineitem and --orders-file must be given together".to_string(),
        )),
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Config(e.to_string())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_command(args: &RunArgs) -> Result<bool, CliError> {
    let step_mode = parse_step_mode(&args.step_mode)?;
    let engines = parse_engines(&args.engine, step_mode)?;
    let query = QueryName::parse(&args.query)
        .ok_or_else(|| CliError::Config(format!("unknown query {:?}", args.query)))?;
    let format = ReportFormat::parse(&args.format)
        .ok_or_else(|| CliError::Config(format!("unknown format {:?}", args.format)))?;
    let mut cfg = RunConfig::new(data_source(args)?);
    cfg.reps = args.reps;
    cfg.verify = !args.no_verify;
    cfg.selectivity = args.selectivity;

    if query == QueryName::SelectivitySweep {
        let default_grid: Vec<f64> = (0..=10).map(|i| f64::from(i) / 10.0).collect();
        let s_list = args.sweep.clone().unwrap_or(default_grid);
        let (rows, csv) = sweep_selectivity(&engines, &s_list, &cfg)?;
        emit(&csv, &args.out)?;
        return Ok(rows.iter().all(|r| r.all_match));
    }
    if args.sweep.is_some() {
        return Err(CliError::Config(
            "--sweep is only valid with --query selectivity.sweep".to_string(),
        ));
    }

    let mut reports: Vec<RunReport> = Vec::new();
    for engine in &engines {
        reports.push(run(*engine, query, &cfg)?);
    }
    let all_match = reports.iter().all(|r| r.verdict.is_match());
    emit(&report_emit(&reports, format), &args.out)?;
    Ok(all_match)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let Command::Run(args) = &cli.command;
    match run_command(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification mismatch");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
