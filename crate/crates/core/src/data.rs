//! Deterministic TPC-H-style data: a LINEITEM/ORDERS subset generator and
//! pipe-delimited `.tbl` ingestion.
//!
//! Generation is a pure function of [`GenConfig`]. The PRNG is splitmix64
//! and every draw sequence is fixed, so the same config produces
//! byte-identical tables on any platform. Both tables come out sorted on
//! their order key, every lineitem order key exists in orders, and no order
//! key repeats more than `max_lines_per_order` times — the shape merge joins
//! rely on.

use crate::error::DataError;
use crate::schema::{Database, Relation, Row, Schema};
use crate::value::{days_from_civil, parse_date_days, Value, ValueKind};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Pinned PRNG: splitmix64.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, n)` by modulo. The mapping is pinned; the
    /// modulo bias at these ranges is far below anything the tests resolve.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }

    /// Uniform f64 in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Generator configuration. Generation is a pure function of this value.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    pub lineitem_rows: usize,
    pub orders_rows: usize,
    pub max_lines_per_order: usize,
    /// The column the selectivity machinery thresholds on.
    pub selectivity_column: String,
}

impl GenConfig {
    pub fn new(seed: u64, lineitem_rows: usize, orders_rows: usize) -> GenConfig {
        GenConfig {
            seed,
            lineitem_rows,
            orders_rows,
            max_lines_per_order: 7,
            selectivity_column: SELECTIVITY_COLUMN.to_string(),
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.lineitem_rows < self.orders_rows {
            return Err(DataError::ConfigInvalid(format!(
                "lineitem_rows {} < orders_rows {}",
                self.lineitem_rows, self.orders_rows
            )));
        }
        if self.lineitem_rows > 0 && self.orders_rows == 0 {
            return Err(DataError::ConfigInvalid(
                "lineitem rows require at least one order".to_string(),
            ));
        }
        if self.orders_rows > 0 && self.max_lines_per_order == 0 {
            return Err(DataError::ConfigInvalid(
                "max_lines_per_order must be at least 1".to_string(),
            ));
        }
        if self.lineitem_rows > self.orders_rows.saturating_mul(self.max_lines_per_order) {
            return Err(DataError::ConfigInvalid(format!(
                "{} lineitem rows cannot fit into {} orders at {} lines each",
                self.lineitem_rows, self.orders_rows, self.max_lines_per_order
            )));
        }
        Ok(())
    }
}

pub const LINEITEM: &str = "lineitem";
pub const ORDERS: &str = "orders";
pub const SELECTIVITY_COLUMN: &str = "L_SHIPDATE";

/// First and last generated date: [1992-01-01, 1998-12-01], inclusive.
pub fn date_range() -> (i32, i32) {
    (days_from_civil(1992, 1, 1), days_from_civil(1998, 12, 1))
}

pub fn lineitem_schema() -> Schema {
    Schema::new(vec![
        ("L_ORDERKEY", ValueKind::Int64),
        ("L_EXTENDEDPRICE", ValueKind::Float64),
        ("L_DISCOUNT", ValueKind::Float64),
        ("L_SHIPDATE", ValueKind::Date),
    ])
    .expect("static schema")
}

pub fn orders_schema() -> Schema {
    Schema::new(vec![
        ("O_ORDERKEY", ValueKind::Int64),
        ("O_TOTALPRICE", ValueKind::Float64),
        ("O_ORDERDATE", ValueKind::Date),
    ])
    .expect("static schema")
}

/// The generated pair of relations, both sorted on their order key.
#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub lineitem: Relation,
    pub orders: Relation,
}

impl Tables {
    pub fn into_database(self) -> Database {
        let mut db = Database::new();
        db.insert(LINEITEM, self.lineitem);
        db.insert(ORDERS, self.orders);
        db
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round_ties_even() / 100.0
}

/// Generates the table pair. Draw order is pinned: order dates and prices
/// first, then per-order line counts, then the lineitem column draws in
/// order-key order.
pub fn generate(cfg: &GenConfig) -> Result<Tables, DataError> {
    cfg.validate()?;
    let mut rng = SplitMix64::new(cfg.seed);
    let (date_lo, date_hi) = date_range();
    let date_span = (date_hi - date_lo + 1) as u64;
    let (price_lo, price_hi) = (900.0f64, 105_000.0f64);

    let mut order_rows = Vec::with_capacity(cfg.orders_rows);
    for i in 0..cfg.orders_rows {
        let orderdate = date_lo + rng.below(date_span) as i32;
        let totalprice = round2(price_lo + rng.next_f64() * (price_hi - price_lo));
        order_rows.push(Row::new(
            vec![
                Value::Int64((i + 1) as i64),
                Value::Float64(totalprice),
                Value::Date(orderdate),
            ],
            i as i64,
        ));
    }

    // Per-order line counts, uniform in [1, max], then adjusted to hit
    // lineitem_rows exactly: truncated front-to-back when over, topped up
    // cyclically (capped at max) when under.
    let mut counts: Vec<usize> = (0..cfg.orders_rows)
        .map(|_| 1 + rng.below(cfg.max_lines_per_order as u64) as usize)
        .collect();
    let mut total: usize = counts.iter().sum();
    if total > cfg.lineitem_rows {
        let mut running = 0usize;
        for c in counts.iter_mut() {
            let keep = (*c).min(cfg.lineitem_rows - running);
            *c = keep;
            running += keep;
        }
        total = cfg.lineitem_rows;
    }
    while total < cfg.lineitem_rows {
        for c in counts.iter_mut() {
            if total == cfg.lineitem_rows {
                break;
            }
            if *c < cfg.max_lines_per_order {
                *c += 1;
                total += 1;
            }
        }
    }

    let mut lineitem_rows = Vec::with_capacity(cfg.lineitem_rows);
    for (order_idx, count) in counts.iter().enumerate() {
        for _ in 0..*count {
            let extendedprice = round2(price_lo + rng.next_f64() * (price_hi - price_lo));
            let discount = rng.below(11) as f64 / 100.0;
            let shipdate = date_lo + rng.below(date_span) as i32;
            let rowid = lineitem_rows.len() as i64;
            lineitem_rows.push(Row::new(
                vec![
                    Value::Int64((order_idx + 1) as i64),
                    Value::Float64(extendedprice),
                    Value::Float64(discount),
                    Value::Date(shipdate),
                ],
                rowid,
            ));
        }
    }

    Ok(Tables {
        lineitem: Relation::new_sorted(lineitem_schema(), lineitem_rows, "L_ORDERKEY")?,
        orders: Relation::new_sorted(orders_schema(), order_rows, "O_ORDERKEY")?,
    })
}

/// Returns the date threshold whose realized fraction of rows with
/// `column >= threshold` is closest to `s`. Computed exactly from the actual
/// column, not estimated.
pub fn threshold_for_selectivity(s: f64, tables: &Tables, column: &str) -> i32 {
    let idx = tables
        .lineitem
        .schema()
        .index_of(column)
        .expect("selectivity column exists");
    let mut dates: Vec<i32> = tables
        .lineitem
        .rows()
        .iter()
        .map(|r| match r.value(idx) {
            Value::Date(d) => *d,
            other => panic!("selectivity column must be a date, got {}", other.kind()),
        })
        .collect();
    dates.sort_unstable();
    let n = dates.len();
    if n == 0 {
        let (_, hi) = date_range();
        return hi + 1;
    }
    // Candidate thresholds: each distinct date (fraction of rows >= it) plus
    // one past the maximum (fraction 0).
    let mut best_t = dates[n - 1] + 1;
    let mut best_diff = (0.0f64 - s).abs();
    let mut i = 0usize;
    while i < n {
        let t = dates[i];
        // Rows >= t start at the first occurrence of t.
        let qualifying = (n - i) as f64;
        let diff = (qualifying / n as f64 - s).abs();
        if diff < best_diff {
            best_diff = diff;
            best_t = t;
        }
        let mut j = i + 1;
        while j < n && dates[j] == t {
            j += 1;
        }
        i = j;
    }
    best_t
}

/// Writes a relation as pipe-delimited `.tbl`: UTF-8, `|` separators, a
/// trailing `|`, `\n` terminators, ISO dates, `.`-decimal floats.
pub fn write_tbl(relation: &Relation, path: &Path) -> Result<(), DataError> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    for row in relation.rows() {
        for value in &row.values {
            let text = value.to_string();
            if text.contains('|') || text.contains('\n') {
                return Err(DataError::Io(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    "value contains a field or record separator",
                )));
            }
            write!(out, "{text}|")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Loads a pipe-delimited `.tbl` file against a schema. The trailing pipe is
/// optional. Malformed rows fail with their 1-based line and field position.
/// Rowids are assigned sequentially from zero.
pub fn load_tbl(
    path: &Path,
    schema: &Schema,
    sorted_on: Option<&str>,
) -> Result<Relation, DataError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();
    for (line_idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = line_idx + 1;
        let trimmed = line.strip_suffix('|').unwrap_or(&line);
        let fields: Vec<&str> = if trimmed.is_empty() {
            Vec::new()
        } else {
            trimmed.split('|').collect()
        };
        if fields.len() != schema.arity() {
            return Err(DataError::Parse {
                line: line_no,
                column: fields.len().min(schema.arity()) + 1,
                message: format!(
                    "expected {} fields, found {}",
                    schema.arity(),
                    fields.len()
                ),
            });
        }
        let mut values = Vec::with_capacity(fields.len());
        for (col, field) in fields.iter().enumerate() {
            let value = parse_field(field, schema.column_kind(col)).map_err(|message| {
                DataError::Parse {
                    line: line_no,
                    column: col + 1,
                    message,
                }
            })?;
            values.push(value);
        }
        rows.push(Row::new(values, rows.len() as i64));
    }
    let relation = Relation::new(schema.clone(), rows).map_err(DataError::Model)?;
    match sorted_on {
        Some(col) => relation.with_sorted_on(col).map_err(DataError::Model),
        None => Ok(relation),
    }
}

fn parse_field(field: &str, kind: ValueKind) -> Result<Value, String> {
    match kind {
        ValueKind::Int64 => field
            .parse::<i64>()
            .map(Value::Int64)
            .map_err(|e| format!("bad int64 {field:?}: {e}")),
        ValueKind::Float64 => field
            .parse::<f64>()
            .map(Value::Float64)
            .map_err(|e| format!("bad float64 {field:?}: {e}")),
        ValueKind::Date => parse_date_days(field)
            .map(Value::Date)
            .map_err(|_| format!("bad date {field:?}, expected YYYY-MM-DD")),
        ValueKind::Text => Ok(Value::Text(field.to_string())),
    }
}

/// Writes both tables into a directory as `lineitem.tbl` and `orders.tbl`.
pub fn write_tables(tables: &Tables, dir: &Path) -> Result<(), DataError> {
    write_tbl(&tables.lineitem, &dir.join("lineitem.tbl"))?;
    write_tbl(&tables.orders, &dir.join("orders.tbl"))
}

/// Loads both tables back, restoring the sortedness metadata.
pub fn load_tables(lineitem_path: &Path, orders_path: &Path) -> Result<Tables, DataError> {
    Ok(Tables {
        lineitem: load_tbl(lineitem_path, &lineitem_schema(), Some("L_ORDERKEY"))?,
        orders: load_tbl(orders_path, &orders_schema(), Some("O_ORDERKEY"))?,
    })
}
