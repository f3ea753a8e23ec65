//! Column values: a four-variant scalar with a total order within each variant.
//!
//! Dates are integer day counts since 1970-01-01 and round-trip through
//! "YYYY-MM-DD" text exactly. Comparison across variants is an error, never a
//! silent coercion.

use crate::error::ModelError;
use std::cmp::Ordering;
use std::fmt;

/// The variant tag of a [`Value`], used by schemas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueKind {
    Int64,
    Float64,
    Date,
    Text,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::Int64 => "int64",
            ValueKind::Float64 => "float64",
            ValueKind::Date => "date",
            ValueKind::Text => "text",
        };
        f.write_str(s)
    }
}

/// A single column value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int64(i64),
    Float64(f64),
    /// Days since 1970-01-01.
    Date(i32),
    Text(String),
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Int64(_) => ValueKind::Int64,
            Value::Float64(_) => ValueKind::Float64,
            Value::Date(_) => ValueKind::Date,
            Value::Text(_) => ValueKind::Text,
        }
    }

    /// Parses a date literal in strict "YYYY-MM-DD" form.
    pub fn parse_date(text: &str) -> Result<Value, ModelError> {
        Ok(Value::Date(parse_date_days(text)?))
    }

    /// Canonical byte encoding: a variant tag followed by a fixed-width (or
    /// length-prefixed) little-endian payload. Used for hashing and digests.
    /// Negative zero and NaN are canonicalized so equal-comparing floats hash
    /// equally.
    pub fn canonical_bytes(&self, out: &mut Vec<u8>) {
        match self {
            Value::Int64(v) => {
                out.push(0x01);
                out.extend_from_slice(&v.to_le_bytes());
            }
            Value::Float64(v) => {
                let v = if *v == 0.0 {
                    0.0
                } else if v.is_nan() {
                    f64::NAN
                } else {
                    *v
                };
                out.push(0x02);
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            Value::Date(v) => {
                out.push(0x03);
                out.extend_from_slice(&v.to_le_bytes());
            }
            Value::Text(v) => {
                out.push(0x04);
                out.extend_from_slice(&(v.len() as u32).to_le_bytes());
                out.extend_from_slice(v.as_bytes());
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int64(v) => write!(f, "{v}"),
            // Default f64 formatting is the shortest representation that
            // round-trips, so written values parse back bit-identically.
            Value::Float64(v) => write!(f, "{v}"),
            Value::Date(v) => f.write_str(&format_date_days(*v)),
            Value::Text(v) => f.write_str(v),
        }
    }
}

/// Total order between two values of the same variant.
///
/// Float64 uses a total order in which any NaN sorts last; dates compare as
/// integer day counts. Cross-variant comparison is a `TypeMismatch`.
pub fn compare_values(a: &Value, b: &Value) -> Result<Ordering, ModelError> {
    match (a, b) {
        (Value::Int64(x), Value::Int64(y)) => Ok(x.cmp(y)),
        (Value::Date(x), Value::Date(y)) => Ok(x.cmp(y)),
        (Value::Text(x), Value::Text(y)) => Ok(x.cmp(y)),
        (Value::Float64(x), Value::Float64(y)) => Ok(match (x.is_nan(), y.is_nan()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => x.partial_cmp(y).expect("non-NaN floats compare"),
        }),
        _ => Err(ModelError::TypeMismatch(format!(
            "cannot compare {} with {}",
            a.kind(),
            b.kind()
        ))),
    }
}

/// FNV-1a 64-bit over a byte slice. Pinned as the join hash function so
/// multi-map layouts are reproducible across runs and languages.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// FNV-1a 64-bit of a value's canonical byte encoding.
pub fn hash_value(v: &Value) -> u64 {
    let mut buf = Vec::with_capacity(16);
    v.canonical_bytes(&mut buf);
    fnv1a64(&buf)
}

// Civil-calendar conversions on the proleptic Gregorian calendar. These are
// the standard days-from-civil / civil-from-days integer algorithms, exact
// over the full i32 day range used here.

/// Days since 1970-01-01 for a civil date.
pub fn days_from_civil(year: i32, month: u32, day: u32) -> i32 {
    let y = i64::from(year) - i64::from(month <= 2);
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let m = i64::from(month);
    let d = i64::from(day);
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    (era * 146_097 + doe - 719_468) as i32
}

/// Civil (year, month, day) for a day count since 1970-01-01.
pub fn civil_from_days(days: i32) -> (i32, u32, u32) {
    let z = i64::from(days) + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    ((y + i64::from(m <= 2)) as i32, m as u32, d as u32)
}

/// Parses strict "YYYY-MM-DD" into days since the epoch.
pub fn parse_date_days(text: &str) -> Result<i32, ModelError> {
    let bytes = text.as_bytes();
    let bad = || ModelError::InvalidDate(text.to_string());
    if bytes.len() != 10 || bytes[4] != b'-' || bytes[7] != b'-' {
        return Err(bad());
    }
    let digits = |s: &[u8]| -> Result<u32, ModelError> {
        let mut v = 0u32;
        for b in s {
            if !b.is_ascii_digit() {
                return Err(bad());
            }
            v = v * 10 + u32::from(b - b'0');
        }
        Ok(v)
    };
    let year = digits(&bytes[0..4])? as i32;
    let month = digits(&bytes[5..7])?;
    let day = digits(&bytes[8..10])?;
    if !(1..=12).contains(&month) || day < 1 || day > days_in_month(year, month) {
        return Err(bad());
    }
    Ok(days_from_civil(year, month, day))
}

/// Formats a day count as "YYYY-MM-DD".
pub fn format_date_days(days: i32) -> String {
    let (y, m, d) = civil_from_days(days);
    format!("{y:04}-{m:02}-{d:02}")
}

fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}
