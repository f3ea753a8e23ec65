//! Scalar expressions, predicates, projectors, and aggregators.
//!
//! These are small closed ASTs rather than opaque closures so that plans can
//! be validated (names resolved to indexes), described, and executed
//! deterministically by every engine and the oracle alike. Evaluation is pure.

use crate::error::{ExecError, ModelError, PlanError};
use crate::schema::{Row, Schema};
use crate::value::{compare_values, Value, ValueKind};
use std::cmp::Ordering;

/// A column reference: by name before validation, by index afterwards.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    pub fn name(n: impl Into<String>) -> ColumnRef {
        ColumnRef::Name(n.into())
    }
}

/// A pure scalar expression over one row.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarExpr {
    Column(ColumnRef),
    Literal(Value),
    /// Numeric product. Int64×Int64 is checked; Float64×Float64 is IEEE.
    Mul(Box<ScalarExpr>, Box<ScalarExpr>),
}

impl ScalarExpr {
    pub fn column(name: impl Into<String>) -> ScalarExpr {
        ScalarExpr::Column(ColumnRef::name(name))
    }

    pub fn literal(v: Value) -> ScalarExpr {
        ScalarExpr::Literal(v)
    }

    pub fn product(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
        ScalarExpr::Mul(Box::new(a), Box::new(b))
    }

    /// Resolves column names to indexes against `schema`.
    pub fn resolve(&self, schema: &Schema) -> Result<ScalarExpr, PlanError> {
        match self {
            ScalarExpr::Column(ColumnRef::Name(n)) => {
                let idx = schema
                    .index_of(n)
                    .ok_or_else(|| PlanError::UnknownColumn(n.clone()))?;
                Ok(ScalarExpr::Column(ColumnRef::Index(idx)))
            }
            ScalarExpr::Column(ColumnRef::Index(i)) => {
                if *i >= schema.arity() {
                    return Err(PlanError::UnknownColumn(format!("#{i}")));
                }
                Ok(self.clone())
            }
            ScalarExpr::Literal(_) => Ok(self.clone()),
            ScalarExpr::Mul(a, b) => Ok(ScalarExpr::product(a.resolve(schema)?, b.resolve(schema)?)),
        }
    }

    /// Static result kind against a schema. Mul requires both sides to share
    /// a numeric kind.
    pub fn kind(&self, schema: &Schema) -> Result<ValueKind, PlanError> {
        match self {
            ScalarExpr::Column(ColumnRef::Index(i)) => Ok(schema.column_kind(*i)),
            ScalarExpr::Column(ColumnRef::Name(n)) => {
                let idx = schema
                    .index_of(n)
                    .ok_or_else(|| PlanError::UnknownColumn(n.clone()))?;
                Ok(schema.column_kind(idx))
            }
            ScalarExpr::Literal(v) => Ok(v.kind()),
            ScalarExpr::Mul(a, b) => {
                let (ka, kb) = (a.kind(schema)?, b.kind(schema)?);
                match (ka, kb) {
                    (ValueKind::Int64, ValueKind::Int64) => Ok(ValueKind::Int64),
                    (ValueKind::Float64, ValueKind::Float64) => Ok(ValueKind::Float64),
                    // Mixed operands fail at eval time with TypeMismatch.
                    _ => Ok(ka),
                }
            }
        }
    }

    pub fn eval(&self, row: &Row) -> Result<Value, ExecError> {
        match self {
            ScalarExpr::Column(ColumnRef::Index(i)) => Ok(row.value(*i).clone()),
            ScalarExpr::Column(ColumnRef::Name(n)) => Err(ExecError::Model(
                ModelError::SchemaMismatch(format!("unresolved column {n}")),
            )),
            ScalarExpr::Literal(v) => Ok(v.clone()),
            ScalarExpr::Mul(a, b) => match (a.eval(row)?, b.eval(row)?) {
                (Value::Int64(x), Value::Int64(y)) => x
                    .checked_mul(y)
                    .map(Value::Int64)
                    .ok_or(ExecError::ArithmeticOverflow),
                (Value::Float64(x), Value::Float64(y)) => Ok(Value::Float64(x * y)),
                (x, y) => Err(ExecError::Model(ModelError::TypeMismatch(format!(
                    "cannot multiply {} with {}",
                    x.kind(),
                    y.kind()
                )))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn matches(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
        }
    }
}

/// A pure row predicate.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Const(bool),
    Compare {
        lhs: ScalarExpr,
        op: CmpOp,
        rhs: ScalarExpr,
    },
    And(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn compare(lhs: ScalarExpr, op: CmpOp, rhs: ScalarExpr) -> Predicate {
        Predicate::Compare { lhs, op, rhs }
    }

    /// `column >= literal`, the workhorse of the microbenchmark filters.
    pub fn col_ge(column: impl Into<String>, v: Value) -> Predicate {
        Predicate::compare(ScalarExpr::column(column), CmpOp::Ge, ScalarExpr::literal(v))
    }

    pub fn col_lt(column: impl Into<String>, v: Value) -> Predicate {
        Predicate::compare(ScalarExpr::column(column), CmpOp::Lt, ScalarExpr::literal(v))
    }

    pub fn and(a: Predicate, b: Predicate) -> Predicate {
        Predicate::And(Box::new(a), Box::new(b))
    }

    pub fn resolve(&self, schema: &Schema) -> Result<Predicate, PlanError> {
        Ok(match self {
            Predicate::Const(b) => Predicate::Const(*b),
            Predicate::Compare { lhs, op, rhs } => Predicate::Compare {
                lhs: lhs.resolve(schema)?,
                op: *op,
                rhs: rhs.resolve(schema)?,
            },
            Predicate::And(a, b) => Predicate::and(a.resolve(schema)?, b.resolve(schema)?),
            Predicate::Not(p) => Predicate::Not(Box::new(p.resolve(schema)?)),
        })
    }

    pub fn eval(&self, row: &Row) -> Result<bool, ExecError> {
        match self {
            Predicate::Const(b) => Ok(*b),
            Predicate::Compare { lhs, op, rhs } => {
                let (a, b) = (lhs.eval(row)?, rhs.eval(row)?);
                let ord = compare_values(&a, &b)?;
                Ok(op.matches(ord))
            }
            Predicate::And(a, b) => Ok(a.eval(row)? && b.eval(row)?),
            Predicate::Not(p) => Ok(!p.eval(row)?),
        }
    }
}

/// A pure row transformer with a derived output schema. Projection preserves
/// the input rowid, keeping provenance across 1-to-1 operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub outputs: Vec<(String, ScalarExpr)>,
}

impl Projector {
    pub fn new<S: Into<String>>(outputs: Vec<(S, ScalarExpr)>) -> Projector {
        Projector {
            outputs: outputs.into_iter().map(|(n, e)| (n.into(), e)).collect(),
        }
    }

    /// Identity-style projection of named input columns.
    pub fn columns<S: Into<String> + Clone>(names: Vec<S>) -> Projector {
        Projector::new(
            names
                .into_iter()
                .map(|n| {
                    let name: String = n.into();
                    let expr = ScalarExpr::column(name.clone());
                    (name, expr)
                })
                .collect(),
        )
    }

    pub fn resolve(&self, schema: &Schema) -> Result<Projector, PlanError> {
        let outputs = self
            .outputs
            .iter()
            .map(|(n, e)| Ok((n.clone(), e.resolve(schema)?)))
            .collect::<Result<Vec<_>, PlanError>>()?;
        Ok(Projector { outputs })
    }

    pub fn output_schema(&self, input: &Schema) -> Result<Schema, PlanError> {
        let cols = self
            .outputs
            .iter()
            .map(|(n, e)| Ok((n.clone(), e.kind(input)?)))
            .collect::<Result<Vec<_>, PlanError>>()?;
        Schema::new(cols).map_err(|_| PlanError::UnknownColumn("duplicate projection name".into()))
    }

    pub fn apply(&self, row: &Row) -> Result<Row, ExecError> {
        let values = self
            .outputs
            .iter()
            .map(|(_, e)| e.eval(row))
            .collect::<Result<Vec<_>, ExecError>>()?;
        Ok(Row::new(values, row.rowid))
    }
}

/// Scalar aggregation kinds. Group-by is out of scope; an aggregate folds the
/// whole input into one value.
#[derive(Debug, Clone, PartialEq)]
pub enum AggKind {
    Count,
    Sum(ScalarExpr),
}

impl AggKind {
    pub fn resolve(&self, schema: &Schema) -> Result<AggKind, PlanError> {
        Ok(match self {
            AggKind::Count => AggKind::Count,
            AggKind::Sum(e) => AggKind::Sum(e.resolve(schema)?),
        })
    }

    /// The fold's zero element. Count is Int64 0; Sum starts at the zero of
    /// the summed expression's kind.
    pub fn zero(&self, input: &Schema) -> Result<Value, PlanError> {
        Ok(match self {
            AggKind::Count => Value::Int64(0),
            AggKind::Sum(e) => match e.kind(input)? {
                ValueKind::Int64 => Value::Int64(0),
                _ => Value::Float64(0.0),
            },
        })
    }

    /// One fold step: `(row, acc) -> acc`. Int64 accumulation is checked and
    /// fails with `ArithmeticOverflow` rather than wrapping or saturating.
    pub fn step(&self, row: &Row, acc: Value) -> Result<Value, ExecError> {
        match self {
            AggKind::Count => match acc {
                Value::Int64(n) => n
                    .checked_add(1)
                    .map(Value::Int64)
                    .ok_or(ExecError::ArithmeticOverflow),
                other => Err(ExecError::Model(ModelError::TypeMismatch(format!(
                    "count accumulator must be int64, got {}",
                    other.kind()
                )))),
            },
            AggKind::Sum(e) => match (e.eval(row)?, acc) {
                (Value::Int64(x), Value::Int64(a)) => a
                    .checked_add(x)
                    .map(Value::Int64)
                    .ok_or(ExecError::ArithmeticOverflow),
                (Value::Float64(x), Value::Float64(a)) => Ok(Value::Float64(a + x)),
                (x, a) => Err(ExecError::Model(ModelError::TypeMismatch(format!(
                    "cannot add {} into {} accumulator",
                    x.kind(),
                    a.kind()
                )))),
            },
        }
    }
}
