//! Schemas, rows, and relations: the typed in-memory row store shared by
//! every engine and the oracle.
//!
//! Relation construction checks all invariants eagerly — schema conformance,
//! rowid uniqueness, and claimed sortedness — so executors can assume them.

use crate::error::ModelError;
use crate::value::{compare_values, Value, ValueKind};
use std::cmp::Ordering;
use std::collections::HashSet;
use std::sync::Arc;

/// An ordered list of named, typed columns. Column names are unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<(String, ValueKind)>,
}

impl Schema {
    pub fn new<S: Into<String>>(columns: Vec<(S, ValueKind)>) -> Result<Schema, ModelError> {
        let columns: Vec<(String, ValueKind)> =
            columns.into_iter().map(|(n, k)| (n.into(), k)).collect();
        let mut seen = HashSet::new();
        for (name, _) in &columns {
            if !seen.insert(name.clone()) {
                return Err(ModelError::DuplicateColumn(name.clone()));
            }
        }
        Ok(Schema { columns })
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[(String, ValueKind)] {
        &self.columns
    }

    pub fn column_name(&self, index: usize) -> &str {
        &self.columns[index].0
    }

    pub fn column_kind(&self, index: usize) -> ValueKind {
        self.columns[index].1
    }

    /// Index of a column by name; the inverse of enumeration.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }

    /// Schema concatenation for join outputs. Right-side names that collide
    /// with a name already present get an "_r" suffix (repeated until unique).
    pub fn concat(&self, right: &Schema) -> Schema {
        let mut columns = self.columns.clone();
        let mut names: HashSet<String> = columns.iter().map(|(n, _)| n.clone()).collect();
        for (name, kind) in &right.columns {
            let mut name = name.clone();
            while names.contains(&name) {
                name.push_str("_r");
            }
            names.insert(name.clone());
            columns.push((name, *kind));
        }
        Schema { columns }
    }
}

/// A data tuple: values matching a schema plus a rowid provenance tag.
///
/// Rowids are unique within a relation; they make order-insensitive multiset
/// comparison and stable sort tie-breaking well defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub values: Vec<Value>,
    pub rowid: i64,
}

impl Row {
    pub fn new(values: Vec<Value>, rowid: i64) -> Row {
        Row { values, rowid }
    }

    pub fn value(&self, index: usize) -> &Value {
        &self.values[index]
    }

    fn conforms(&self, schema: &Schema) -> Result<(), ModelError> {
        if self.values.len() != schema.arity() {
            return Err(ModelError::SchemaMismatch(format!(
                "row arity {} != schema arity {}",
                self.values.len(),
                schema.arity()
            )));
        }
        for (i, v) in self.values.iter().enumerate() {
            if v.kind() != schema.column_kind(i) {
                return Err(ModelError::SchemaMismatch(format!(
                    "column {} expects {}, got {}",
                    schema.column_name(i),
                    schema.column_kind(i),
                    v.kind()
                )));
            }
        }
        Ok(())
    }
}

/// Concatenates two rows into a fresh row carrying the supplied rowid.
///
/// The matching schema-level operation is [`Schema::concat`].
pub fn row_concat(left: &Row, right: &Row, rowid: i64) -> Row {
    let mut values = Vec::with_capacity(left.values.len() + right.values.len());
    values.extend_from_slice(&left.values);
    values.extend_from_slice(&right.values);
    Row { values, rowid }
}

/// An immutable ordered collection of rows conforming to one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    schema: Schema,
    rows: Vec<Row>,
    sorted_on: Option<String>,
}

impl Relation {
    /// Builds a relation, checking row conformance and rowid uniqueness.
    pub fn new(schema: Schema, rows: Vec<Row>) -> Result<Relation, ModelError> {
        let mut ids = HashSet::with_capacity(rows.len());
        for row in &rows {
            row.conforms(&schema)?;
            if !ids.insert(row.rowid) {
                return Err(ModelError::DuplicateRowId(row.rowid));
            }
        }
        Ok(Relation {
            schema,
            rows,
            sorted_on: None,
        })
    }

    /// Builds a relation that advertises sortedness on `column`, verifying
    /// the rows really are non-decreasing on it.
    pub fn new_sorted(
        schema: Schema,
        rows: Vec<Row>,
        column: &str,
    ) -> Result<Relation, ModelError> {
        Relation::new(schema, rows)?.with_sorted_on(column)
    }

    /// Marks an existing relation as sorted on `column` after verifying it.
    pub fn with_sorted_on(mut self, column: &str) -> Result<Relation, ModelError> {
        let idx = self
            .schema
            .index_of(column)
            .ok_or_else(|| ModelError::SchemaMismatch(format!("no column {column}")))?;
        for pair in self.rows.windows(2) {
            if compare_values(pair[0].value(idx), pair[1].value(idx))? == Ordering::Greater {
                return Err(ModelError::NotSorted(column.to_string()));
            }
        }
        self.sorted_on = Some(column.to_string());
        Ok(self)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn sorted_on(&self) -> Option<&str> {
        self.sorted_on.as_deref()
    }
}

/// The named, immutable relations a query runs against. Relations are shared
/// read-only; one loaded database can serve many concurrent executions.
#[derive(Debug, Clone, Default)]
pub struct Database {
    tables: std::collections::BTreeMap<String, Arc<Relation>>,
}

impl Database {
    pub fn new() -> Database {
        Database::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, relation: Relation) {
        self.tables.insert(name.into(), Arc::new(relation));
    }

    pub fn get(&self, name: &str) -> Option<&Arc<Relation>> {
        self.tables.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(|s| s.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ab_schema() -> Schema {
        Schema::new(vec![("A", ValueKind::Int64), ("B", ValueKind::Float64)]).unwrap()
    }

    #[test]
    fn concat_values_and_rowid() {
        let l = Row::new(vec![Value::Int64(1), Value::Text("a".into())], 0);
        let r = Row::new(vec![Value::Float64(2.5)], 9);
        let out = row_concat(&l, &r, 7);
        assert_eq!(
            out.values,
            vec![Value::Int64(1), Value::Text("a".into()), Value::Float64(2.5)]
        );
        assert_eq!(out.rowid, 7);
    }

    #[test]
    fn concat_empty_left_is_identity() {
        let l = Row::new(vec![], 0);
        let r = Row::new(vec![Value::Int64(7)], 1);
        assert_eq!(row_concat(&l, &r, 0).values, vec![Value::Int64(7)]);
    }

    #[test]
    fn lineitem_orders_concat_arity() {
        let lineitem = Schema::new(vec![
            ("L_ORDERKEY", ValueKind::Int64),
            ("L_EXTENDEDPRICE", ValueKind::Float64),
            ("L_DISCOUNT", ValueKind::Float64),
            ("L_SHIPDATE", ValueKind::Date),
        ])
        .unwrap();
        let orders = Schema::new(vec![
            ("O_ORDERKEY", ValueKind::Int64),
            ("O_TOTALPRICE", ValueKind::Float64),
            ("O_ORDERDATE", ValueKind::Date),
        ])
        .unwrap();
        assert_eq!(lineitem.concat(&orders).arity(), 7);
    }

    #[test]
    fn concat_disambiguates_collisions() {
        let a = Schema::new(vec![("K", ValueKind::Int64)]).unwrap();
        let b = Schema::new(vec![("K", ValueKind::Int64)]).unwrap();
        let joined = a.concat(&b);
        assert_eq!(joined.column_name(0), "K");
        assert_eq!(joined.column_name(1), "K_r");
    }

    #[test]
    fn duplicate_column_rejected() {
        let err = Schema::new(vec![("X", ValueKind::Int64), ("X", ValueKind::Date)]).unwrap_err();
        assert_eq!(err, ModelError::DuplicateColumn("X".into()));
    }

    #[test]
    fn index_lookup_inverts_enumeration() {
        let s = ab_schema();
        for (i, (name, _)) in s.columns().iter().enumerate() {
            assert_eq!(s.index_of(name), Some(i));
        }
    }

    #[test]
    fn duplicate_rowids_rejected() {
        let rows = vec![
            Row::new(vec![Value::Int64(1), Value::Float64(0.0)], 3),
            Row::new(vec![Value::Int64(2), Value::Float64(0.0)], 3),
        ];
        assert_eq!(
            Relation::new(ab_schema(), rows).unwrap_err(),
            ModelError::DuplicateRowId(3)
        );
    }

    #[test]
    fn sortedness_is_verified() {
        let rows = vec![
            Row::new(vec![Value::Int64(2), Value::Float64(0.0)], 0),
            Row::new(vec![Value::Int64(1), Value::Float64(0.0)], 1),
        ];
        let err = Relation::new_sorted(ab_schema(), rows, "A").unwrap_err();
        assert_eq!(err, ModelError::NotSorted("A".into()));
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            any::<i64>().prop_map(Value::Int64),
            any::<i32>().prop_map(|v| Value::Float64(f64::from(v))),
            any::<i32>().prop_map(Value::Date),
            "[a-z]{0,4}".prop_map(Value::Text),
        ]
    }

    // A random row is accepted by Relation::new exactly when its shape and
    // variants conform to the schema.
    proptest! {
        #[test]
        fn conformance_checked_on_construction(values in prop::collection::vec(arb_value(), 0..5)) {
            let schema = ab_schema();
            let conforms = values.len() == 2
                && values[0].kind() == ValueKind::Int64
                && values[1].kind() == ValueKind::Float64;
            let result = Relation::new(schema, vec![Row::new(values, 0)]);
            prop_assert_eq!(result.is_ok(), conforms);
        }
    }
}
