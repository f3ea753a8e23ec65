//! Join-side multi-map: FNV-1a 64-bit over the key's canonical byte
//! encoding, with insertion-ordered buckets so probe output order is
//! reproducible. Buckets may contain hash collisions; probes re-check key
//! equality.

use crate::schema::Row;
use crate::value::{hash_value, Value};
use std::collections::HashMap;

#[derive(Debug, Default)]
pub(crate) struct JoinMultiMap {
    buckets: HashMap<u64, Vec<Row>>,
}

impl JoinMultiMap {
    pub fn new() -> JoinMultiMap {
        JoinMultiMap::default()
    }

    pub fn insert(&mut self, key: &Value, row: Row) {
        self.buckets.entry(hash_value(key)).or_default().push(row);
    }

    /// Candidate rows whose key hashed like `key`, in insertion order.
    pub fn bucket(&self, key: &Value) -> &[Row] {
        self.buckets
            .get(&hash_value(key))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}
