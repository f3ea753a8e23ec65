//! The three pipelined engines: pull (iterator model), push (visitor model),
//! and stream fusion (pull-at-operator-granularity over Step values).
//!
//! All engines execute the same [`crate::plan::CheckedPlan`] against the same
//! immutable relations and fill the same [`crate::stats::ExecStats`], so
//! their pipeline behaviors are directly comparable.

pub mod pull;
pub mod push;
pub mod step;
pub mod stream;

mod joinmap;

use crate::error::ExecError;
use crate::schema::Row;
use crate::value::compare_values;
use std::cmp::Ordering;

/// Stable sort on one key column with an ascending rowid tie-break. The
/// engines share this helper; the oracle carries its own copy so the
/// differential tests compare two separate sort implementations.
pub(crate) fn sort_rows_stable(
    rows: &mut [Row],
    key: usize,
    ascending: bool,
) -> Result<(), ExecError> {
    let mut err = None;
    rows.sort_by(|a, b| {
        let ord = match compare_values(a.value(key), b.value(key)) {
            Ok(o) => o,
            Err(e) => {
                err.get_or_insert(e);
                Ordering::Equal
            }
        };
        let ord = if ascending { ord } else { ord.reverse() };
        ord.then(a.rowid.cmp(&b.rowid))
    });
    match err {
        Some(e) => Err(ExecError::Model(e)),
        None => Ok(()),
    }
}

pub(crate) fn values_equal(a: &crate::value::Value, b: &crate::value::Value) -> Result<bool, ExecError> {
    Ok(compare_values(a, b)? == Ordering::Equal)
}

/// Demand-driven sort-merge join over two key-sorted inputs (1-to-n, n on
/// the left). Shared by the pull and stream engines, which are the two
/// architectures able to pipeline both merge inputs: only the current left
/// key group is buffered, so the peak buffer never exceeds the largest key
/// multiplicity. Inputs are re-checked for key regressions at runtime.
pub(crate) struct MergeGroupJoin {
    left_key: usize,
    right_key: usize,
    group: Vec<Row>,
    emit_pos: usize,
    pending_left: Option<Row>,
    left_done: bool,
    cur_right: Option<Row>,
    last_left_key: Option<crate::value::Value>,
    last_right_key: Option<crate::value::Value>,
    next_rowid: i64,
}

/// Row suppliers for the two merge inputs.
type PullSide<'a> = &'a mut dyn FnMut(&mut crate::stats::ExecStats) -> Result<Option<Row>, ExecError>;

impl MergeGroupJoin {
    pub fn new(left_key: usize, right_key: usize) -> MergeGroupJoin {
        MergeGroupJoin {
            left_key,
            right_key,
            group: Vec::new(),
            emit_pos: 0,
            pending_left: None,
            left_done: false,
            cur_right: None,
            last_left_key: None,
            last_right_key: None,
            next_rowid: 0,
        }
    }

    pub fn reset(&mut self) {
        *self = MergeGroupJoin::new(self.left_key, self.right_key);
    }

    fn check_order(
        last: &mut Option<crate::value::Value>,
        key: &crate::value::Value,
        side: &str,
    ) -> Result<(), ExecError> {
        if let Some(prev) = last {
            if compare_values(prev, key)? == Ordering::Greater {
                return Err(ExecError::UnsortedInput(side.to_string()));
            }
        }
        *last = Some(key.clone());
        Ok(())
    }

    fn pull_left(
        &mut self,
        stats: &mut crate::stats::ExecStats,
        pull: PullSide,
    ) -> Result<Option<Row>, ExecError> {
        if let Some(row) = self.pending_left.take() {
            return Ok(Some(row));
        }
        if self.left_done {
            return Ok(None);
        }
        match pull(stats)? {
            Some(row) => {
                let key = row.value(self.left_key).clone();
                Self::check_order(&mut self.last_left_key, &key, "left")?;
                Ok(Some(row))
            }
            None => {
                self.left_done = true;
                Ok(None)
            }
        }
    }

    fn pull_right(
        &mut self,
        stats: &mut crate::stats::ExecStats,
        pull: PullSide,
    ) -> Result<Option<Row>, ExecError> {
        match pull(stats)? {
            Some(row) => {
                let key = row.value(self.right_key).clone();
                Self::check_order(&mut self.last_right_key, &key, "right")?;
                Ok(Some(row))
            }
            None => Ok(None),
        }
    }

    /// Replaces the buffered group with the next left key group. Returns
    /// false when the left side is exhausted.
    fn load_group(
        &mut self,
        stats: &mut crate::stats::ExecStats,
        pull: PullSide,
    ) -> Result<bool, ExecError> {
        stats.buffer_shrink(self.group.len() as u64);
        self.group.clear();
        self.emit_pos = 0;
        let Some(first) = self.pull_left(stats, pull)? else {
            return Ok(false);
        };
        let key = first.value(self.left_key).clone();
        stats.buffer_grow(1);
        self.group.push(first);
        while let Some(row) = self.pull_left(stats, pull)? {
            if values_equal(row.value(self.left_key), &key)? {
                stats.buffer_grow(1);
                self.group.push(row);
            } else {
                self.pending_left = Some(row);
                break;
            }
        }
        Ok(true)
    }

    /// Produces the next joined row, pulling from either side on demand.
    pub fn next_pair(
        &mut self,
        stats: &mut crate::stats::ExecStats,
        pull_left: PullSide,
        pull_right: PullSide,
    ) -> Result<Option<Row>, ExecError> {
        loop {
            if self.cur_right.is_none() {
                self.cur_right = self.pull_right(stats, pull_right)?;
                if self.cur_right.is_none() {
                    return Ok(None);
                }
            }
            let rkey = self
                .cur_right
                .as_ref()
                .expect("ensured above")
                .value(self.right_key)
                .clone();
            if self.group.is_empty() && !self.load_group(stats, pull_left)? {
                return Ok(None);
            }
            let gkey = self.group[0].value(self.left_key).clone();
            match compare_values(&gkey, &rkey)? {
                Ordering::Less => {
                    // This group can never match again: rights are sorted.
                    if !self.load_group(stats, pull_left)? {
                        return Ok(None);
                    }
                }
                Ordering::Greater => {
                    self.cur_right = self.pull_right(stats, pull_right)?;
                    self.emit_pos = 0;
                    if self.cur_right.is_none() {
                        return Ok(None);
                    }
                }
                Ordering::Equal => {
                    if self.emit_pos < self.group.len() {
                        let rrow = self.cur_right.as_ref().expect("ensured above");
                        let out = crate::schema::row_concat(
                            &self.group[self.emit_pos],
                            rrow,
                            self.next_rowid,
                        );
                        self.next_rowid += 1;
                        self.emit_pos += 1;
                        return Ok(Some(out));
                    }
                    // Group done for this right row; a later right row may
                    // carry the same key.
                    self.cur_right = self.pull_right(stats, pull_right)?;
                    self.emit_pos = 0;
                    if self.cur_right.is_none() {
                        return Ok(None);
                    }
                }
            }
        }
    }
}
