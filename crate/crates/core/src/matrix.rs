//! Row-indexed instance storage with constant-time entry lookup, cached row
//! norms, and instrumentation of the number of entries an algorithm reads.
//!
//! Rows are hash tables keyed by column (dense vectors once more than half the
//! columns are populated). A compressed column index is built alongside so the
//! solvers can read `A_i(j)` for every row `i` without probing `n` tables.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::BuildHasherDefault;
use std::path::Path;

use crate::error::{Error, Result};

/// Row norms may exceed one by at most this much.
pub const NORM_TOLERANCE: f64 = 1e-9;

type FixedState = BuildHasherDefault<DefaultHasher>;

/// Counts entry lookups made through the counting accessors.
#[derive(Debug, Default, Clone)]
pub struct AccessCounter {
    entries_read: u64,
    epoch_start: u64,
}

impl AccessCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn record(&mut self, k: u64) {
        self.entries_read += k;
    }

    /// Total entries read since construction.
    pub fn total(&self) -> u64 {
        self.entries_read
    }

    /// Marks the start of a new epoch.
    pub fn start_epoch(&mut self) {
        self.epoch_start = self.entries_read;
    }

    pub fn in_epoch(&self) -> u64 {
        self.entries_read - self.epoch_start
    }
}

#[derive(Debug, Clone)]
enum Row {
    Sparse {
        cols: Vec<u32>,
        vals: Vec<f64>,
        lookup: HashMap<u32, f64, FixedState>,
    },
    Dense(Vec<f64>),
}

impl Row {
    fn get(&self, j: usize) -> f64 {
        match self {
            Row::Sparse { lookup, .. } => lookup.get(&(j as u32)).copied().unwrap_or(0.0),
            Row::Dense(v) => v[j],
        }
    }

    fn stored(&self) -> usize {
        match self {
            Row::Sparse { cols, .. } => cols.len(),
            Row::Dense(v) => v.len(),
        }
    }
}

/// Nonzeros of one column, in increasing row order.
#[derive(Debug, Clone, Copy)]
pub struct ColumnView<'a> {
    pub rows: &'a [u32],
    pub vals: &'a [f64],
}

impl<'a> ColumnView<'a> {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        let rows = self.rows;
        let vals = self.vals;
        rows.iter().zip(vals).map(|(&i, &v)| (i as usize, v))
    }
}

#[derive(Debug, Clone)]
struct ColumnIndex {
    ptr: Vec<usize>,
    rows: Vec<u32>,
    vals: Vec<f64>,
}

/// Whether rows must lie in the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormPolicy {
    UnitBall,
    /// Payoff matrices for zero-sum games only bound entries, not rows.
    Unchecked,
}

/// An `n x d` instance matrix.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Row>,
    row_sq_norms: Vec<f64>,
    nnz: usize,
    columns: ColumnIndex,
}

impl DataMatrix {
    /// Builds a matrix from sparse rows of `(column, value)` pairs.
    /// Explicit zeros are dropped; duplicate columns are rejected.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        Self::from_rows_with(n_cols, rows, NormPolicy::UnitBall)
    }

    pub fn from_rows_with(
        n_cols: usize,
        rows: Vec<Vec<(usize, f64)>>,
        policy: NormPolicy,
    ) -> Result<Self> {
        let n_rows = rows.len();
        let mut stored = Vec::with_capacity(n_rows);
        let mut row_sq_norms = Vec::with_capacity(n_rows);
        let mut nnz = 0;
        for (i, mut entries) in rows.into_iter().enumerate() {
            entries.retain(|&(_, v)| v != 0.0);
            entries.sort_by_key(|&(j, _)| j);
            for w in entries.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Contract(format!(
                        "row {i} lists column {} twice",
                        w[0].0
                    )));
                }
            }
            for &(j, v) in &entries {
                if j >= n_cols {
                    return Err(Error::IndexOutOfRange {
                        row: i,
                        col: j,
                        n_rows,
                        n_cols,
                    });
                }
                if !v.is_finite() {
                    return Err(Error::Contract(format!("row {i} has non-finite entry")));
                }
            }
            let sq: f64 = entries.iter().map(|&(_, v)| v * v).sum();
            if policy == NormPolicy::UnitBall && sq.sqrt() > 1.0 + NORM_TOLERANCE {
                return Err(Error::NormViolation {
                    row: i,
                    norm: sq.sqrt(),
                });
            }
            nnz += entries.len();
            row_sq_norms.push(sq);
            stored.push(make_row(n_cols, entries));
        }
        let columns = build_columns(n_rows, n_cols, &stored);
        Ok(Self {
            n_rows,
            n_cols,
            rows: stored,
            row_sq_norms,
            nnz,
            columns,
        })
    }

    /// Builds a matrix from dense rows.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_dense_with(rows, NormPolicy::UnitBall)
    }

    pub fn from_dense_with(rows: &[Vec<f64>], policy: NormPolicy) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Contract("dense rows have unequal lengths".into()));
        }
        let sparse = rows
            .iter()
            .map(|r| r.iter().copied().enumerate().collect())
            .collect();
        Self::from_rows_with(d, sparse, policy)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of stored nonzeros.
    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn row_sq_norm(&self, i: usize) -> f64 {
        self.row_sq_norms[i]
    }

    pub fn row_sq_norms(&self) -> &[f64] {
        &self.row_sq_norms
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n_rows || j >= self.n_cols {
            return Err(Error::IndexOutOfRange {
                row: i,
                col: j,
                n_rows: self.n_rows,
                n_cols: self.n_cols,
            });
        }
        Ok(())
    }

    /// Counted entry lookup.
    pub fn get_entry(&self, i: usize, j: usize, counter: &mut AccessCounter) -> Result<f64> {
        self.check(i, j)?;
        counter.record(1);
        Ok(self.rows[i].get(j))
    }

    /// Uncounted entry lookup.
    pub fn entry(&self, i: usize, j: usize) -> Result<f64> {
        self.check(i, j)?;
        Ok(self.rows[i].get(j))
    }

    /// Uncounted iteration over the nonzeros of row `i`, in column order.
    pub fn row_entries(&self, i: usize) -> RowEntries<'_> {
        match &self.rows[i] {
            Row::Sparse { cols, vals, .. } => RowEntries::Sparse(cols.iter().zip(vals.iter())),
            Row::Dense(v) => RowEntries::Dense(v.iter().enumerate()),
        }
    }

    /// Stored entries of row `i`.
    pub fn row_nnz(&self, i: usize) -> usize {
        self.rows[i].stored()
    }

    /// Counted read of a whole row; charges one access per stored entry.
    pub fn read_row(&self, i: usize, counter: &mut AccessCounter) -> RowEntries<'_> {
        counter.record(self.rows[i].stored() as u64);
        self.row_entries(i)
    }

    /// Counted read of `A_i(j)` for every row `i`: charges one lookup per
    /// row, returns only the nonzeros.
    pub fn read_column(&self, j: usize, counter: &mut AccessCounter) -> ColumnView<'_> {
        counter.record(self.n_rows as u64);
        self.column(j)
    }

    /// Uncounted column access.
    pub fn column(&self, j: usize) -> ColumnView<'_> {
        let lo = self.columns.ptr[j];
        let hi = self.columns.ptr[j + 1];
        ColumnView {
            rows: &self.columns.rows[lo..hi],
            vals: &self.columns.vals[lo..hi],
        }
    }

    /// Row `i` as a dense vector.
    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (j, v) in self.row_entries(i) {
            out[j] = v;
        }
        out
    }

    /// Exact `A_i . x` (uncounted).
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        match &self.rows[i] {
            Row::Sparse { cols, vals, .. } => cols
                .iter()
                .zip(vals)
                .map(|(&j, &v)| v * x[j as usize])
                .sum(),
            Row::Dense(v) => crate::linalg::dot(v, x),
        }
    }

    /// Exact `A_i . A_k` (uncounted).
    pub fn rows_dot(&self, i: usize, k: usize) -> f64 {
        match (&self.rows[i], &self.rows[k]) {
            (Row::Dense(a), Row::Dense(b)) => crate::linalg::dot(a, b),
            (Row::Dense(a), other) | (other, Row::Dense(a)) => match other {
                Row::Sparse { cols, vals, .. } => cols
                    .iter()
                    .zip(vals)
                    .map(|(&j, &v)| v * a[j as usize])
                    .sum(),
                Row::Dense(_) => unreachable!(),
            },
            (Row::Sparse { cols, vals, .. }, Row::Sparse { lookup, .. }) => cols
                .iter()
                .zip(vals)
                .map(|(j, &v)| v * lookup.get(j).copied().unwrap_or(0.0))
                .sum(),
        }
    }

    /// Exact `A^T p` for a sparse weight vector (uncounted).
    pub fn weighted_row_sum(&self, weights: impl IntoIterator<Item = (usize, f64)>) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (i, w) in weights {
            for (j, v) in self.row_entries(i) {
                out[j] += w * v;
            }
        }
        out
    }

    /// Serializes to the instance text format.
    pub fn to_instance_string(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {}", self.n_rows, self.n_cols).unwrap();
        for i in 0..self.n_rows {
            let mut first = true;
            for (j, v) in self.row_entries(i) {
                if v == 0.0 {
                    continue;
                }
                if !first {
                    s.push(' ');
                }
                first = false;
                // `{:?}` on f64 prints the shortest string that round-trips.
                write!(s, "{j}:{v:?}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_instance_string()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub enum RowEntries<'a> {
    Sparse(std::iter::Zip<std::slice::Iter<'a, u32>, std::slice::Iter<'a, f64>>),
    Dense(std::iter::Enumerate<std::slice::Iter<'a, f64>>),
}

impl Iterator for RowEntries<'_> {
    type Item = (usize, f64);

    #[inline]
    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            RowEntries::Sparse(it) => it.next().map(|(&j, &v)| (j as usize, v)),
            RowEntries::Dense(it) => it.next().map(|(j, &v)| (j, v)),
        }
    }
}

fn make_row(n_cols: usize, entries: Vec<(usize, f64)>) -> Row {
    if 2 * entries.len() > n_cols {
        let mut v = vec![0.0; n_cols];
        for (j, x) in entries {
            v[j] = x;
        }
        Row::Dense(v)
    } else {
        let cols: Vec<u32> = entries.iter().map(|&(j, _)| j as u32).collect();
        let vals: Vec<f64> = entries.iter().map(|&(_, v)| v).collect();
        let lookup = cols.iter().copied().zip(vals.iter().copied()).collect();
        Row::Sparse { cols, vals, lookup }
    }
}

fn build_columns(n_rows: usize, n_cols: usize, rows: &[Row]) -> ColumnIndex {
    let mut counts = vec![0usize; n_cols + 1];
    let nonzeros = |r: &Row| -> Vec<(usize, f64)> {
        match r {
            Row::Sparse { cols, vals, .. } => cols
                .iter()
                .zip(vals)
                .map(|(&j, &v)| (j as usize, v))
                .collect(),
            Row::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(j, &x)| (j, x))
                .collect(),
        }
    };
    let all: Vec<Vec<(usize, f64)>> = rows.iter().map(nonzeros).collect();
    for r in &all {
        for &(j, _) in r {
            counts[j + 1] += 1;
        }
    }
    for j in 0..n_cols {
        counts[j + 1] += counts[j];
    }
    let total = counts[n_cols];
    let mut fill = counts.clone();
    let mut col_rows = vec![0u32; total];
    let mut col_vals = vec![0.0; total];
    debug_assert!(n_rows <= u32::MAX as usize);
    for (i, r) in all.iter().enumerate() {
        for &(j, v) in r {
            col_rows[fill[j]] = i as u32;
            col_vals[fill[j]] = v;
            fill[j] += 1;
        }
    }
    ColumnIndex {
        ptr: counts,
        rows: col_rows,
        vals: col_vals,
    }
}

/// Options for [`load_instance_with`].
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub norms: NormPolicy,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            norms: NormPolicy::UnitBall,
        }
    }
}

/// Loads an instance file, rejecting rows outside the unit ball.
pub fn load_instance(path: impl AsRef<Path>) -> Result<DataMatrix> {
    load_instance_with(path, LoadOptions::default())
}

pub fn load_instance_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<DataMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_instance_with(&text, opts)
}

pub fn parse_instance(text: &str) -> Result<DataMatrix> {
    parse_instance_with(text, LoadOptions::default())
}

/// Parses the instance text format: a header line `n d`, then one line per
/// row of whitespace-separated `col:value` pairs. `#` starts a comment; lines
/// holding only a comment are skipped, blank lines inside the body are
/// all-zero rows.
pub fn parse_instance_with(text: &str, opts: LoadOptions) -> Result<DataMatrix> {
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l))
        .filter(|(_, l)| !l.trim_start().starts_with('#'))
        .map(|(k, l)| (k, l.split('#').next().unwrap_or("")));

    let (hline, header) = loop {
        match lines.next() {
            None => return Err(parse_err(1, "missing header line \"n d\"".into())),
            Some((k, l)) if l.trim().is_empty() => {
                // leading blank lines before the header are tolerated
                let _ = k;
                continue;
            }
            Some(x) => break x,
        }
    };
    let mut fields = header.split_whitespace();
    let mut next_count = |what: &str| -> Result<usize> {
        fields
            .next()
            .ok_or_else(|| parse_err(hline, format!("header is missing {what}")))?
            .parse::<usize>()
            .map_err(|e| parse_err(hline, format!("bad {what}: {e}")))
    };
    let n = next_count("row count")?;
    let d = next_count("column count")?;
    if fields.next().is_some() {
        return Err(parse_err(hline, "header has trailing fields".into()));
    }

    let mut rows = Vec::with_capacity(n);
    for (k, line) in lines.by_ref() {
        if rows.len() == n {
            if line.trim().is_empty() {
                continue;
            }
            return Err(parse_err(k, format!("more than {n} rows")));
        }
        let mut entries = Vec::new();
        for tok in line.split_whitespace() {
            let (c, v) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(k, format!("expected col:value, got {tok:?}")))?;
            let c: usize = c
                .parse()
                .map_err(|e| parse_err(k, format!("bad column {c:?}: {e}")))?;
            let v: f64 = v
                .parse()
                .map_err(|e| parse_err(k, format!("bad value {v:?}: {e}")))?;
            if c >= d {
                return Err(parse_err(k, format!("column {c} out of range (d = {d})")));
            }
            if entries.iter().any(|&(j, _)| j == c) {
                return Err(parse_err(k, format!("duplicate column {c}")));
            }
            entries.push((c, v));
        }
        rows.push(entries);
    }
    if rows.len() < n {
        return Err(parse_err(
            text.lines().count().max(1),
            format!("expected {n} rows, found {}", rows.len()),
        ));
    }
    DataMatrix::from_rows_with(d, rows, opts.norms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stored_value_and_counter() {
        let m = DataMatrix::from_rows(4, vec![vec![(2, 0.5)], vec![(0, 0.1)]]).unwrap();
        let mut c = AccessCounter::new();
        assert_eq!(m.get_entry(0, 2, &mut c).unwrap(), 0.5);
        assert_eq!(c.total(), 1);
        assert_eq!(m.get_entry(1, 3, &mut c).unwrap(), 0.0);
        assert_eq!(c.total(), 2);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let m = DataMatrix::from_rows(2, vec![vec![(0, 1.0)]]).unwrap();
        let mut c = AccessCounter::new();
        assert!(matches!(
            m.get_entry(1, 0, &mut c),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(m.get_entry(0, 2, &mut c).is_err());
        assert_eq!(c.total(), 0);
    }

    #[test]
    fn cached_norm() {
        let m = parse_instance("1 2\n0:0.6 1:0.8\n").unwrap();
        assert_eq!(m.row_sq_norm(0), 0.36 + 0.64);
        assert!((m.row_sq_norm(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parses_identity_rows() {
        let m = parse_instance("2 2\n0:1.0\n1:1.0").unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.n_cols(), 2);
        assert_eq!(m.entry(0, 0).unwrap(), 1.0);
        assert_eq!(m.entry(0, 1).unwrap(), 0.0);
        assert_eq!(m.entry(1, 1).unwrap(), 1.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn rejects_long_rows() {
        let err = parse_instance("1 2\n0:1.5\n").unwrap_err();
        assert!(matches!(err, Error::NormViolation { row: 0, .. }));
        let ok = parse_instance_with(
            "1 2\n0:1.5\n",
            LoadOptions {
                norms: NormPolicy::Unchecked,
            },
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn empty_and_malformed_input() {
        assert!(matches!(parse_instance(""), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_instance("2 2\n0:1\n"),
            Err(Error::Parse { .. })
        ));
        let e = parse_instance("1 2\n0=1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(parse_instance("1 2\n5:0.1\n").is_err());
        assert!(parse_instance("1 2\n0:0.1 0:0.2\n").is_err());
    }

    #[test]
    fn comments_and_zero_rows() {
        let m = parse_instance("# header next\n3 3 # n d\n0:0.5\n\n# skipped\n2:-0.25\n").unwrap();
        assert_eq!(m.n_rows(), 3);
        assert_eq!(m.row_sq_norm(1), 0.0);
        assert_eq!(m.entry(2, 2).unwrap(), -0.25);
    }

    #[test]
    fn dense_fallback_matches_sparse() {
        let dense = DataMatrix::from_dense(&[vec![0.1, 0.2, 0.3], vec![0.0, 0.0, 0.5]]).unwrap();
        assert_eq!(dense.entry(0, 2).unwrap(), 0.3);
        assert_eq!(dense.entry(1, 0).unwrap(), 0.0);
        let col: Vec<_> = dense.column(2).iter().collect();
        assert_eq!(col, vec![(0, 0.3), (1, 0.5)]);
        assert_eq!(dense.nnz(), 4);
    }

    #[test]
    fn column_read_charges_every_row() {
        let m = DataMatrix::from_rows(3, vec![vec![(0, 0.5)], vec![], vec![(0, 0.1)]]).unwrap();
        let mut c = AccessCounter::new();
        let col = m.read_column(0, &mut c);
        assert_eq!(col.rows, &[0, 2]);
        assert_eq!(c.total(), 3);
        c.start_epoch();
        let _ = m.read_row(0, &mut c).count();
        assert_eq!(c.in_epoch(), 1);
        assert_eq!(c.total(), 4);
    }
}
