use std::cmp::Ordering;
use std::fmt;
use std::ops::Range;
use std::path::Path;

use super::{io_err, Column, ColumnData, Result, RowId, StorageError, Table};
use crate::value::{cmp_int_float, ColumnType, Value};

/// Comparison used for an index probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RangeOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl RangeOp {
    pub fn symbol(self) -> &'static str {
        match self {
            RangeOp::Lt => "<",
            RangeOp::Le => "<=",
            RangeOp::Gt => ">",
            RangeOp::Ge => ">=",
            RangeOp::Eq => "=",
        }
    }

    /// Whether `ord` (stored value compared to key) satisfies the operator.
    pub fn accepts(self, ord: Ordering) -> bool {
        match self {
            RangeOp::Lt => ord == Ordering::Less,
            RangeOp::Le => ord != Ordering::Greater,
            RangeOp::Gt => ord == Ordering::Greater,
            RangeOp::Ge => ord != Ordering::Less,
            RangeOp::Eq => ord == Ordering::Equal,
        }
    }
}

impl fmt::Display for RangeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Sorted keys of an index. String indexes hold no keys; values are read through the column.
#[derive(Debug, Clone)]
pub enum IndexKeys {
    Int(Vec<i64>),
    Float(Vec<f32>),
    Str,
}

/// A sorted `(value, rowid)` index over one column. Null rows are not indexed.
#[derive(Debug, Clone)]
pub struct Index {
    pub ty: ColumnType,
    pub keys: IndexKeys,
    pub rowids: Vec<u64>,
}

impl Index {
    pub fn len(&self) -> usize {
        self.rowids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rowids.is_empty()
    }

    /// Sorts the non-null rows of `column`.
    pub fn build(column: &Column) -> Index {
        let n = column.len();
        let valid = (0..n).filter(|&r| !column.is_null(r));
        let ty = column.ty();
        macro_rules! ints {
            ($v:expr) => {{
                let mut pairs: Vec<(i64, u64)> = valid.map(|r| ($v[r] as i64, r as u64)).collect();
                pairs.sort_unstable();
                let (keys, rowids) = pairs.into_iter().unzip();
                Index {
                    ty,
                    keys: IndexKeys::Int(keys),
                    rowids,
                }
            }};
        }
        match &column.data {
            ColumnData::Bool(v) => ints!(v),
            ColumnData::Int8(v) => ints!(v),
            ColumnData::Int16(v) => ints!(v),
            ColumnData::Int32(v) => ints!(v),
            ColumnData::Int64(v) => ints!(v),
            ColumnData::Float32(v) => {
                let mut pairs: Vec<(f32, u64)> = valid.map(|r| (v[r], r as u64)).collect();
                pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let (keys, rowids) = pairs.into_iter().unzip();
                Index {
                    ty,
                    keys: IndexKeys::Float(keys),
                    rowids,
                }
            }
            ColumnData::Str(t) => {
                let mut rowids: Vec<u64> = valid.map(|r| r as u64).collect();
                rowids.sort_by(|&a, &b| t.get(a as usize).cmp(&t.get(b as usize)));
                Index {
                    ty,
                    keys: IndexKeys::Str,
                    rowids,
                }
            }
        }
    }

    /// On-disk entry size in bytes.
    pub fn entry_size(ty: ColumnType) -> usize {
        ty.fixed_width().map_or(8, |w| w + 8)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * Self::entry_size(self.ty));
        for (i, rowid) in self.rowids.iter().enumerate() {
            match &self.keys {
                IndexKeys::Int(k) => {
                    let v = k[i];
                    match self.ty {
                        ColumnType::Bool | ColumnType::Int8 => out.push(v as u8),
                        ColumnType::Int16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
                        ColumnType::Int32 => out.extend_from_slice(&(v as i32).to_le_bytes()),
                        _ => out.extend_from_slice(&v.to_le_bytes()),
                    }
                }
                IndexKeys::Float(k) => out.extend_from_slice(&k[i].to_le_bytes()),
                IndexKeys::Str => {}
            }
            out.extend_from_slice(&rowid.to_le_bytes());
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        super::write_atomic(path, &self.to_bytes())
    }

    /// Reads an index file for a column of type `ty`, checking entry alignment.
    pub fn read(path: &Path, ty: ColumnType) -> Result<Index> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        let size = Self::entry_size(ty);
        if bytes.len() % size != 0 {
            return Err(StorageError::Corrupt {
                path: path.to_path_buf(),
                message: format!(
                    "length {} is not a multiple of entry size {size}",
                    bytes.len()
                ),
            });
        }
        let width = size - 8;
        let mut rowids = Vec::with_capacity(bytes.len() / size);
        let mut ints = Vec::new();
        let mut floats = Vec::new();
        for e in bytes.chunks_exact(size) {
            let (k, r) = e.split_at(width);
            rowids.push(u64::from_le_bytes(r.try_into().unwrap()));
            match ty {
                ColumnType::Bool => ints.push(k[0] as i64),
                ColumnType::Int8 => ints.push(k[0] as i8 as i64),
                ColumnType::Int16 => ints.push(i16::from_le_bytes(k.try_into().unwrap()) as i64),
                ColumnType::Int32 => ints.push(i32::from_le_bytes(k.try_into().unwrap()) as i64),
                ColumnType::Int64 => ints.push(i64::from_le_bytes(k.try_into().unwrap())),
                ColumnType::Float32 => floats.push(f32::from_le_bytes(k.try_into().unwrap())),
                ColumnType::String => {}
            }
        }
        let keys = match ty {
            ColumnType::Float32 => IndexKeys::Float(floats),
            ColumnType::String => IndexKeys::Str,
            _ => IndexKeys::Int(ints),
        };
        Ok(Index { ty, keys, rowids })
    }

    /// Checks the index against its column: count, rowid bounds, order.
    pub fn validate(&self, column: &Column) -> std::result::Result<(), String> {
        let rows = column.len() as u64;
        if self.len() != column.non_null_count() {
            return Err(format!(
                "{} entries for {} non-null rows",
                self.len(),
                column.non_null_count()
            ));
        }
        if let Some(r) = self
            .rowids
            .iter()
            .find(|&&r| r >= rows || column.is_null(r as usize))
        {
            return Err(format!("entry refers to invalid row {r}"));
        }
        let sorted = (1..self.len()).all(|i| {
            let (a, b) = (self.rowids[i - 1], self.rowids[i]);
            let ord = match &self.keys {
                IndexKeys::Int(k) => k[i - 1].cmp(&k[i]).then(a.cmp(&b)),
                IndexKeys::Float(k) => k[i - 1].total_cmp(&k[i]).then(a.cmp(&b)),
                IndexKeys::Str => column.str_at(a as usize).cmp(&column.str_at(b as usize)),
            };
            ord != Ordering::Greater
        });
        if !sorted {
            return Err("entries are not sorted".into());
        }
        Ok(())
    }

    /// Positions `[lo, hi)` of the entries whose value satisfies `value op key`.
    /// `column` is consulted only for string indexes.
    pub fn range(&self, column: &Column, op: RangeOp, key: &Value) -> Result<Range<usize>> {
        let mismatch = || StorageError::KeyTypeMismatch {
            key: key.to_sql(),
            ty: self.ty,
        };
        if key.is_null() {
            return Ok(0..0);
        }
        // cmp(entry i, key)
        let (lo, hi) = match &self.keys {
            IndexKeys::Int(keys) => {
                let cmp: Box<dyn Fn(i64) -> Ordering> = match key {
                    Value::Float32(f) => {
                        let f = *f as f64;
                        Box::new(move |v| cmp_int_float(v, f))
                    }
                    _ => {
                        let k = key.as_i64().ok_or_else(mismatch)?;
                        Box::new(move |v: i64| v.cmp(&k))
                    }
                };
                bounds(keys.len(), |i| cmp(keys[i]))
            }
            IndexKeys::Float(keys) => {
                let cmp: Box<dyn Fn(f32) -> Ordering> = match key {
                    Value::Float32(f) => {
                        let f = *f;
                        Box::new(move |v: f32| v.partial_cmp(&f).unwrap_or(Ordering::Less))
                    }
                    _ => {
                        let k = key.as_i64().ok_or_else(mismatch)?;
                        Box::new(move |v: f32| cmp_int_float(k, v as f64).reverse())
                    }
                };
                bounds(keys.len(), |i| cmp(keys[i]))
            }
            IndexKeys::Str => {
                let k = key.as_str().ok_or_else(mismatch)?;
                bounds(self.len(), |i| {
                    column
                        .str_at(self.rowids[i] as usize)
                        .unwrap_or_default()
                        .cmp(k)
                })
            }
        };
        let n = self.len();
        Ok(match op {
            RangeOp::Lt => 0..lo,
            RangeOp::Le => 0..hi,
            RangeOp::Gt => hi..n,
            RangeOp::Ge => lo..n,
            RangeOp::Eq => lo..hi,
        })
    }
}

/// First position not less than the key, and first position greater than it.
fn bounds(n: usize, cmp: impl Fn(usize) -> Ordering) -> (usize, usize) {
    let lo = partition_point(n, |i| cmp(i) == Ordering::Less);
    let hi = lo + partition_point(n - lo, |i| cmp(lo + i) != Ordering::Greater);
    (lo, hi)
}

fn partition_point(n: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Builds the index for `column` of `table` and writes it next to the table's files
/// when the table is disk-backed.
pub fn build_index(table: &Table, column: &str) -> Result<Index> {
    let col = table.column(column)?;
    let index = Index::build(col);
    if let Some(paths) = table.paths() {
        index.write(&paths.index(column))?;
    }
    Ok(index)
}

/// Rowids of the non-null rows satisfying `value op key`, in index order.
pub fn index_range_lookup<'t>(
    table: &'t Table,
    column: &str,
    op: RangeOp,
    key: &Value,
) -> Result<impl Iterator<Item = RowId> + 't> {
    let col = table.column(column)?;
    let index = table
        .index(column)
        .ok_or_else(|| StorageError::MissingIndex(column.to_owned()))?;
    let range = index.range(col, op, key)?;
    Ok(index.rowids[range].iter().map(|&r| RowId(r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::ColumnDescriptor;

    fn int_col(vals: &[Option<i64>]) -> Column {
        let values: Vec<Value> = vals
            .iter()
            .map(|v| v.map_or(Value::Null, Value::Int64))
            .collect();
        Column::from_values(
            ColumnDescriptor::new("c", ColumnType::Int32).nullable(),
            &values,
        )
        .unwrap()
    }

    fn lookup(col: &Column, op: RangeOp, k: Value) -> Vec<u64> {
        let idx = Index::build(col);
        let r = idx.range(col, op, &k).unwrap();
        idx.rowids[r].to_vec()
    }

    #[test]
    fn sorted_by_value_then_rowid() {
        let idx = Index::build(&int_col(&[Some(7), Some(3), Some(3)]));
        assert!(matches!(&idx.keys, IndexKeys::Int(k) if k == &[3, 3, 7]));
        assert_eq!(idx.rowids, vec![1, 2, 0]);
        assert_eq!(idx.to_bytes().len(), 3 * 12);
    }

    #[test]
    fn all_nulls_gives_empty_index() {
        assert!(Index::build(&int_col(&[None, None])).is_empty());
    }

    #[test]
    fn string_index_orders_rowids() {
        let col = Column::from_values(
            ColumnDescriptor::new("s", ColumnType::String),
            &[Value::Str("b".into()), Value::Str("a".into())],
        )
        .unwrap();
        let idx = Index::build(&col);
        assert_eq!(idx.rowids, vec![1, 0]);
        assert_eq!(idx.to_bytes().len(), 16);
        assert_eq!(lookup(&col, RangeOp::Ge, Value::Str("b".into())), vec![0]);
    }

    #[test]
    fn probes() {
        let col = int_col(&[Some(1), Some(3), Some(3), Some(7)]);
        assert_eq!(lookup(&col, RangeOp::Gt, Value::Int64(2)), vec![1, 2, 3]);
        assert!(lookup(&col, RangeOp::Gt, Value::Int64(100)).is_empty());
        assert_eq!(lookup(&col, RangeOp::Eq, Value::Int64(3)), vec![1, 2]);
        assert_eq!(lookup(&col, RangeOp::Le, Value::Int64(3)), vec![0, 1, 2]);
        assert_eq!(
            lookup(&col, RangeOp::Lt, Value::Float32(3.5)),
            vec![0, 1, 2]
        );
        assert_eq!(lookup(&col, RangeOp::Ge, Value::Float32(3.5)), vec![3]);
    }

    #[test]
    fn type_mismatch() {
        let col = int_col(&[Some(1)]);
        let idx = Index::build(&col);
        assert!(matches!(
            idx.range(&col, RangeOp::Eq, &Value::Str("x".into())),
            Err(StorageError::KeyTypeMismatch { .. })
        ));
    }

    #[test]
    fn bytes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t-c.snelidx");
        let col = int_col(&[Some(-5), None, Some(9)]);
        let idx = Index::build(&col);
        idx.write(&p).unwrap();
        let back = Index::read(&p, ColumnType::Int32).unwrap();
        assert_eq!(back.rowids, idx.rowids);
        back.validate(&col).unwrap();
    }
}
