use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{io_err, null_path_for, Bitmap, ColumnDescriptor, Result, RowId, StorageError};
use crate::value::{ColumnType, Value};

/// Marker separating the string region from the offset table.
pub const TEXT_SYNC_MARKER: [u8; 2] = *b"SB";

/// Decoded payload of one column.
#[derive(Debug, Clone)]
pub enum ColumnData {
    Bool(Vec<u8>),
    Int8(Vec<i8>),
    Int16(Vec<i16>),
    Int32(Vec<i32>),
    Int64(Vec<i64>),
    Float32(Vec<f32>),
    Str(TextColumn),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Bool(v) => v.len(),
            ColumnData::Int8(v) => v.len(),
            ColumnData::Int16(v) => v.len(),
            ColumnData::Int32(v) => v.len(),
            ColumnData::Int64(v) => v.len(),
            ColumnData::Float32(v) => v.len(),
            ColumnData::Str(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A text column held in memory in its on-disk shape.
#[derive(Debug, Clone, Default)]
pub struct TextColumn {
    region: String,
    offsets: Vec<i64>,
}

impl TextColumn {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[i64] {
        &self.offsets
    }

    #[inline]
    pub fn get(&self, row: usize) -> Option<&str> {
        let off = self.offsets[row];
        if off < 0 {
            return None;
        }
        let rest = &self.region[off as usize..];
        let end = rest
            .as_bytes()
            .iter()
            .position(|&b| b == 0)
            .unwrap_or(rest.len());
        Some(&rest[..end])
    }
}

/// An open column: descriptor, payload and validity.
#[derive(Debug, Clone)]
pub struct Column {
    pub descriptor: ColumnDescriptor,
    pub data: ColumnData,
    /// Present for nullable fixed-width columns; text columns encode NULL in their offsets.
    pub validity: Option<Bitmap>,
}

impl Column {
    pub fn name(&self) -> &str {
        &self.descriptor.name
    }

    pub fn ty(&self) -> ColumnType {
        self.descriptor.ty
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn is_null(&self, row: usize) -> bool {
        match (&self.data, &self.validity) {
            (ColumnData::Str(t), _) => t.offsets[row] < 0,
            (_, Some(bm)) => !bm.get(row),
            _ => false,
        }
    }

    pub fn non_null_count(&self) -> usize {
        match (&self.data, &self.validity) {
            (ColumnData::Str(t), _) => t.offsets.iter().filter(|&&o| o >= 0).count(),
            (_, Some(bm)) => bm.count_set(),
            (d, None) => d.len(),
        }
    }

    pub fn str_at(&self, row: usize) -> Option<&str> {
        match &self.data {
            ColumnData::Str(t) => t.get(row),
            _ => None,
        }
    }

    pub fn value(&self, row: RowId) -> Result<Value> {
        let r = row.0 as usize;
        if row.0 >= self.len() as u64 {
            return Err(StorageError::RowOutOfRange {
                row: row.0,
                rows: self.len() as u64,
            });
        }
        if self.is_null(r) {
            return Ok(Value::Null);
        }
        Ok(match &self.data {
            ColumnData::Bool(v) => Value::Bool(v[r] != 0),
            ColumnData::Int8(v) => Value::Int8(v[r]),
            ColumnData::Int16(v) => Value::Int16(v[r]),
            ColumnData::Int32(v) => Value::Int32(v[r]),
            ColumnData::Int64(v) => Value::Int64(v[r]),
            ColumnData::Float32(v) => Value::Float32(v[r]),
            ColumnData::Str(t) => Value::Str(t.get(r).unwrap_or_default().to_owned()),
        })
    }

    /// Builds an in-memory column from values, applying the same checks as the writers.
    pub fn from_values(descriptor: ColumnDescriptor, values: &[Value]) -> Result<Self> {
        let ty = descriptor.ty;
        let mut validity = descriptor.nullable.then(Bitmap::new);
        if ty == ColumnType::String {
            let mut w = TextBuilder::default();
            for (row, v) in values.iter().enumerate() {
                w.push(row as u64, text_of(v, descriptor.nullable, row as u64)?)?;
            }
            return Ok(Column {
                descriptor,
                data: ColumnData::Str(TextColumn {
                    region: String::from_utf8(w.region).expect("utf-8 input"),
                    offsets: w.offsets,
                }),
                validity: None,
            });
        }
        let mut bytes = Vec::with_capacity(values.len() * ty.fixed_width().unwrap_or(0));
        for (row, v) in values.iter().enumerate() {
            let valid = encode_fixed(v, ty, descriptor.nullable, row as u64, &mut bytes)?;
            if let Some(bm) = validity.as_mut() {
                bm.push(valid);
            }
        }
        Ok(Column {
            descriptor,
            data: decode_fixed(ty, &bytes),
            validity,
        })
    }
}

fn text_of(v: &Value, nullable: bool, row: u64) -> Result<Option<&str>> {
    match v {
        Value::Null if nullable => Ok(None),
        Value::Null => Err(StorageError::NullInNonNullable { row }),
        Value::Str(s) => Ok(Some(s)),
        other => Err(StorageError::ValueOutOfRange {
            value: other.to_string(),
            ty: ColumnType::String,
        }),
    }
}

/// Appends the little-endian encoding of `v`; returns whether the value was non-null.
fn encode_fixed(
    v: &Value,
    ty: ColumnType,
    nullable: bool,
    row: u64,
    out: &mut Vec<u8>,
) -> Result<bool> {
    let width = ty.fixed_width().expect("fixed-width type");
    if v.is_null() {
        if !nullable {
            return Err(StorageError::NullInNonNullable { row });
        }
        out.extend(std::iter::repeat_n(0, width));
        return Ok(false);
    }
    let out_of_range = || StorageError::ValueOutOfRange {
        value: v.to_string(),
        ty,
    };
    let coerced = v.coerce_to(ty).ok_or_else(out_of_range)?;
    match coerced {
        Value::Bool(b) => out.push(b as u8),
        Value::Int8(x) => out.extend_from_slice(&x.to_le_bytes()),
        Value::Int16(x) => out.extend_from_slice(&x.to_le_bytes()),
        Value::Int32(x) => out.extend_from_slice(&x.to_le_bytes()),
        Value::Int64(x) => out.extend_from_slice(&x.to_le_bytes()),
        Value::Float32(x) => {
            if !x.is_finite() {
                return Err(out_of_range());
            }
            out.extend_from_slice(&x.to_le_bytes())
        }
        _ => return Err(out_of_range()),
    }
    Ok(true)
}

fn decode_fixed(ty: ColumnType, bytes: &[u8]) -> ColumnData {
    macro_rules! decode {
        ($t:ty, $variant:ident) => {
            ColumnData::$variant(
                bytes
                    .chunks_exact(std::mem::size_of::<$t>())
                    .map(|c| <$t>::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )
        };
    }
    match ty {
        ColumnType::Bool => ColumnData::Bool(bytes.to_vec()),
        ColumnType::Int8 => decode!(i8, Int8),
        ColumnType::Int16 => decode!(i16, Int16),
        ColumnType::Int32 => decode!(i32, Int32),
        ColumnType::Int64 => decode!(i64, Int64),
        ColumnType::Float32 => decode!(f32, Float32),
        ColumnType::String => unreachable!("text columns are not fixed-width"),
    }
}

/// Streaming writer for a fixed-width column and its validity bitmap.
pub struct FixedColumnWriter {
    path: PathBuf,
    ty: ColumnType,
    nullable: bool,
    out: BufWriter<File>,
    scratch: Vec<u8>,
    validity: Bitmap,
    rows: u64,
}

impl FixedColumnWriter {
    pub fn create(path: &Path, ty: ColumnType, nullable: bool) -> Result<Self> {
        assert!(ty.fixed_width().is_some(), "{ty} is not fixed-width");
        let file = File::create(path).map_err(io_err(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            ty,
            nullable,
            out: BufWriter::new(file),
            scratch: Vec::with_capacity(8),
            validity: Bitmap::new(),
            rows: 0,
        })
    }

    pub fn push(&mut self, v: &Value) -> Result<()> {
        self.scratch.clear();
        let valid = encode_fixed(v, self.ty, self.nullable, self.rows, &mut self.scratch)?;
        self.out
            .write_all(&self.scratch)
            .map_err(io_err(&self.path))?;
        if self.nullable {
            self.validity.push(valid);
        }
        self.rows += 1;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(io_err(&self.path))
    }

    /// Flushes the payload and writes the bitmap; returns the row count.
    pub fn finish(mut self) -> Result<u64> {
        self.flush()?;
        if self.nullable {
            let np = null_path_for(&self.path);
            std::fs::write(&np, self.validity.as_bytes()).map_err(io_err(&np))?;
        }
        Ok(self.rows)
    }
}

#[derive(Default)]
struct TextBuilder {
    region: Vec<u8>,
    offsets: Vec<i64>,
}

impl TextBuilder {
    fn push(&mut self, row: u64, s: Option<&str>) -> Result<()> {
        match s {
            None => self.offsets.push(-1),
            Some(s) => {
                if s.as_bytes().contains(&0) {
                    return Err(StorageError::EmbeddedNul { row });
                }
                self.offsets.push(self.region.len() as i64);
                self.region.extend_from_slice(s.as_bytes());
                self.region.push(0);
            }
        }
        Ok(())
    }
}

/// Streaming writer for a text column. Strings go straight to disk; the
/// offset table is kept in memory until [`TextColumnWriter::finish`].
pub struct TextColumnWriter {
    path: PathBuf,
    nullable: bool,
    out: BufWriter<File>,
    offsets: Vec<i64>,
    position: u64,
}

impl TextColumnWriter {
    pub fn create(path: &Path, nullable: bool) -> Result<Self> {
        let file = File::create(path).map_err(io_err(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            nullable,
            out: BufWriter::new(file),
            offsets: Vec::new(),
            position: 0,
        })
    }

    pub fn push(&mut self, s: Option<&str>) -> Result<()> {
        let row = self.offsets.len() as u64;
        match s {
            None if !self.nullable => Err(StorageError::NullInNonNullable { row }),
            None => {
                self.offsets.push(-1);
                Ok(())
            }
            Some(s) => {
                if s.as_bytes().contains(&0) {
                    return Err(StorageError::EmbeddedNul { row });
                }
                self.out
                    .write_all(s.as_bytes())
                    .and_then(|_| self.out.write_all(&[0]))
                    .map_err(io_err(&self.path))?;
                self.offsets.push(self.position as i64);
                self.position += s.len() as u64 + 1;
                Ok(())
            }
        }
    }

    pub fn push_value(&mut self, v: &Value) -> Result<()> {
        let row = self.offsets.len() as u64;
        let s = text_of(v, true, row)?;
        self.push(s)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(io_err(&self.path))
    }

    pub fn finish(mut self) -> Result<u64> {
        let trailer = self.position as i64 + TEXT_SYNC_MARKER.len() as i64;
        let mut tail = Vec::with_capacity(2 + 8 * (self.offsets.len() + 1));
        tail.extend_from_slice(&TEXT_SYNC_MARKER);
        for off in &self.offsets {
            tail.extend_from_slice(&off.to_le_bytes());
        }
        tail.extend_from_slice(&trailer.to_le_bytes());
        self.out.write_all(&tail).map_err(io_err(&self.path))?;
        self.flush()?;
        Ok(self.offsets.len() as u64)
    }
}

/// Writes a fixed-width column file (plus `.snelnull` bitmap when nullable).
pub fn write_fixed_column(
    path: &Path,
    ty: ColumnType,
    nullable: bool,
    values: &[Value],
) -> Result<()> {
    let mut w = FixedColumnWriter::create(path, ty, nullable)?;
    for v in values {
        w.push(v)?;
    }
    w.finish().map(|_| ())
}

/// Writes a text column file.
pub fn write_text_column<S: AsRef<str>>(path: &Path, strings: &[Option<S>]) -> Result<()> {
    let mut w = TextColumnWriter::create(path, true)?;
    for s in strings {
        w.push(s.as_ref().map(AsRef::as_ref))?;
    }
    w.finish().map(|_| ())
}

/// Reads a fixed-width column of `rows` values and, when `nullable`, its bitmap.
pub fn read_fixed_column(
    path: &Path,
    ty: ColumnType,
    rows: u64,
    nullable: bool,
) -> Result<(ColumnData, Option<Bitmap>)> {
    let width = ty.fixed_width().expect("fixed-width type") as u64;
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    if bytes.len() as u64 != rows * width {
        return Err(StorageError::LengthMismatch {
            path: path.to_path_buf(),
            rows,
            expected: rows * width,
            found: bytes.len() as u64,
        });
    }
    let validity = if nullable {
        let np = null_path_for(path);
        let raw = std::fs::read(&np).map_err(io_err(&np))?;
        let found = raw.len() as u64;
        Some(
            Bitmap::from_bytes(raw, rows as usize).ok_or(StorageError::LengthMismatch {
                path: np,
                rows,
                expected: rows.div_ceil(8),
                found,
            })?,
        )
    } else {
        None
    };
    Ok((decode_fixed(ty, &bytes), validity))
}

/// Reads and validates a text column of `rows` entries.
pub fn read_text_column(path: &Path, rows: u64) -> Result<TextColumn> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let corrupt = |message: String| StorageError::Corrupt {
        path: path.to_path_buf(),
        message,
    };
    let len = bytes.len() as u64;
    let expected_min = 2 + 8 * (rows + 1);
    if len < expected_min {
        return Err(StorageError::LengthMismatch {
            path: path.to_path_buf(),
            rows,
            expected: expected_min,
            found: len,
        });
    }
    let trailer = i64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    if trailer < 2 || trailer as u64 + 8 * rows + 8 != len {
        return Err(StorageError::LengthMismatch {
            path: path.to_path_buf(),
            rows,
            expected: trailer.max(0) as u64 + 8 * rows + 8,
            found: len,
        });
    }
    let table_start = trailer as usize;
    let region_len = table_start - 2;
    if bytes[region_len..table_start] != TEXT_SYNC_MARKER {
        return Err(corrupt("missing sync marker".into()));
    }
    if region_len > 0 && bytes[region_len - 1] != 0 {
        return Err(corrupt("string region is not NUL-terminated".into()));
    }
    let offsets: Vec<i64> = bytes[table_start..bytes.len() - 8]
        .chunks_exact(8)
        .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let region = String::from_utf8(bytes[..region_len].to_vec())
        .map_err(|_| corrupt("string region is not UTF-8".into()))?;
    for (row, &off) in offsets.iter().enumerate() {
        if off < -1
            || off >= region_len as i64
            || (off >= 0 && !region.is_char_boundary(off as usize))
        {
            return Err(corrupt(format!("bad offset {off} at row {row}")));
        }
    }
    Ok(TextColumn { region, offsets })
}

impl Column {
    /// Opens one column of a table.
    pub fn open(column_path: &Path, descriptor: &ColumnDescriptor, rows: u64) -> Result<Self> {
        let (data, validity) = if descriptor.ty == ColumnType::String {
            (ColumnData::Str(read_text_column(column_path, rows)?), None)
        } else {
            read_fixed_column(column_path, descriptor.ty, rows, descriptor.nullable)?
        };
        Ok(Column {
            descriptor: descriptor.clone(),
            data,
            validity,
        })
    }
}
