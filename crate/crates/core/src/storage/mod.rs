//! On-disk table format.
//!
//! A table named `t` stored in directory `d` consists of:
//!
//! - `d/t.snel`: JSON schema descriptor
//! - `d/t-<col>.snelcol`: column payload, one file per column
//! - `d/t-<col>.snelnull`: validity bitmap for nullable fixed-width columns
//! - `d/t-<col>.snelidx`: sorted index for indexed columns
//!
//! Fixed-width payloads are raw little-endian arrays. Text columns store
//! NUL-terminated strings, the sync marker `SB`, one signed 64-bit offset per
//! row (`-1` for NULL) and a trailing offset pointing at the offset table.

mod bitmap;
mod column;
mod index;
mod schema;
mod table;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::value::ColumnType;

pub use bitmap::Bitmap;
pub use column::{
    read_fixed_column, read_text_column, write_fixed_column, write_text_column, Column, ColumnData,
    FixedColumnWriter, TextColumn, TextColumnWriter, TEXT_SYNC_MARKER,
};
pub use index::{build_index, index_range_lookup, Index, IndexKeys, RangeOp};
pub use schema::{is_identifier, ColumnDescriptor, SchemaDescriptor};
pub use table::{load_table, write_table, Catalog, Table};

/// 0-based row position within a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId(pub u64);

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{path}: malformed schema: {message}")]
    MalformedSchema { path: PathBuf, message: String },
    #[error("{path}: expected {expected} bytes for {rows} rows, found {found}")]
    LengthMismatch {
        path: PathBuf,
        rows: u64,
        expected: u64,
        found: u64,
    },
    #[error("{path}: corrupt file: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("value {value} is not representable as {ty}")]
    ValueOutOfRange { value: String, ty: ColumnType },
    #[error("NULL in non-nullable column at row {row}")]
    NullInNonNullable { row: u64 },
    #[error("string at row {row} contains a NUL byte")]
    EmbeddedNul { row: u64 },
    #[error("row {row} out of range (table has {rows} rows)")]
    RowOutOfRange { row: u64, rows: u64 },
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("column {0} has no index")]
    MissingIndex(String),
    #[error("lookup key {key} does not match column type {ty}")]
    KeyTypeMismatch { key: String, ty: ColumnType },
    #[error("table {0} has no data loaded")]
    NoData(String),
}

pub type Result<T, E = StorageError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StorageError + '_ {
    move |source| {
        if source.kind() == io::ErrorKind::NotFound {
            StorageError::MissingFile(path.to_path_buf())
        } else {
            StorageError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

/// File naming for one table inside a directory.
#[derive(Debug, Clone)]
pub struct TablePaths {
    pub dir: PathBuf,
    pub table: String,
}

impl TablePaths {
    pub fn new(dir: impl Into<PathBuf>, table: impl Into<String>) -> Self {
        Self {
            dir: dir.into(),
            table: table.into(),
        }
    }

    /// Derives the directory and table name from a `<table>.snel` path.
    pub fn from_schema_path(path: &Path) -> Self {
        let dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let table = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self { dir, table }
    }

    pub fn schema(&self) -> PathBuf {
        self.dir.join(format!("{}.snel", self.table))
    }

    pub fn column(&self, column: &str) -> PathBuf {
        self.dir.join(format!("{}-{}.snelcol", self.table, column))
    }

    pub fn nulls(&self, column: &str) -> PathBuf {
        self.dir.join(format!("{}-{}.snelnull", self.table, column))
    }

    pub fn index(&self, column: &str) -> PathBuf {
        self.dir.join(format!("{}-{}.snelidx", self.table, column))
    }
}

/// Path of the validity bitmap that accompanies a fixed-width column file.
pub fn null_path_for(column_path: &Path) -> PathBuf {
    column_path.with_extension("snelnull")
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}
